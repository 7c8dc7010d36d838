import numpy as np
import pytest

from hdctune.synthdata import Split, gen_image_task, gen_signal_task, split, standardize


def prepared(ds, fraction=0.3, seed=0):
    sp = split(ds, fraction, seed)
    return Split(standardize(sp.train), standardize(sp.train, sp.test), fraction, sp.train_rows, sp.test_rows)


@pytest.fixture(scope="session")
def image_split():
    return prepared(gen_image_task(400, 16, seed=1), seed=1)


@pytest.fixture(scope="session")
def small_signal_split():
    return prepared(gen_signal_task(300, seed=1), seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Return a recorder: ``criterion(number, ok, detail)`` prints and stores one PASS/FAIL line."""

    def report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
