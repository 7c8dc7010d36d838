"""Operation counting, wall-clock timing and the training energy proxy.

Counting is explicit: every kernel in the encoder and model calls
:func:`record` with the exact number of operations it executes. Records go
to the innermost open :func:`scope` of the calling thread; when a scope
closes its counter is added into the enclosing one, so nested scopes sum
naturally.

Convention: a multiply-add counts as one op, an element of a vector
add/subtract as one op, each cosine as one activation, and every element
squared while computing a norm as one norm op plus one more for the root.
Norm ops are tracked but excluded from :meth:`OpCounter.arithmetic`, which
is the quantity compared against the analytic cost model.
"""

from __future__ import annotations

import statistics
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Callable, Optional

_FIELDS = ("mul_add", "add_sub", "activation", "norm_ops")


class Stage(str, Enum):
    ENCODE = "encode"
    TRAIN = "train"
    INFER = "infer"
    RETRAIN = "retrain"


@dataclass
class OpCounter:
    mul_add: int = 0
    add_sub: int = 0
    activation: int = 0
    norm_ops: int = 0

    def add(self, other: "OpCounter") -> "OpCounter":
        for name in _FIELDS:
            setattr(self, name, getattr(self, name) + getattr(other, name))
        return self

    def __add__(self, other: "OpCounter") -> "OpCounter":
        return self.copy().add(other)

    def scaled(self, k: int) -> "OpCounter":
        return OpCounter(*(getattr(self, name) * k for name in _FIELDS))

    def copy(self) -> "OpCounter":
        return OpCounter(*(getattr(self, name) for name in _FIELDS))

    @property
    def arithmetic(self) -> int:
        """Multiply-adds + add/subs + activations (norm bookkeeping excluded)."""
        return self.mul_add + self.add_sub + self.activation

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in _FIELDS}

    @classmethod
    def from_dict(cls, d: dict) -> "OpCounter":
        return cls(**{name: int(d.get(name, 0)) for name in _FIELDS})


class _ThreadState(threading.local):
    def __init__(self):
        self.stack: list[tuple[Stage, OpCounter]] = []
        # (stack depth when the ledger opened, stage name -> OpCounter)
        self.ledgers: list[tuple[int, dict]] = []


_state = _ThreadState()


def record(mul_add: int = 0, add_sub: int = 0, activation: int = 0, norm_ops: int = 0) -> None:
    """Add operations to the innermost open scope (no-op outside any scope)."""
    if not _state.stack:
        return
    c = _state.stack[-1][1]
    c.mul_add += int(mul_add)
    c.add_sub += int(add_sub)
    c.activation += int(activation)
    c.norm_ops += int(norm_ops)


@contextmanager
def scope(stage: Stage | str):
    """Open a counting scope; yields the :class:`OpCounter` it fills."""
    stage = Stage(stage)
    counter = OpCounter()
    _state.stack.append((stage, counter))
    try:
        yield counter
    finally:
        _state.stack.pop()
        if _state.stack:
            _state.stack[-1][1].add(counter)
        # a stage nested inside the same stage is already part of the outer
        # total, as long as that outer scope belongs to the ledger's block
        for base, ledger in _state.ledgers:
            if not any(s == stage for s, _ in _state.stack[base:]):
                ledger.setdefault(stage.value, OpCounter()).add(counter)


@contextmanager
def stage_totals():
    """Collect per-stage totals of every scope closed inside the block.

    Yields a dict mapping stage name to :class:`OpCounter`. A stage nested
    in another stage (encoding inside training) is reported under both.
    """
    entry = (len(_state.stack), {})
    _state.ledgers.append(entry)
    try:
        yield entry[1]
    finally:
        _state.ledgers.remove(entry)


def scoped_count(stage: Stage | str, body: Callable, *args, **kwargs):
    """Run ``body`` inside a scope and return ``(result, counter)``."""
    with scope(stage) as counter:
        result = body(*args, **kwargs)
    return result, counter


def measure_time(body: Callable, *args, repeat: int = 1, **kwargs):
    """Run ``body`` ``repeat`` times; return the last result and the median elapsed seconds."""
    if repeat < 1:
        raise ValueError("repeat must be >= 1")
    elapsed = []
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = body(*args, **kwargs)
        elapsed.append(time.perf_counter() - t0)
    return result, statistics.median(elapsed)


@dataclass(frozen=True)
class EnergyModel:
    """Linear energy proxy over operation counts (joules per op).

    The defaults are declared constants, not hardware measurements.
    """

    joules_per_mul_add: float = 1e-9
    joules_per_activation: float = 5e-9
    joules_per_add_sub: float = 1e-9
    joules_per_norm_op: float = 1e-9

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be positive")


def energy(model: EnergyModel, counter: OpCounter) -> float:
    return (
        model.joules_per_mul_add * counter.mul_add
        + model.joules_per_add_sub * counter.add_sub
        + model.joules_per_activation * counter.activation
        + model.joules_per_norm_op * counter.norm_ops
    )


# An external meter returns cumulative joules each time it is called.
EnergyMeter = Callable[[], float]


@dataclass
class EnergyProbe:
    """Energy of a block, from ``meter`` when given, else from the proxy."""

    model: EnergyModel = field(default_factory=EnergyModel)
    meter: Optional[EnergyMeter] = None
    joules: float = 0.0

    @contextmanager
    def measure(self, stage: Stage | str = Stage.TRAIN):
        start = self.meter() if self.meter is not None else None
        with scope(stage) as counter:
            yield counter
        if self.meter is not None:
            self.joules = max(0.0, float(self.meter()) - start)
        else:
            self.joules = energy(self.model, counter)


@dataclass
class MetricsRecord:
    accuracy: float
    inference_time_ms: float
    train_time_s: float
    energy_J: float
    op_counts: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy must lie in [0, 1], got {self.accuracy}")
        for name in ("inference_time_ms", "train_time_s", "energy_J"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "inference_time_ms": self.inference_time_ms,
            "train_time_s": self.train_time_s,
            "energy_j": self.energy_J,
            "ops": {stage.value: self.op_counts.get(stage.value, OpCounter()).as_dict() for stage in Stage},
        }
