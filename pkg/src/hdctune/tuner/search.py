"""Constrained Bayesian search over (encoder kind, D, sigma_b).

The problem is

    maximize accuracy(theta)
    s.t.     accuracy >= acc_min, inference time <= I_max,
             training time <= T_max, training energy <= E_max

Each kind gets its own GP surrogates over the unit square
``(log D, sigma_b)``: one for accuracy and one for the log of every cost
that carries a finite bound. The acquisition is the expected improvement
over the best feasible accuracy so far, weighted by the probability that
every constraint holds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..core import STREAM_TUNER, ConfigurationError, ParameterError, check_seed, make_rng
from ..encoder import EncoderConfig, EncoderKind, build_basis, encode_batch
from ..instrumentation import EnergyModel, EnergyProbe, MetricsRecord, Stage, measure_time, scope
from ..model import fit, infer_batch
from .gp import GP, expected_improvement, prob_above, prob_below
from .pareto import ParetoFront, pareto_insert

N_RANDOM = 10
N_CANDIDATES = 1024
DEFAULT_EPISODES = 50
_KIND_ORDER = (EncoderKind.RP, EncoderKind.RFF)


@dataclass(frozen=True)
class Theta:
    kind: EncoderKind
    D: int
    sigma_b: float

    def __post_init__(self):
        object.__setattr__(self, "kind", EncoderKind(self.kind))
        object.__setattr__(self, "D", int(self.D))
        object.__setattr__(self, "sigma_b", float(self.sigma_b))


@dataclass(frozen=True)
class SearchSpace:
    kinds: tuple = _KIND_ORDER
    D_range: tuple = (100, 50000)
    sigma_range: tuple = (0.01, 2.0)

    def __post_init__(self):
        kinds = tuple(sorted({EncoderKind(k) for k in self.kinds}, key=_KIND_ORDER.index))
        if not kinds:
            raise ConfigurationError("search space has no encoder kinds")
        lo, hi = self.D_range
        if int(lo) != lo or int(hi) != hi or lo < 1 or lo > hi:
            raise ConfigurationError(f"invalid D range {self.D_range}")
        slo, shi = self.sigma_range
        if not (0 < slo <= shi < math.inf):
            raise ConfigurationError(f"invalid sigma range {self.sigma_range}")
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "D_range", (int(lo), int(hi)))
        object.__setattr__(self, "sigma_range", (float(slo), float(shi)))

    def contains(self, theta: Theta) -> bool:
        return (
            theta.kind in self.kinds
            and self.D_range[0] <= theta.D <= self.D_range[1]
            and self.sigma_range[0] <= theta.sigma_b <= self.sigma_range[1]
        )

    def to_unit(self, D, sigma) -> np.ndarray:
        """Map ``(D, sigma)`` to the unit square (log scale for D)."""
        lo, hi = np.log(self.D_range)
        u = (np.log(np.asarray(D, dtype=np.float64)) - lo) / (hi - lo) if hi > lo else np.zeros(np.shape(D))
        slo, shi = self.sigma_range
        v = (np.asarray(sigma, dtype=np.float64) - slo) / (shi - slo) if shi > slo else np.zeros(np.shape(sigma))
        return np.column_stack([np.atleast_1d(u), np.atleast_1d(v)])

    def sample(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = np.log(self.D_range)
        D = np.rint(np.exp(rng.uniform(lo, hi, size=n))).astype(np.int64)
        D = np.clip(D, *self.D_range)
        sigma = np.clip(rng.uniform(*self.sigma_range, size=n), *self.sigma_range)
        return D, sigma


@dataclass(frozen=True)
class Constraints:
    acc_min: float = 0.0
    inference_max_ms: float = math.inf
    train_max_s: float = math.inf
    energy_max_J: float = math.inf

    def __post_init__(self):
        if not self.acc_min >= 0 or math.isnan(self.acc_min):
            raise ParameterError(f"acc_min must be non-negative, got {self.acc_min}")
        for name in ("inference_max_ms", "train_max_s", "energy_max_J"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")

    def satisfied(self, m: MetricsRecord) -> bool:
        return (
            m.accuracy >= self.acc_min
            and m.inference_time_ms <= self.inference_max_ms
            and m.train_time_s <= self.train_max_s
            and m.energy_J <= self.energy_max_J
        )

    def cost_bounds(self) -> dict:
        """Finite cost bounds keyed by metric attribute."""
        bounds = {
            "inference_time_ms": self.inference_max_ms,
            "train_time_s": self.train_max_s,
            "energy_J": self.energy_max_J,
        }
        return {k: v for k, v in bounds.items() if math.isfinite(v)}


@dataclass
class TrialRecord:
    index: int
    theta: Theta
    metrics: MetricsRecord
    feasible: bool
    rng_seed: int

    def to_json(self) -> dict:
        m = self.metrics
        return {
            "index": self.index,
            "kind": self.theta.kind.value,
            "dim": self.theta.D,
            "sigma_b": self.theta.sigma_b,
            "accuracy": m.accuracy,
            "inference_time_ms": m.inference_time_ms,
            "train_time_s": m.train_time_s,
            "energy_j": m.energy_J,
            "feasible": self.feasible,
            "seed": self.rng_seed,
        }

    @classmethod
    def from_json(cls, d: dict) -> "TrialRecord":
        metrics = MetricsRecord(
            accuracy=float(d["accuracy"]),
            inference_time_ms=float(d["inference_time_ms"]),
            train_time_s=float(d["train_time_s"]),
            energy_J=float(d["energy_j"]),
        )
        theta = Theta(d["kind"], int(d["dim"]), float(d["sigma_b"]))
        return cls(int(d["index"]), theta, metrics, bool(d["feasible"]), int(d["seed"]))


def evaluate(
    theta: Theta,
    data,
    epochs: int = 20,
    rep: int = 5,
    seed: int = 0,
    early_stop: bool = True,
    energy_model: Optional[EnergyModel] = None,
    meter=None,
) -> MetricsRecord:
    """Train on ``data.train`` and score on ``data.test``; see :func:`train_and_score`."""
    return train_and_score(theta, data, epochs, rep, seed, early_stop, energy_model, meter)[0]


def train_and_score(
    theta: Theta,
    data,
    epochs: int = 20,
    rep: int = 5,
    seed: int = 0,
    early_stop: bool = True,
    energy_model: Optional[EnergyModel] = None,
    meter=None,
):
    """Train on ``data.train`` and score on ``data.test``; returns ``(metrics, memory, basis)``.

    Training time and energy cover encoding, bundling and retraining (the
    basis is built beforehand and not charged). Inference time is the
    median over ``rep`` runs of encoding plus classifying the whole test
    set; operation counts come from a single run.
    """
    config = EncoderConfig(theta.kind, theta.D, theta.sigma_b, seed)
    basis = build_basis(config, data.train.J)
    probe = EnergyProbe(energy_model or EnergyModel(), meter)
    with probe.measure(Stage.TRAIN):
        (memory, stats, _), train_s = measure_time(fit, data.train, config, epochs, early_stop, basis)

    def infer_all():
        H = encode_batch(basis, data.test.features)
        return infer_batch(memory, H)[0]

    with scope(Stage.INFER) as infer_ops:
        pred = infer_all()
    _, infer_s = measure_time(infer_all, repeat=rep)
    acc = float(np.mean(pred == data.test.labels)) if data.test.N else 0.0

    ops = dict(stats.ops)
    ops[Stage.INFER.value] = infer_ops.copy()
    return MetricsRecord(acc, 1e3 * infer_s, train_s, probe.joules, ops), memory, basis


class _KindModel:
    def __init__(self, trials, space: SearchSpace, targets: dict, priors: dict):
        X = space.to_unit([t.theta.D for t in trials], [t.theta.sigma_b for t in trials]) if trials else []
        self.gps = {
            name: GP(X, [fn(t) for t in trials], *priors[name]) for name, fn in targets.items()
        }

    def predict(self, name, Xq):
        return self.gps[name].predict(Xq)


def _log_metric(name):
    return lambda t: math.log(max(getattr(t.metrics, name), 1e-300))


def suggest(history, space: SearchSpace, constraints: Constraints, rng: np.random.Generator) -> Theta:
    """Propose the next configuration.

    The first ``N_RANDOM`` proposals are uniform random (log-uniform in D).
    After that, candidates are scored by feasibility-weighted expected
    improvement; ties go to lower predicted energy, then lower D, then RP.
    """
    history = list(history)
    if len(history) < N_RANDOM:
        kind = space.kinds[int(rng.integers(len(space.kinds)))]
        D, sigma = space.sample(rng, 1)
        return Theta(kind, int(D[0]), float(sigma[0]))

    targets = {"accuracy": lambda t: t.metrics.accuracy, "energy_J": _log_metric("energy_J")}
    for name in constraints.cost_bounds():
        targets[name] = _log_metric(name)
    priors = {}
    for name, fn in targets.items():
        ys = np.array([fn(t) for t in history])
        priors[name] = (float(ys.mean()), float(ys.std()) if ys.std() > 1e-12 else 1.0)

    feasible = [t.metrics.accuracy for t in history if t.feasible]
    best = max(feasible) if feasible else None

    rows = []  # (acquisition, predicted log energy, D, kind order, sigma)
    for kind in space.kinds:
        trials = [t for t in history if t.theta.kind is kind]
        model = _KindModel(trials, space, targets, priors)
        D, sigma = space.sample(rng, N_CANDIDATES)
        Xq = space.to_unit(D, sigma)
        mu, sd = model.predict("accuracy", Xq)
        pof = prob_above(mu, sd, constraints.acc_min) if constraints.acc_min > 0 else np.ones(len(D))
        for name, bound in constraints.cost_bounds().items():
            cmu, csd = model.predict(name, Xq)
            pof = pof * prob_below(cmu, csd, math.log(bound))
        acq = pof * expected_improvement(mu, sd, best) if best is not None else pof
        energy_mu, _ = model.predict("energy_J", Xq)
        rows.append((acq, energy_mu, D, np.full(len(D), _KIND_ORDER.index(kind)), sigma))

    acq, energy_mu, D, order, sigma = (np.concatenate(c) for c in zip(*rows))
    pick = np.lexsort((order, D, energy_mu, -acq))[0]
    return Theta(_KIND_ORDER[order[pick]], int(D[pick]), float(sigma[pick]))


def best_feasible(trials) -> Optional[TrialRecord]:
    """Highest accuracy, then lower energy, lower inference time, earlier index."""
    feasible = [t for t in trials if t.feasible]
    if not feasible:
        return None
    return min(
        feasible,
        key=lambda t: (-t.metrics.accuracy, t.metrics.energy_J, t.metrics.inference_time_ms, t.index),
    )


def read_log(path) -> list[TrialRecord]:
    trials = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                trials.append(TrialRecord.from_json(json.loads(line)))
    for i, t in enumerate(trials):
        if t.index != i:
            raise ConfigurationError(f"trial log {path} is out of order at line {i + 1}")
    return trials


@dataclass
class TuneResult:
    trials: list
    front: ParetoFront
    best: Optional[TrialRecord] = field(default=None)


def run(
    space: SearchSpace,
    constraints: Constraints,
    data,
    episodes: int = DEFAULT_EPISODES,
    seed: int = 0,
    evaluate_fn: Optional[Callable[[Theta], MetricsRecord]] = None,
    log_path=None,
    resume: bool = False,
    epochs: int = 20,
    rep: int = 5,
    on_trial: Optional[Callable[[TrialRecord], None]] = None,
) -> tuple[list, ParetoFront]:
    """Run ``episodes`` suggest/evaluate rounds.

    Episode ``k`` draws from stream ``STREAM_TUNER + k`` of ``seed``, so a
    run resumed from its log follows the same trajectory as an
    uninterrupted one. Every trial trains with ``seed`` as its basis seed.
    """
    if int(episodes) != episodes or episodes < 0:
        raise ParameterError(f"episodes must be a non-negative integer, got {episodes!r}")
    seed = check_seed(seed)
    if evaluate_fn is None:
        def evaluate_fn(theta):
            return evaluate(theta, data, epochs=epochs, rep=rep, seed=seed)

    history: list[TrialRecord] = []
    if resume and log_path is not None and Path(log_path).exists():
        history = read_log(log_path)[: int(episodes)]
    front = ParetoFront()
    for t in history:
        front = pareto_insert(front, t)

    log = None
    if log_path is not None:
        log = open(log_path, "a" if resume else "w")
    try:
        for k in range(len(history), int(episodes)):
            rng = make_rng(seed, STREAM_TUNER + k)
            theta = suggest(history, space, constraints, rng)
            metrics = evaluate_fn(theta)
            trial = TrialRecord(k, theta, metrics, constraints.satisfied(metrics), seed)
            history.append(trial)
            front = pareto_insert(front, trial)
            if log is not None:
                log.write(json.dumps(trial.to_json()) + "\n")
                log.flush()
            if on_trial is not None:
                on_trial(trial)
    finally:
        if log is not None:
            log.close()
    return history, front
