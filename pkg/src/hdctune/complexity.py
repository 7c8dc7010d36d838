"""Exact operation counts for inference, training and retraining.

The asymptotic costs O(JD + LD), O(ND(J+1)) and O(PD(J+L+1)) are
instantiated as exact integer counts under the counting convention of
:mod:`hdctune.instrumentation`, so they can be compared with measured
counters at zero tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .core import ParameterError
from .encoder import EncoderKind
from .instrumentation import OpCounter


class CostMode(str, Enum):
    INFERENCE = "inference"
    TRAINING = "training"
    RETRAINING = "retraining"  # every correction re-encodes its sample
    RETRAINING_CACHED = "retraining-cached"  # encodings cached, every sample scanned


@dataclass(frozen=True)
class CostQuery:
    J: int = 0
    D: int = 1
    L: int = 0
    N: int = 0
    P: int = 0
    kind: EncoderKind = EncoderKind.RP
    epochs: int = 1  # passes over the N samples, cached retraining only

    def __post_init__(self):
        object.__setattr__(self, "kind", EncoderKind(self.kind))
        for name in ("J", "D", "L", "N", "P", "epochs"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ParameterError(f"{name} must be a non-negative integer, got {value!r}")
        if self.D < 1:
            raise ParameterError("D must be at least 1")


@dataclass(frozen=True)
class CostBreakdown:
    encode_ops: int = 0
    similarity_ops: int = 0
    update_ops: int = 0
    activation_ops: int = 0
    total: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "total", self.encode_ops + self.similarity_ops + self.update_ops + self.activation_ops
        )

    @property
    def mul_add(self) -> int:
        return self.encode_ops + self.similarity_ops


def _needs_classes(q: CostQuery):
    if q.L < 1:
        raise ParameterError("L must be at least 1 for inference and retraining costs")


def inference_cost(q: CostQuery) -> CostBreakdown:
    """Cost of classifying one query: encode ``J*D``, compare ``L*D``, plus ``D`` cosines for RFF."""
    _needs_classes(q)
    return CostBreakdown(
        encode_ops=q.J * q.D,
        similarity_ops=q.L * q.D,
        activation_ops=q.D if q.kind is EncoderKind.RFF else 0,
    )


def training_cost(q: CostQuery) -> CostBreakdown:
    return CostBreakdown(
        encode_ops=q.N * q.J * q.D,
        update_ops=q.N * q.D,
        activation_ops=q.N * q.D if q.kind is EncoderKind.RFF else 0,
    )


def retraining_cost(q: CostQuery, cached: bool = False) -> CostBreakdown:
    """Retraining cost for ``P`` corrections.

    Default: each correction re-encodes (``J*D``), compares (``L*D``) and
    updates (``D``), giving ``P*D*(J+L+1)``. With ``cached=True`` the count
    follows the implementation in :mod:`hdctune.model`: every one of the
    ``N*epochs`` scanned samples is compared (``L*D``), and each correction
    updates two prototypes (``2*D``) and re-scores the sample (``L*D``).
    """
    _needs_classes(q)
    if cached:
        return CostBreakdown(
            similarity_ops=q.N * q.epochs * q.L * q.D + q.P * q.L * q.D,
            update_ops=2 * q.P * q.D,
        )
    return CostBreakdown(
        encode_ops=q.P * q.J * q.D,
        similarity_ops=q.P * q.L * q.D,
        update_ops=q.P * q.D,
    )


def analytic_cost(q: CostQuery, mode: CostMode | str) -> CostBreakdown:
    mode = CostMode(mode)
    if mode is CostMode.INFERENCE:
        one = inference_cost(q)
        n = max(q.N, 0)
        return CostBreakdown(one.encode_ops * n, one.similarity_ops * n, 0, one.activation_ops * n)
    if mode is CostMode.TRAINING:
        return training_cost(q)
    return retraining_cost(q, cached=mode is CostMode.RETRAINING_CACHED)


@dataclass
class ValidationReport:
    mode: CostMode
    passed: bool
    rows: list = field(default_factory=list)  # (quantity, expected, measured)

    def mismatches(self) -> list:
        return [row for row in self.rows if row[1] != row[2]]

    def __str__(self) -> str:
        lines = [f"{self.mode.value}: {'PASS' if self.passed else 'FAIL'}"]
        for name, expected, measured in self.rows:
            flag = "" if expected == measured else "  <-- mismatch"
            lines.append(f"  {name:<10} expected={expected} measured={measured}{flag}")
        return "\n".join(lines)


def validate_against_measurement(q: CostQuery, measured: OpCounter, mode: CostMode | str) -> ValidationReport:
    """Compare analytic counts with a measured counter, exactly.

    For inference ``q.N`` is the number of queries. Norm bookkeeping
    (``measured.norm_ops``) is not part of the cost model.
    """
    mode = CostMode(mode)
    cost = analytic_cost(q, mode)
    rows = [
        ("mul_add", cost.mul_add, measured.mul_add),
        ("add_sub", cost.update_ops, measured.add_sub),
        ("activation", cost.activation_ops, measured.activation),
        ("total", cost.total, measured.arithmetic),
    ]
    return ValidationReport(mode, all(e == m for _, e, m in rows), rows)
