"""Random Projection and Random Fourier Feature encoders.

A basis is a ``D x J`` Gaussian matrix ``B`` (rows are basis vectors) and a
length-``D`` offset vector ``U ~ U(0, 2 pi)``. Encoding maps a sample ``x`` to

* RP:  ``h_i = x . B_i``
* RFF: ``h_i = cos(x . B_i + u_i)``

Both kinds draw ``B`` and ``U`` from the same streams, so switching the kind
never changes ``B``. Hypervectors are float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import (
    STREAM_BASIS,
    STREAM_OFFSETS,
    ParameterError,
    ShapeError,
    ShapeMeta,
    check_seed,
    gaussian_draw,
    make_rng,
    uniform_draw,
)
from .instrumentation import Stage, record, scope

# Rows are encoded in zero-padded blocks of this many rows so that every
# sample goes through the same GEMM shape. This keeps a sample's encoding
# bitwise independent of how it was batched.
ENCODE_BLOCK = 128


class EncoderKind(str, Enum):
    RP = "rp"
    RFF = "rff"

    @property
    def code(self) -> int:
        return 0 if self is EncoderKind.RP else 1

    @classmethod
    def from_code(cls, code: int) -> "EncoderKind":
        try:
            return (cls.RP, cls.RFF)[code]
        except IndexError:
            raise ParameterError(f"unknown encoder kind code {code}") from None


@dataclass(frozen=True)
class EncoderConfig:
    kind: EncoderKind
    D: int
    sigma_b: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", EncoderKind(self.kind))
        if int(self.D) != self.D or self.D < 1:
            raise ParameterError(f"D must be a positive integer, got {self.D!r}")
        object.__setattr__(self, "D", int(self.D))
        if not (self.sigma_b > 0 and np.isfinite(self.sigma_b)):
            raise ParameterError(f"sigma_b must be positive, got {self.sigma_b!r}")
        object.__setattr__(self, "sigma_b", float(self.sigma_b))
        object.__setattr__(self, "seed", check_seed(self.seed))


@dataclass(frozen=True, eq=False)
class Basis:
    B: np.ndarray  # (D, J) float32
    U: np.ndarray  # (D,) float64, the offsets as drawn
    config: EncoderConfig
    J: int
    _U32: np.ndarray = field(repr=False, default=None)

    @property
    def D(self) -> int:
        return self.config.D

    @property
    def kind(self) -> EncoderKind:
        return self.config.kind

    def shape(self, L: int) -> ShapeMeta:
        return ShapeMeta(J=self.J, D=self.D, L=L)


def build_basis(config: EncoderConfig, J: int) -> Basis:
    if int(J) != J or J < 1:
        raise ParameterError(f"J must be a positive integer, got {J!r}")
    J = int(J)
    B = gaussian_draw(make_rng(config.seed, STREAM_BASIS), config.sigma_b, size=(config.D, J), dtype=np.float32)
    U = uniform_draw(make_rng(config.seed, STREAM_OFFSETS), 0.0, 2.0 * np.pi, size=config.D)
    U32 = U.astype(np.float32)
    for arr in (B, U, U32):
        arr.setflags(write=False)
    return Basis(B=B, U=U, config=config, J=J, _U32=U32)


def _project(basis: Basis, X: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    BT = basis.B.T
    out = np.empty((n, basis.D), dtype=np.float32)
    buf = None
    for start in range(0, n, ENCODE_BLOCK):
        stop = min(start + ENCODE_BLOCK, n)
        if stop - start == ENCODE_BLOCK:
            np.matmul(X[start:stop], BT, out=out[start:stop])
        else:
            if buf is None:
                buf = np.zeros((ENCODE_BLOCK, basis.J), dtype=np.float32)
            buf[: stop - start] = X[start:stop]
            buf[stop - start:] = 0.0
            out[start:stop] = np.matmul(buf, BT)[: stop - start]
    if basis.kind is EncoderKind.RFF:
        out += basis._U32
        np.cos(out, out=out)
    return out


def _as_batch(xs, J: int) -> np.ndarray:
    if isinstance(xs, np.ndarray):
        X = xs
        if X.size == 0:
            X = X.reshape(0, J)
        elif X.ndim != 2:
            raise ShapeError(f"expected a 2-D batch, got shape {X.shape}")
        elif X.shape[1] != J:
            raise ShapeError(f"row 0 has length {X.shape[1]}, expected J={J}")
    else:
        rows = list(xs)
        for i, row in enumerate(rows):
            if np.shape(row) != (J,):
                raise ShapeError(f"row {i} has shape {np.shape(row)}, expected ({J},)")
        X = np.array(rows, dtype=np.float32).reshape(len(rows), J)
    X = np.ascontiguousarray(X, dtype=np.float32)
    if not np.all(np.isfinite(X)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(X), axis=1))[0])
        raise ParameterError(f"row {bad} contains NaN or Inf")
    return X


def encode_batch(basis: Basis, xs) -> np.ndarray:
    """Encode ``N`` samples into an ``(N, D)`` float32 array."""
    X = _as_batch(xs, basis.J)
    n = X.shape[0]
    with scope(Stage.ENCODE):
        H = _project(basis, X)
        record(mul_add=n * basis.J * basis.D)
        if basis.kind is EncoderKind.RFF:
            record(activation=n * basis.D)
    return H


def encode(basis: Basis, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.shape != (basis.J,):
        raise ShapeError(f"feature vector has shape {x.shape}, expected ({basis.J},)")
    return encode_batch(basis, x[None, :])[0]
