"""Shared value types, errors and the seeded random streams.

Every random quantity in the package (basis matrices, offsets, synthetic
data, train/test splits, tuner candidates) comes from :func:`make_rng`.
The mapping ``(seed, stream_label) -> stream`` is part of the model file
contract: model files store the seed, and the basis is regenerated from it.

Stream layout
-------------
``make_rng`` returns a :class:`numpy.random.Generator` over a Philox-4x64
counter-based bit generator whose 128-bit key is ``(seed, stream_label)``
and whose counter starts at zero. Uniform doubles are the top 53 bits of
each 64-bit output. Gaussian draws use the Box-Muller pair transform on
consecutive uniforms ``(u1, u2)``::

    r = sqrt(-2 log(1 - u1)),  z0 = r cos(2 pi u2),  z1 = r sin(2 pi u2)

Array draws emit ``z0, z1`` for each pair in order; scalar draws consume one
pair and return ``z0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SEED_MAX = 2**64 - 1

# stream labels (frozen: changing any of these changes every stored model)
STREAM_BASIS = 0
STREAM_OFFSETS = 1
STREAM_SPLIT = 2
STREAM_SIGNAL = 10
STREAM_IMAGE = 11
STREAM_TUNER = 1000

_GAUSS_BLOCK = 1 << 20  # must stay even


class HDCError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(HDCError, ValueError):
    """An argument is outside its allowed domain."""


class ShapeError(HDCError, ValueError):
    """Array dimensions do not agree."""


class LabelError(HDCError, ValueError):
    """A class label is outside ``[0, L)``."""


class ClassIndexError(HDCError, IndexError):
    """A class index passed to a lookup is out of range."""


class ConfigurationError(HDCError, ValueError):
    """A search space or run configuration is unusable."""


@dataclass(frozen=True)
class ShapeMeta:
    """Problem dimensions: ``J`` input features, ``D`` hypervector size, ``L`` classes."""

    J: int
    D: int
    L: int

    def __post_init__(self):
        for name, value, low in (("J", self.J, 1), ("D", self.D, 1), ("L", self.L, 2)):
            if int(value) != value or value < low:
                raise ParameterError(f"{name} must be an integer >= {low}, got {value!r}")


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ParameterError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return seed


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def feature_vector(values, J: int | None = None) -> np.ndarray:
    """Validate one input sample and return it as a read-only float32 array."""
    x = np.array(values, dtype=np.float32)
    if x.ndim != 1:
        raise ShapeError(f"feature vector must be 1-D, got shape {x.shape}")
    if J is not None and x.shape[0] != J:
        raise ShapeError(f"feature vector has length {x.shape[0]}, expected J={J}")
    if not np.all(np.isfinite(x)):
        raise ParameterError("feature vector contains NaN or Inf")
    return _frozen(x)


def hypervector(values, D: int | None = None) -> np.ndarray:
    """Validate one hypervector and return it as a read-only float32 array."""
    h = np.array(values, dtype=np.float32)
    if h.ndim != 1:
        raise ShapeError(f"hypervector must be 1-D, got shape {h.shape}")
    if D is not None and h.shape[0] != D:
        raise ShapeError(f"hypervector has length {h.shape[0]}, expected D={D}")
    if not np.all(np.isfinite(h)):
        raise ParameterError("hypervector contains NaN or Inf")
    return _frozen(h)


def make_rng(seed: int, stream_label: int = 0) -> np.random.Generator:
    """Return the generator for stream ``stream_label`` of ``seed``."""
    seed = check_seed(seed)
    label = int(stream_label)
    if not 0 <= label <= SEED_MAX:
        raise ParameterError(f"stream_label must be a non-negative 64-bit integer, got {label}")
    key = np.array([seed, label], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=0, key=key))


def _box_muller(u: np.ndarray) -> np.ndarray:
    u = u.reshape(-1, 2)
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    theta = 2.0 * np.pi * u[:, 1]
    out = np.empty((u.shape[0], 2))
    np.multiply(r, np.cos(theta), out=out[:, 0])
    np.multiply(r, np.sin(theta), out=out[:, 1])
    return out.reshape(-1)


def gaussian_draw(rng: np.random.Generator, sigma: float, size=None, dtype=np.float64):
    """Draw from N(0, sigma^2) through the frozen Box-Muller transform.

    With ``size=None`` a single float is returned. Otherwise an array of
    the requested shape is filled in C order; the values are computed in
    float64 and scaled before the final cast to ``dtype``.
    """
    sigma = float(sigma)
    if not sigma > 0 or not np.isfinite(sigma):
        raise ParameterError(f"sigma must be a positive finite number, got {sigma}")
    if size is None:
        return float(sigma * _box_muller(rng.random(2))[0])
    shape = (size,) if np.isscalar(size) else tuple(size)
    n = int(np.prod(shape, dtype=np.int64))
    out = np.empty(n, dtype=dtype)
    for start in range(0, n, _GAUSS_BLOCK):
        m = min(_GAUSS_BLOCK, n - start)
        z = _box_muller(rng.random(m + (m & 1)))[:m]
        out[start:start + m] = sigma * z
    return out.reshape(shape)


def uniform_draw(rng: np.random.Generator, lo: float, hi: float, size=None):
    """Draw from U[lo, hi); the upper bound is never returned."""
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise ParameterError(f"uniform_draw needs lo < hi, got [{lo}, {hi})")
    u = rng.random(size)
    x = np.minimum(lo + (hi - lo) * u, np.nextafter(hi, lo))
    return float(x) if size is None else x
