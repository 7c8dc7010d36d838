"""Synthetic classification tasks, splitting, standardization and the HDCD file format.

Two generators cover the two regimes of interest:

* :func:`gen_signal_task` produces multichannel sinusoid windows (90 channels
  x 10 steps) whose class is carried only by relative channel phases and by
  quadratic channel products. Class-conditional means are identical, so a
  linear readout of the raw features is close to chance.
* :func:`gen_image_task` produces small frames with one of eight bright
  blobs (four horizontal segments x two vertical positions), jittered and
  noisy. These are close to linearly separable in pixel space.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    STREAM_IMAGE,
    STREAM_SIGNAL,
    STREAM_SPLIT,
    HDCError,
    LabelError,
    ParameterError,
    ShapeError,
    check_seed,
    gaussian_draw,
    make_rng,
    uniform_draw,
)

SIGNAL_CHANNELS = 90
SIGNAL_WINDOW = 10
SIGNAL_CLASSES = 3
SIGNAL_NOISE = 0.3
SIGNAL_AMPLITUDE = 100.0

IMAGE_CLASSES = 8
IMAGE_NOISE = 0.5
IMAGE_AMPLITUDE = 1.5
IMAGE_SHIFT = 1
IMAGE_BLOB = (0.08, 0.16)  # std of the blob in x and y, in frame units

STD_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray  # (N, J) float32
    labels: np.ndarray  # (N,) int64
    n_classes: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float32)
        if X.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {X.shape}")
        y = np.asarray(self.labels)
        if y.shape != (X.shape[0],):
            raise ShapeError(f"{X.shape[0]} rows but {y.size} labels")
        if int(self.n_classes) < 1:
            raise ParameterError("n_classes must be positive")
        if y.size and (not np.issubdtype(y.dtype, np.integer) or y.min() < 0 or y.max() >= self.n_classes):
            raise LabelError(f"labels must lie in [0, {self.n_classes})")
        if not np.all(np.isfinite(X)):
            raise ParameterError("features contain NaN or Inf")
        y = y.astype(np.int64)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "n_classes", int(self.n_classes))

    @property
    def N(self) -> int:
        return self.features.shape[0]

    @property
    def J(self) -> int:
        return self.features.shape[1]

    @property
    def L(self) -> int:
        return self.n_classes

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.features[rows], self.labels[rows], self.n_classes, dict(self.provenance))


@dataclass(frozen=True)
class Split:
    train: Dataset
    test: Dataset
    fraction: float  # share of rows placed in the test side
    train_rows: np.ndarray = field(repr=False, default=None)
    test_rows: np.ndarray = field(repr=False, default=None)


def _balanced_labels(n: int, L: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64) % L


# phase offset of channel groups (reference, g1, g2) for each class; every
# class mixes the same set of offsets, so no single channel carries the label
_SIGNAL_OFFSETS = np.array(
    [
        [0.0, 2 * np.pi / 3, -2 * np.pi / 3],
        [0.0, -2 * np.pi / 3, 2 * np.pi / 3],
        [0.0, 2 * np.pi / 3, 2 * np.pi / 3],
    ]
)
_SIGNAL_LAYOUT_SEED = 0x5EED


def _signal_layout():
    """Fixed channel layout: frequencies and which channels are products."""
    rng = make_rng(_SIGNAL_LAYOUT_SEED, STREAM_SIGNAL)
    freq = uniform_draw(rng, 0.2, 0.9, size=SIGNAL_CHANNELS)
    group = np.arange(SIGNAL_CHANNELS) % 3
    # the last third of the channels are products of a reference-group
    # sinusoid with a g1 or g2 sinusoid at the same frequency
    product = np.arange(SIGNAL_CHANNELS) >= 2 * SIGNAL_CHANNELS // 3
    partner = np.where(np.arange(SIGNAL_CHANNELS) % 2 == 0, 1, 2)
    return freq, group, product, partner


def gen_signal_task(n: int, seed: int = 0, amplitude: float = SIGNAL_AMPLITUDE, noise: float = SIGNAL_NOISE) -> Dataset:
    """Signal-like task: ``J = 900`` (90 channels x 10 steps), 3 balanced classes."""
    if int(n) != n or n < 30:
        raise ParameterError(f"signal task needs n >= 30, got {n!r}")
    n = int(n)
    seed = check_seed(seed)
    rng = make_rng(seed, STREAM_SIGNAL)
    y = _balanced_labels(n, SIGNAL_CLASSES)
    freq, group, product, partner = _signal_layout()
    t = np.arange(SIGNAL_WINDOW)

    phi = uniform_draw(rng, 0.0, 2 * np.pi, size=n)
    base = freq[None, :, None] * t[None, None, :] + phi[:, None, None]  # (n, C, T)
    offs = _SIGNAL_OFFSETS[y]  # (n, 3)
    X = amplitude * np.sin(base + offs[:, group][:, :, None])
    # product channels: amp * sin(a) * sin(a + o); their mean is amp*cos(o)/2,
    # identical for all classes since |o| = 2 pi / 3 whenever o != 0
    prod = amplitude * np.sin(base) * np.sin(base + offs[:, partner][:, :, None])
    X[:, product] = prod[:, product]
    X += gaussian_draw(rng, noise, size=X.shape)

    prov = {"generator": "signal", "n": n, "seed": seed, "amplitude": amplitude, "noise": noise}
    return Dataset(X.reshape(n, SIGNAL_CHANNELS * SIGNAL_WINDOW), y, SIGNAL_CLASSES, prov)


def _image_templates(side: int, amplitude: float) -> np.ndarray:
    yy, xx = np.mgrid[0:side, 0:side] / max(side - 1, 1)
    sx, sy = IMAGE_BLOB
    out = np.empty((IMAGE_CLASSES, side, side))
    for c in range(IMAGE_CLASSES):
        cx = (c % 4 + 0.5) / 4  # stripe segment
        cy = 0.75 if c // 4 else 0.35  # overhang vs bulk region
        out[c] = amplitude * np.exp(-((xx - cx) ** 2 / (2 * sx**2) + (yy - cy) ** 2 / (2 * sy**2)))
    return out


def gen_image_task(
    n: int,
    side: int = 16,
    seed: int = 0,
    amplitude: float = IMAGE_AMPLITUDE,
    noise: float = IMAGE_NOISE,
    shift: int = IMAGE_SHIFT,
) -> Dataset:
    """Image-like task: ``J = side**2`` pixels, 8 balanced classes."""
    if int(n) != n or n < 4 * IMAGE_CLASSES:
        raise ParameterError(f"image task needs n >= {4 * IMAGE_CLASSES}, got {n!r}")
    if int(side) != side or side < 4:
        raise ParameterError(f"side must be an integer >= 4, got {side!r}")
    n, side = int(n), int(side)
    seed = check_seed(seed)
    rng = make_rng(seed, STREAM_IMAGE)
    y = _balanced_labels(n, IMAGE_CLASSES)
    templates = _image_templates(side, amplitude)

    shifts = rng.integers(-shift, shift + 1, size=(n, 2))
    X = np.empty((n, side, side))
    for i in range(n):
        X[i] = np.roll(templates[y[i]], tuple(shifts[i]), axis=(0, 1))
    X += gaussian_draw(rng, noise, size=X.shape)

    prov = {"generator": "image", "n": n, "side": side, "seed": seed,
            "amplitude": amplitude, "noise": noise, "shift": shift}
    return Dataset(X.reshape(n, side * side), y, IMAGE_CLASSES, prov)


def standardize(train: Dataset, apply_to: Optional[Dataset] = None) -> Dataset:
    """Scale ``apply_to`` (default ``train``) per feature with statistics of ``train``."""
    target = train if apply_to is None else apply_to
    if target.J != train.J:
        raise ShapeError(f"feature counts differ: train J={train.J}, target J={target.J}")
    Xtr = train.features.astype(np.float64)
    mean = Xtr.mean(axis=0)
    std = np.maximum(Xtr.std(axis=0), STD_FLOOR)
    X = (target.features - mean) / std
    prov = dict(target.provenance, standardized=True)
    return Dataset(X, target.labels, target.n_classes, prov)


def split(ds: Dataset, fraction: float = 0.3, seed: int = 0) -> Split:
    """Stratified random split; ``fraction`` of every class goes to the test side."""
    if not 0.0 < fraction < 1.0:
        raise ParameterError(f"fraction must lie in (0, 1), got {fraction}")
    rng = make_rng(seed, STREAM_SPLIT)
    test_rows = []
    for l in range(ds.n_classes):
        rows = np.flatnonzero(ds.labels == l)
        rows = rows[rng.permutation(len(rows))]
        test_rows.append(rows[: int(round(fraction * len(rows)))])
    test_rows = np.sort(np.concatenate(test_rows)).astype(np.int64)
    mask = np.ones(ds.N, dtype=bool)
    mask[test_rows] = False
    train_rows = np.flatnonzero(mask)
    return Split(ds.subset(train_rows), ds.subset(test_rows), float(fraction), train_rows, test_rows)


# --- HDCD binary format -------------------------------------------------------

DATASET_MAGIC = b"HDCD"
DATASET_VERSION = 1
_HEADER = struct.Struct("<4sIIII")


class DatasetFormatError(HDCError):
    """Base class for HDCD parse failures; ``code`` identifies the kind."""

    code = 1


class BadMagicError(DatasetFormatError):
    code = 2


class UnsupportedVersionError(DatasetFormatError):
    code = 3


class TruncatedFileError(DatasetFormatError):
    code = 4


def dataset_to_bytes(ds: Dataset) -> bytes:
    header = _HEADER.pack(DATASET_MAGIC, DATASET_VERSION, ds.N, ds.J, ds.n_classes)
    return header + ds.labels.astype("<u4").tobytes() + ds.features.astype("<f4").tobytes()


def dataset_from_bytes(buf: bytes) -> Dataset:
    if len(buf) < 4 or buf[:4] != DATASET_MAGIC:
        raise BadMagicError(f"not an HDCD file (magic {bytes(buf[:4])!r})")
    if len(buf) < _HEADER.size:
        raise TruncatedFileError("truncated header")
    _, version, n, J, L = _HEADER.unpack_from(buf)
    if version != DATASET_VERSION:
        raise UnsupportedVersionError(f"unsupported HDCD version {version}")
    offset = _HEADER.size
    need = 4 * n
    if len(buf) < offset + need:
        raise TruncatedFileError(f"truncated labels: need {need} bytes, have {len(buf) - offset}")
    labels = np.frombuffer(buf, dtype="<u4", count=n, offset=offset).astype(np.int64)
    offset += need
    need = 4 * n * J
    if len(buf) < offset + need:
        raise TruncatedFileError(f"truncated features: need {need} bytes, have {len(buf) - offset}")
    X = np.frombuffer(buf, dtype="<f4", count=n * J, offset=offset).reshape(n, J)
    if len(buf) != offset + need:
        raise DatasetFormatError(f"{len(buf) - offset - need} trailing bytes after features")
    return Dataset(X.astype(np.float32), labels, L, {"source": "hdcd"})


def write_dataset(ds: Dataset, path) -> None:
    Path(path).write_bytes(dataset_to_bytes(ds))


def read_dataset(path) -> Dataset:
    ds = dataset_from_bytes(Path(path).read_bytes())
    return Dataset(ds.features, ds.labels, ds.n_classes, {"source": str(path)})
