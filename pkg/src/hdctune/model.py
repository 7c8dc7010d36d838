"""Class prototypes, cosine-similarity inference and mistake-driven retraining."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import ClassIndexError, LabelError, ParameterError, ShapeError, ShapeMeta
from .encoder import Basis, EncoderConfig, build_basis, encode_batch
from .instrumentation import OpCounter, Stage, record, scope, stage_totals

DEFAULT_EPOCHS = 20
_INFER_BLOCK = 256


@dataclass(frozen=True, eq=False)
class ClassMemory:
    """Trained model: one float64 prototype per class plus cached norms."""

    prototypes: np.ndarray  # (L, D) float64
    norms: np.ndarray  # (L,) float64
    shape: ShapeMeta
    config: Optional[EncoderConfig] = None
    counts: Optional[np.ndarray] = None  # training samples per class

    @property
    def L(self) -> int:
        return self.shape.L

    @property
    def D(self) -> int:
        return self.shape.D


@dataclass
class RetrainStats:
    epochs_run: int
    corrections_per_epoch: np.ndarray
    train_accuracy_per_epoch: np.ndarray
    # corrections after which the sample was still misclassified
    unresolved_per_epoch: np.ndarray
    ops: dict = field(default_factory=dict)

    @property
    def P(self) -> int:
        return int(self.corrections_per_epoch.sum())


@dataclass(frozen=True)
class Prediction:
    label: int
    similarities: np.ndarray


def _row_norms(C: np.ndarray) -> np.ndarray:
    record(norm_ops=C.shape[0] * (C.shape[1] + 1))
    return np.sqrt(np.einsum("ij,ij->i", C, C))


def _cosines(dots: np.ndarray, proto_norms: np.ndarray, h_norms) -> np.ndarray:
    denom = np.multiply.outer(h_norms, proto_norms) if np.ndim(h_norms) else proto_norms * h_norms
    ok = denom > 0
    sims = np.where(ok, dots / np.where(ok, denom, 1.0), 0.0)
    return np.clip(sims, -1.0, 1.0)


def _freeze(memory: ClassMemory) -> ClassMemory:
    for arr in (memory.prototypes, memory.norms, memory.counts):
        if arr is not None:
            arr.setflags(write=False)
    return memory


def _check_hypervectors(H, D: Optional[int] = None, dtype=np.float32) -> np.ndarray:
    H = np.asarray(H, dtype=dtype)
    if H.ndim != 2:
        raise ShapeError(f"expected an (N, D) array of hypervectors, got shape {H.shape}")
    if D is not None and H.shape[1] != D:
        raise ShapeError(f"hypervectors have D={H.shape[1]}, memory has D={D}")
    return H


def _check_labels(labels, n: int, L: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != (n,):
        raise ShapeError(f"expected {n} labels, got shape {y.shape}")
    if n and (not np.issubdtype(y.dtype, np.integer) or y.min() < 0 or y.max() >= L):
        raise LabelError(f"labels must be integers in [0, {L})")
    return y.astype(np.int64)


def train(H, labels, n_classes: int, basis: Optional[Basis] = None) -> ClassMemory:
    """Bundle encoded samples into per-class prototypes (sum of members).

    ``basis`` only supplies the metadata (config and ``J``) stored with the
    memory; without it ``J`` is recorded as 1.
    """
    H = _check_hypervectors(H, None if basis is None else basis.D)
    n, D = H.shape
    if n == 0:
        raise ParameterError("train needs at least one sample")
    y = _check_labels(labels, n, n_classes)
    C = np.zeros((n_classes, D))
    for l in range(n_classes):
        members = H[y == l]
        if len(members):
            C[l] = members.sum(axis=0, dtype=np.float64)
    record(add_sub=n * D)
    norms = _row_norms(C)
    counts = np.bincount(y, minlength=n_classes)
    shape = ShapeMeta(J=1 if basis is None else basis.J, D=D, L=n_classes)
    config = None if basis is None else basis.config
    return _freeze(ClassMemory(C, norms, shape, config, counts))


def similarity(memory: ClassMemory, h, l: int) -> float:
    """Cosine similarity between prototype ``l`` and ``h`` (0 when either norm is 0)."""
    if not 0 <= int(l) < memory.L:
        raise ClassIndexError(f"class index {l} outside [0, {memory.L})")
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (memory.D,):
        raise ShapeError(f"hypervector has shape {h.shape}, expected ({memory.D},)")
    dot = float(memory.prototypes[l] @ h)
    record(mul_add=memory.D)
    h_norm = float(np.sqrt(h @ h))
    record(norm_ops=memory.D + 1)
    return float(_cosines(np.array(dot), memory.norms[l], h_norm))


def infer_batch(memory: ClassMemory, H) -> tuple[np.ndarray, np.ndarray]:
    """Classify ``N`` hypervectors; returns ``(labels, similarities (N, L))``."""
    # float64 queries stay float64 so that scaling a query leaves its cosines intact
    H = np.asarray(H)
    H = _check_hypervectors(H, memory.D, np.float64 if H.dtype == np.float64 else np.float32)
    n = H.shape[0]
    labels = np.empty(n, dtype=np.int64)
    sims = np.empty((n, memory.L))
    CT = memory.prototypes.T
    for start in range(0, n, _INFER_BLOCK):
        block = H[start:start + _INFER_BLOCK].astype(np.float64)
        dots = block @ CT
        h_norms = np.sqrt(np.einsum("ij,ij->i", block, block))
        s = _cosines(dots, memory.norms, h_norms)
        sims[start:start + len(block)] = s
        labels[start:start + len(block)] = np.argmax(s, axis=1)
    record(mul_add=n * memory.L * memory.D, norm_ops=n * (memory.D + 1))
    return labels, sims


def infer(memory: ClassMemory, h) -> Prediction:
    h = np.asarray(h)
    if h.shape != (memory.D,):
        raise ShapeError(f"hypervector has shape {h.shape}, expected ({memory.D},)")
    labels, sims = infer_batch(memory, h[None, :])
    return Prediction(int(labels[0]), sims[0])


def _predict_one(C: np.ndarray, norms: np.ndarray, h: np.ndarray, h_norm: float) -> int:
    dots = C @ h
    record(mul_add=C.shape[0] * C.shape[1])
    return int(np.argmax(_cosines(dots, norms, h_norm)))


def _retrain_epoch(memory: ClassMemory, H: np.ndarray, y: np.ndarray, h_norms: np.ndarray):
    C = memory.prototypes.copy()
    norms = memory.norms.copy()
    L, D = C.shape
    corrections = unresolved = 0
    for i in range(H.shape[0]):
        h = H[i].astype(np.float64)
        pred = _predict_one(C, norms, h, h_norms[i])
        true = y[i]
        if pred == true:
            continue
        C[pred] -= h
        C[true] += h
        record(add_sub=2 * D)
        norms[pred] = np.sqrt(C[pred] @ C[pred])
        norms[true] = np.sqrt(C[true] @ C[true])
        record(norm_ops=2 * (D + 1))
        corrections += 1
        if _predict_one(C, norms, h, h_norms[i]) != true:
            unresolved += 1
    if corrections:
        norms = _row_norms(C)
        updated = replace(memory, prototypes=C, norms=norms)
        return _freeze(updated), corrections, unresolved
    return memory, 0, 0


def retrain_epoch(memory: ClassMemory, H, labels) -> tuple[ClassMemory, int]:
    """One online pass in dataset order; returns the updated memory and the correction count.

    Each sample is classified against the memory as already updated by the
    earlier samples of the pass. A mistake moves the sample's hypervector
    from the predicted prototype to the true one; the two touched norms are
    refreshed at once and every norm is recomputed at the end of the pass.
    """
    H = _check_hypervectors(H, memory.D)
    y = _check_labels(labels, H.shape[0], memory.L)
    h_norms = np.sqrt(np.einsum("ij,ij->i", H, H, dtype=np.float64))
    record(norm_ops=H.shape[0] * (memory.D + 1))
    updated, corrections, _ = _retrain_epoch(memory, H, y, h_norms)
    return updated, corrections


def _dataset_arrays(dataset):
    X = np.asarray(dataset.features, dtype=np.float32)
    y = np.asarray(dataset.labels)
    return X, y, int(dataset.n_classes)


def fit(
    dataset,
    config: EncoderConfig,
    epochs: int = DEFAULT_EPOCHS,
    early_stop: bool = False,
    basis: Optional[Basis] = None,
) -> tuple[ClassMemory, RetrainStats, Basis]:
    """Build the basis, encode the training set once, bundle, then retrain.

    ``basis`` may be passed in when it was already built for ``config``
    (basis generation is then excluded from the counted work). With
    ``early_stop`` the loop ends after the first epoch without corrections.
    """
    if int(epochs) != epochs or epochs < 0:
        raise ParameterError(f"epochs must be a non-negative integer, got {epochs!r}")
    X, y, L = _dataset_arrays(dataset)
    if basis is None:
        basis = build_basis(config, X.shape[1])
    elif basis.config != config or basis.J != X.shape[1]:
        raise ParameterError("basis does not match config and dataset width")
    with stage_totals() as totals:
        with scope(Stage.TRAIN):
            H = encode_batch(basis, X)
            memory = train(H, y, L, basis)
        y = _check_labels(y, len(y), L)
        corrections, accuracy, unresolved = [], [], []
        with scope(Stage.RETRAIN):
            if epochs:
                h_norms = np.sqrt(np.einsum("ij,ij->i", H, H, dtype=np.float64))
                record(norm_ops=H.shape[0] * (basis.D + 1))
            for _ in range(int(epochs)):
                memory, c, u = _retrain_epoch(memory, H, y, h_norms)
                corrections.append(c)
                unresolved.append(u)
                accuracy.append(1.0 - c / len(y))
                if early_stop and c == 0:
                    break
    stats = RetrainStats(
        epochs_run=len(corrections),
        corrections_per_epoch=np.array(corrections, dtype=np.int64),
        train_accuracy_per_epoch=np.array(accuracy, dtype=np.float64),
        unresolved_per_epoch=np.array(unresolved, dtype=np.int64),
        ops={k: v.copy() for k, v in totals.items()},
    )
    for stage in (Stage.ENCODE, Stage.TRAIN, Stage.RETRAIN):
        stats.ops.setdefault(stage.value, OpCounter())
    return memory, stats, basis


def accuracy(memory: ClassMemory, H, labels) -> float:
    pred, _ = infer_batch(memory, H)
    y = np.asarray(labels)
    return float(np.mean(pred == y)) if len(y) else 0.0
