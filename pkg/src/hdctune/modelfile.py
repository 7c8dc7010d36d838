"""HDCM model files.

Layout (little-endian)::

    magic   4s   b"HDCM"
    version u32  1
    kind    u32  0 = RP, 1 = RFF
    D, J, L u32
    sigma_b f64
    seed    u64
    prototypes  L*D f64, row-major
    norms       L f64

The basis is not stored. Loading rebuilds it from ``(kind, D, J, sigma_b,
seed)``, which the seeded streams reproduce bit for bit.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import HDCError, ShapeMeta
from .encoder import Basis, EncoderConfig, EncoderKind, build_basis
from .model import ClassMemory

MODEL_MAGIC = b"HDCM"
MODEL_VERSION = 1
NORM_RTOL = 1e-9
_HEADER = struct.Struct("<4sIIIIIdQ")


class ModelFormatError(HDCError):
    """Base class for HDCM parse failures; ``code`` identifies the kind."""

    code = 1


class BadModelMagicError(ModelFormatError):
    code = 2


class UnsupportedModelVersionError(ModelFormatError):
    code = 3


class TruncatedModelError(ModelFormatError):
    code = 4

    def __init__(self, section: str, need: int, have: int):
        super().__init__(f"truncated model file: section '{section}' needs {need} bytes, {have} available")
        self.section = section


class NormMismatchError(ModelFormatError):
    code = 5


def model_to_bytes(memory: ClassMemory) -> bytes:
    if memory.config is None:
        raise ModelFormatError("memory has no encoder config; it cannot be regenerated on load")
    cfg, shape = memory.config, memory.shape
    header = _HEADER.pack(
        MODEL_MAGIC, MODEL_VERSION, cfg.kind.code, shape.D, shape.J, shape.L, cfg.sigma_b, cfg.seed
    )
    body = np.ascontiguousarray(memory.prototypes, dtype="<f8").tobytes()
    return header + body + np.ascontiguousarray(memory.norms, dtype="<f8").tobytes()


def _take(buf: bytes, offset: int, count: int, section: str) -> np.ndarray:
    need = 8 * count
    have = len(buf) - offset
    if have < need:
        raise TruncatedModelError(section, need, max(have, 0))
    return np.frombuffer(buf, dtype="<f8", count=count, offset=offset).astype(np.float64)


def model_from_bytes(buf: bytes) -> tuple[ClassMemory, Basis]:
    if len(buf) < 4 or buf[:4] != MODEL_MAGIC:
        raise BadModelMagicError(f"not an HDCM file (magic {bytes(buf[:4])!r})")
    if len(buf) < 8:
        raise TruncatedModelError("header", _HEADER.size, len(buf))
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != MODEL_VERSION:
        raise UnsupportedModelVersionError(f"unsupported HDCM version {version}")
    if len(buf) < _HEADER.size:
        raise TruncatedModelError("header", _HEADER.size, len(buf))
    _, _, kind_code, D, J, L, sigma_b, seed = _HEADER.unpack_from(buf)
    try:
        config = EncoderConfig(EncoderKind.from_code(kind_code), D, sigma_b, seed)
        shape = ShapeMeta(J=J, D=D, L=L)
    except ValueError as exc:
        raise ModelFormatError(f"invalid header: {exc}") from None

    offset = _HEADER.size
    C = _take(buf, offset, L * D, "prototypes").reshape(L, D)
    offset += 8 * L * D
    norms = _take(buf, offset, L, "norms")
    offset += 8 * L
    if offset != len(buf):
        raise ModelFormatError(f"{len(buf) - offset} trailing bytes after norms")
    if not np.all(np.isfinite(C)):
        raise ModelFormatError("prototypes contain NaN or Inf")

    fresh = np.sqrt(np.einsum("ij,ij->i", C, C))
    if not np.allclose(norms, fresh, rtol=NORM_RTOL, atol=0.0):
        bad = int(np.argmax(np.abs(norms - fresh)))
        raise NormMismatchError(f"stored norm of class {bad} is {norms[bad]!r}, prototype gives {fresh[bad]!r}")

    for arr in (C, norms):
        arr.setflags(write=False)
    memory = ClassMemory(C, norms, shape, config)
    return memory, build_basis(config, J)


def save_model(memory: ClassMemory, path) -> None:
    path = Path(path)
    data = model_to_bytes(memory)
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write model to {path}: {exc.strerror}") from exc


def load_model(path) -> tuple[ClassMemory, Basis]:
    return model_from_bytes(Path(path).read_bytes())
