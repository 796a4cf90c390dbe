"""Affine low-dimensional prompt subspaces: p = W q + p0.

A Subspace owns a projection W (D x d), an offset p0 (D,) and a small
metadata dict describing where it came from.  Subspaces serialize to a
compact binary format that round-trips bit-exactly.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, ShapeError, SubspaceFormatError
from .numerics import RngStream, as_matrix, as_vector, matvec, principal_angles

_MAGIC = b"BSL1"
_VERSION = 1


@dataclass
class Subspace:
    projection: np.ndarray  # (D, d)
    offset: np.ndarray      # (D,)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.projection = np.ascontiguousarray(
            as_matrix(self.projection, "projection")
        )
        self.offset = as_vector(self.offset, "offset")
        d_rows, d_cols = self.projection.shape
        if d_cols < 1 or d_cols > d_rows:
            raise ShapeError(
                f"need 1 <= d <= D, got projection shape {self.projection.shape}"
            )
        if self.offset.shape[0] != d_rows:
            raise ShapeError(
                f"offset length {self.offset.shape[0]} != projection rows {d_rows}"
            )
        if not isinstance(self.metadata, dict):
            raise ShapeError("metadata must be a dict")

    @property
    def full_dim(self) -> int:
        return self.projection.shape[0]

    @property
    def low_dim(self) -> int:
        return self.projection.shape[1]


def _check_full_rank(w: np.ndarray):
    if np.linalg.matrix_rank(w) < w.shape[1]:
        raise DegeneracyError("projection does not have full column rank")


def reparameterize(s: Subspace, q: np.ndarray) -> np.ndarray:
    """Map low-dimensional coordinates to a full prompt: W q + p0."""
    q = as_vector(q, "q")
    if q.shape[0] != s.low_dim:
        raise ShapeError(f"q has length {q.shape[0]}, subspace needs {s.low_dim}")
    return matvec(s.projection, q) + s.offset


def random_subspace_uniform(full_dim: int, low_dim: int, half_width: float,
                            rng: RngStream, offset: np.ndarray | None = None,
                            metadata: dict | None = None) -> Subspace:
    """Baseline: W entries i.i.d. Uniform(-half_width, half_width).

    ``offset`` is typically a prompt pretrained on pooled source data;
    defaults to zeros.
    """
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    w = rng.uniform(-half_width, half_width, (full_dim, low_dim))
    _check_full_rank(w)
    p0 = np.zeros(full_dim) if offset is None else as_vector(offset, "offset")
    meta = {"init": "uniform"} if metadata is None else dict(metadata)
    return Subspace(w, p0, meta)


def random_subspace_normal(full_dim: int, low_dim: int, std: float,
                           rng: RngStream, offset: np.ndarray | None = None,
                           metadata: dict | None = None) -> Subspace:
    """Baseline: W entries i.i.d. Normal(0, std^2)."""
    if std <= 0:
        raise ValueError("std must be positive")
    w = std * rng.normal((full_dim, low_dim))
    _check_full_rank(w)
    p0 = np.zeros(full_dim) if offset is None else as_vector(offset, "offset")
    meta = {"init": "normal"} if metadata is None else dict(metadata)
    return Subspace(w, p0, meta)


def save_subspace(s: Subspace, path) -> None:
    """Write the binary layout: magic, version, D, d (little-endian u32),
    W row-major float64, p0 float64, then a length-prefixed JSON metadata
    trailer.  The write is atomic (temp file + rename)."""
    d_rows, d_cols = s.projection.shape
    meta_bytes = json.dumps(s.metadata, sort_keys=True).encode("utf-8")
    payload = b"".join([
        _MAGIC,
        struct.pack("<III", _VERSION, d_rows, d_cols),
        np.ascontiguousarray(s.projection, dtype="<f8").tobytes(),
        np.ascontiguousarray(s.offset, dtype="<f8").tobytes(),
        struct.pack("<I", len(meta_bytes)),
        meta_bytes,
    ])
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_subspace(path) -> Subspace:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise SubspaceFormatError("file too short for header")
    if blob[:4] != _MAGIC:
        raise SubspaceFormatError(f"bad magic {blob[:4]!r}")
    version, d_rows, d_cols = struct.unpack("<III", blob[4:16])
    if version != _VERSION:
        raise SubspaceFormatError(f"unsupported format version {version}")
    if d_rows < 1 or d_cols < 1 or d_cols > d_rows:
        raise SubspaceFormatError(f"invalid dimensions D={d_rows}, d={d_cols}")
    w_bytes = 8 * d_rows * d_cols
    p_bytes = 8 * d_rows
    need = 16 + w_bytes + p_bytes + 4
    if len(blob) < need:
        raise SubspaceFormatError("file truncated before metadata trailer")
    w = np.frombuffer(blob, dtype="<f8", count=d_rows * d_cols, offset=16)
    w = w.reshape(d_rows, d_cols).copy()
    p0 = np.frombuffer(blob, dtype="<f8", count=d_rows, offset=16 + w_bytes).copy()
    (meta_len,) = struct.unpack_from("<I", blob, 16 + w_bytes + p_bytes)
    meta_start = need
    if len(blob) != meta_start + meta_len:
        raise SubspaceFormatError(
            f"metadata length {meta_len} inconsistent with file size"
        )
    try:
        metadata = json.loads(blob[meta_start:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SubspaceFormatError(f"metadata trailer is not valid JSON: {exc}") from exc
    if not isinstance(metadata, dict):
        raise SubspaceFormatError("metadata trailer must encode a JSON object")
    try:
        return Subspace(w, p0, metadata)
    except (ShapeError, ValueError) as exc:
        raise SubspaceFormatError(f"decoded arrays invalid: {exc}") from exc


def subspace_alignment(s: Subspace, reference_basis: np.ndarray) -> dict:
    """Principal-angle summary between col(W) and a reference basis."""
    angles = principal_angles(s.projection, as_matrix(reference_basis, "reference"))
    return {
        "angles": angles,
        "max_angle": float(angles.max()),
        "mean_angle": float(angles.mean()),
    }
