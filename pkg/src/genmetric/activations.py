"""Activation-set representation, ingestion, and Gaussian summarization.

An activation set is an N x D matrix of feature vectors produced by some
fixed extractor, tagged with the layer it came from and the source of the
images ("real", "generated", ...). Everything downstream (FID, LFID, MMD)
consumes these sets or their Gaussian summaries.

On-disk format (ACTB, bit-exact):

    magic            4 bytes  b"ACTB"
    format version   u32 LE   = 1
    n_samples N      u64 LE
    dim D            u64 LE
    layer_tag        u16 LE byte length + UTF-8 bytes
    source_tag       u16 LE byte length + UTF-8 bytes
    payload          N*D float32 LE, row-major

CSV fallback: first line is a header of D comma-separated names, each later
line one row; tags default to "unknown". Values are stored as 32-bit floats
on disk and promoted to 64-bit in memory for all statistics.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataError,
    FormatError,
    InsufficientSamples,
    IoError,
    SingularCovarianceWarning,
    ValidationError,
)

_MAGIC = b"ACTB"
_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")
_TAGLEN = struct.Struct("<H")


def _check_finite(data: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(data)):
        row, col = map(int, np.argwhere(~np.isfinite(data))[0])
        raise DataError(
            f"non-finite entry in {what} at row {row}, column {col}", row=row, col=col
        )


@dataclass(frozen=True)
class ActivationSet:
    """Immutable N x D matrix of feature activations with tags."""

    data: np.ndarray
    layer_tag: str = "unknown"
    source_tag: str = "unknown"

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"activation data must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(
                f"activation data needs N >= 1 and D >= 1, got shape {arr.shape}"
            )
        _check_finite(arr, "activation data")
        object.__setattr__(self, "data", arr)

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class GaussianSummary:
    """Mean vector and sample covariance of one activation set."""

    mean: np.ndarray
    cov: np.ndarray
    n_samples: int

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=np.float64).reshape(-1)
        cov = np.ascontiguousarray(self.cov, dtype=np.float64)
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise ValidationError(
                f"covariance shape {cov.shape} does not match mean length {d}"
            )
        scale = max(float(np.max(np.abs(cov))), 1e-300) if cov.size else 1.0
        if float(np.max(np.abs(cov - cov.T), initial=0.0)) > 1e-9 * scale:
            raise ValidationError("covariance is not symmetric within 1e-9 relative")
        if np.any(np.diag(cov) < 0):
            raise ValidationError("covariance has a negative diagonal entry")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class ProbTable:
    """N x C table of per-sample class probabilities p(y|x)."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.probs, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"probability table must be N x C, got {arr.shape}")
        _check_finite(arr, "probability table")
        if np.any(arr < -1e-12) or np.any(arr > 1 + 1e-12):
            raise ValidationError("probability entries must lie in [0, 1]")
        sums = arr.sum(axis=1)
        bad = np.abs(sums - 1.0) > 1e-6
        if np.any(bad):
            row = int(np.argmax(bad))
            raise ValidationError(
                f"row {row} sums to {sums[row]:.9g}, beyond the 1e-6 tolerance"
            )
        object.__setattr__(self, "probs", np.clip(arr, 0.0, 1.0))

    @property
    def n_samples(self) -> int:
        return self.probs.shape[0]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[1]


def save_activations(acts: ActivationSet, path) -> None:
    """Write an ACTB file; values are quantized to 32-bit floats."""
    layer = acts.layer_tag.encode("utf-8")
    source = acts.source_tag.encode("utf-8")
    if len(layer) > 0xFFFF or len(source) > 0xFFFF:
        raise ValidationError("tag longer than 65535 UTF-8 bytes")
    payload = np.ascontiguousarray(acts.data, dtype="<f4").tobytes()
    blob = (
        _HEADER.pack(_MAGIC, _VERSION, acts.n_samples, acts.dim)
        + _TAGLEN.pack(len(layer))
        + layer
        + _TAGLEN.pack(len(source))
        + source
        + payload
    )
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_activations(path) -> ActivationSet:
    """Read an ACTB file, or fall back to CSV when the magic is absent."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if blob[:4] == _MAGIC:
        return _parse_actb(blob, str(path))
    return _parse_csv(blob, str(path))


def _parse_actb(blob: bytes, name: str) -> ActivationSet:
    if len(blob) < _HEADER.size:
        raise FormatError(f"{name}: truncated ACTB header")
    magic, version, n, d = _HEADER.unpack_from(blob, 0)
    if version != _VERSION:
        raise FormatError(f"{name}: unsupported ACTB version {version}")
    off = _HEADER.size
    tags = []
    for _ in range(2):
        if off + _TAGLEN.size > len(blob):
            raise FormatError(f"{name}: truncated ACTB tag block")
        (tlen,) = _TAGLEN.unpack_from(blob, off)
        off += _TAGLEN.size
        if off + tlen > len(blob):
            raise FormatError(f"{name}: truncated ACTB tag block")
        try:
            tags.append(blob[off : off + tlen].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"{name}: tag is not valid UTF-8") from exc
        off += tlen
    if n < 1 or d < 1:
        raise FormatError(f"{name}: header declares empty shape {n}x{d}")
    expected = n * d * 4
    got = len(blob) - off
    if got != expected:
        raise FormatError(
            f"{name}: header declares {n}x{d} ({expected} payload bytes), found {got}"
        )
    data = np.frombuffer(blob, dtype="<f4", count=n * d, offset=off).reshape(n, d)
    return ActivationSet(data=data, layer_tag=tags[0], source_tag=tags[1])


def _parse_csv(blob: bytes, name: str) -> ActivationSet:
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{name}: neither ACTB nor UTF-8 CSV") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise FormatError(f"{name}: CSV needs a header line and at least one row")
    d = len(lines[0].split(","))
    rows = np.empty((len(lines) - 1, d), dtype=np.float64)
    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != d:
            raise FormatError(
                f"{name}: row {i} has {len(cells)} columns, header declares {d}"
            )
        for j, cell in enumerate(cells):
            try:
                rows[i, j] = float(cell)
            except ValueError as exc:
                raise FormatError(f"{name}: row {i} column {j}: {cell!r}") from exc
    _check_finite(rows, name)
    # quantize so CSV and ACTB loads of the same values agree bit-exactly
    return ActivationSet(data=rows.astype("<f4"))


def summarize(acts: ActivationSet) -> GaussianSummary:
    """Column mean and unbiased (divisor N-1) sample covariance of a set."""
    n = acts.n_samples
    if n < 2:
        raise InsufficientSamples(f"summarize needs N >= 2, got N={n}")
    if n <= acts.dim:
        warnings.warn(
            f"N={n} <= D={acts.dim}: sample covariance is singular; "
            "Gaussian-distance computations will rely on jitter",
            SingularCovarianceWarning,
            stacklevel=2,
        )
    mean = acts.data.mean(axis=0)
    centered = acts.data - mean
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0  # force exact symmetry
    return GaussianSummary(mean=mean, cov=cov, n_samples=n)
