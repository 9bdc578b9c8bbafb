"""Variance-based feature selection, the low-dimensional FID score, and the
quality gate.

Features are ranked by per-dimension sample variance computed on the REAL
set only; the same column subset is then applied to both sets so that the
reduced spaces stay aligned. Selection subsets existing columns; there is no
learned projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .activations import ActivationSet, summarize
from .errors import DimError, InsufficientSamples, ValidationError
from .metrics import MetricReport, frechet_gaussian_distance, short_digest


@dataclass(frozen=True)
class FeatureRanking:
    """Per-dimension variances and the descending-variance permutation."""

    variances: np.ndarray
    order: np.ndarray
    computed_on: str = "unknown"

    def __post_init__(self):
        var = np.ascontiguousarray(self.variances, dtype=np.float64).reshape(-1)
        order = np.ascontiguousarray(self.order, dtype=np.int64).reshape(-1)
        if var.shape != order.shape:
            raise ValidationError("variances and order differ in length")
        if not np.array_equal(np.sort(order), np.arange(var.size)):
            raise ValidationError("order is not a permutation of 0..D-1")
        if np.any(np.diff(var[order]) > 0):
            raise ValidationError("order is not sorted by descending variance")
        object.__setattr__(self, "variances", var)
        object.__setattr__(self, "order", order)

    @property
    def dim(self) -> int:
        return self.variances.shape[0]


@dataclass(frozen=True)
class SelectionSpec:
    """Which columns to keep: everything, or the top-k by variance."""

    mode: str = "all"
    k: int | None = None

    def __post_init__(self):
        if self.mode not in ("all", "top_k"):
            raise ValidationError(f"unknown selection mode {self.mode!r}")
        if self.mode == "top_k":
            if self.k is None or self.k < 1:
                raise ValidationError("top_k selection needs k >= 1")


@dataclass(frozen=True)
class GateConfig:
    """Quality-gate threshold; scores above it demand model adjustment."""

    threshold_T: float = 20.0

    def __post_init__(self):
        if not (self.threshold_T > 0):
            raise ValidationError("gate threshold must be > 0")


class GateDecision(Enum):
    PASS = "pass"
    ADJUST = "adjust"


def rank_features(acts: ActivationSet) -> FeatureRanking:
    """Rank columns by sample variance (divisor N-1), ties by lower index."""
    if acts.n_samples < 2:
        raise InsufficientSamples(f"ranking needs N >= 2, got N={acts.n_samples}")
    variances = acts.data.var(axis=0, ddof=1)
    order = np.argsort(-variances, kind="stable")
    return FeatureRanking(
        variances=variances, order=order, computed_on=acts.source_tag
    )


def select_dims(
    acts: ActivationSet, ranking: FeatureRanking, spec: SelectionSpec
) -> ActivationSet:
    """Column subset given by the first k ranked dimensions, in rank order."""
    if ranking.dim != acts.dim:
        raise DimError(
            f"ranking dim {ranking.dim} does not match set dim {acts.dim}"
        )
    if spec.mode == "all":
        return acts
    if spec.k > acts.dim:
        raise DimError(f"k={spec.k} exceeds dim {acts.dim}")
    cols = ranking.order[: spec.k]
    return ActivationSet(
        data=acts.data[:, cols],
        layer_tag=acts.layer_tag,
        source_tag=acts.source_tag,
    )


def lfid_score(
    real: ActivationSet, gen: ActivationSet, spec: SelectionSpec = SelectionSpec()
) -> MetricReport:
    """Gaussian Frechet distance on variance-selected activation columns.

    The ranking is computed on the real set only and the identical column
    subset is applied to both sets before summarization.
    """
    if real.dim != gen.dim:
        raise DimError(f"dimension mismatch: {real.dim} vs {gen.dim}")
    if spec.mode == "all":
        real_sel, gen_sel = real, gen
        cols = np.arange(real.dim)
    else:
        ranking = rank_features(real)
        real_sel = select_dims(real, ranking, spec)
        gen_sel = select_dims(gen, ranking, spec)
        cols = ranking.order[: spec.k]
    fid = frechet_gaussian_distance(summarize(real_sel), summarize(gen_sel))
    k = int(cols.size)
    return MetricReport(
        metric_name="lfid",
        value=fid.value,
        params=(
            ("mode", spec.mode),
            ("k", k),
            ("selected_columns", [int(c) for c in cols]),
        )
        + fid.params,
        warnings=fid.warnings,
        inputs_digest=short_digest(real.data, gen.data, spec.mode, k),
    )


def quality_gate(lfid_value: float, gate: GateConfig = GateConfig()) -> GateDecision:
    """ADJUST when the score strictly exceeds the threshold, else PASS."""
    value = float(lfid_value)
    if np.isnan(value):
        raise ValidationError("gate input is NaN")
    return GateDecision.ADJUST if value > gate.threshold_T else GateDecision.PASS
