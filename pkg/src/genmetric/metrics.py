"""Distribution-comparison kernels.

All operations are pure and return a MetricReport carrying the value, the
resolved parameters, any numeric warnings, and a short digest of the inputs.
Summation orders are fixed (numpy vectorized reductions), so results do not
depend on caller threading.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .activations import ActivationSet, GaussianSummary, ProbTable
from .errors import (
    DimError,
    InfiniteDivergence,
    NumericalError,
    ValidationError,
)

__all__ = [
    "MetricReport",
    "DiscreteDist",
    "Curve",
    "KernelConfig",
    "frechet_gaussian_distance",
    "inception_score",
    "kl_divergence",
    "js_divergence",
    "wasserstein_1d",
    "mmd",
    "discrete_frechet",
]

_PROB_FLOOR = 1e-12  # clamp before logs in the inception score
_ZERO_CLAMP = 1e-12  # tolerated negative rounding dust on provably >= 0 values


@dataclass(frozen=True)
class MetricReport:
    """Named metric value with parameters, warnings, and input provenance."""

    metric_name: str
    value: float
    params: tuple = ()
    warnings: tuple = ()
    inputs_digest: str = ""

    def to_dict(self) -> dict:
        return {
            "metric_name": self.metric_name,
            "value": self.value,
            "params": [[name, _plain(value)] for name, value in self.params],
            "warnings": list(self.warnings),
            "inputs_digest": self.inputs_digest,
        }

    def param(self, name: str):
        for key, value in self.params:
            if key == name:
                return value
        raise KeyError(name)


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value]
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def short_digest(*parts) -> str:
    """12-hex content hash of arrays / strings, used for report provenance."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            arr = np.ascontiguousarray(part)
            h.update(str(arr.shape).encode())
            h.update(arr.tobytes())
        elif isinstance(part, bytes):
            h.update(part)
        else:
            h.update(str(part).encode())
    return h.hexdigest()[:12]


@dataclass(frozen=True)
class DiscreteDist:
    """Probability vector over a finite support."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.probs, dtype=np.float64).reshape(-1)
        if arr.size < 1:
            raise ValidationError("distribution needs at least one atom")
        if np.any(arr < 0):
            raise ValidationError("distribution entries must be >= 0")
        total = float(arr.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"distribution sums to {total:.12g}, not 1 within 1e-9")
        object.__setattr__(self, "probs", arr)

    @classmethod
    def normalized(cls, values) -> "DiscreteDist":
        arr = np.asarray(values, dtype=np.float64).reshape(-1)
        total = arr.sum()
        if not np.isfinite(total) or total <= 0:
            raise ValidationError("cannot normalize: non-positive or non-finite mass")
        return cls(arr / total)

    @property
    def support_size(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class Curve:
    """Ordered polygonal curve: m points, each a length-d vector."""

    points: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.points, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValidationError(f"curve must be m x d with m >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("curve has non-finite coordinates")
        object.__setattr__(self, "points", arr)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class KernelConfig:
    """Kernel choice for MMD; bandwidth is numeric or 'median-heuristic'."""

    kind: str = "rbf"
    bandwidth: float | str = "median-heuristic"

    def __post_init__(self):
        if self.kind != "rbf":
            raise ValidationError(f"unsupported kernel kind {self.kind!r}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "median-heuristic":
                raise ValidationError(f"unknown bandwidth rule {self.bandwidth!r}")
        elif not (float(self.bandwidth) > 0):
            raise ValidationError("numeric bandwidth must be > 0")


# ---------------------------------------------------------------------------
# Frechet distance between Gaussian summaries (FID kernel)
# ---------------------------------------------------------------------------


def _jitter_amount(cov: np.ndarray) -> float:
    """Jitter eps for a covariance whose smallest eigenvalue is too small."""
    d = cov.shape[0]
    scale = float(np.trace(cov)) / d
    if scale <= 0:
        return 0.0
    if float(np.linalg.eigvalsh(cov).min()) < 1e-10 * scale:
        return 1e-6 * scale
    return 0.0


def frechet_gaussian_distance(real: GaussianSummary, gen: GaussianSummary) -> MetricReport:
    """Squared mean distance plus covariance trace term between two Gaussians.

    value = ||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r S_g)^(1/2))

    The trace term uses the symmetrized product identity
    Tr((S_r S_g)^(1/2)) = Tr((S_r^(1/2) S_g S_r^(1/2))^(1/2)), which keeps the
    whole computation in real symmetric eigendecompositions. Near-singular
    covariances receive a diagonal jitter, escalated tenfold on failure.
    """
    if real.dim != gen.dim:
        raise DimError(f"dimension mismatch: {real.dim} vs {gen.dim}")
    d = real.dim
    mu_diff = real.mean - gen.mean
    d2 = float(mu_diff @ mu_diff)

    jit_r = _jitter_amount(real.cov)
    jit_g = _jitter_amount(gen.cov)
    warnings: list[str] = []
    eye = np.eye(d)
    neg_tol = 1e-8 * max(float(np.trace(real.cov)), float(np.trace(gen.cov)), 0.0)

    trace_term = None
    for attempt in range(4):
        cov_r = real.cov + jit_r * eye if jit_r else real.cov
        cov_g = gen.cov + jit_g * eye if jit_g else gen.cov
        try:
            wr, ur = np.linalg.eigh(cov_r)
        except np.linalg.LinAlgError:
            wr = None
        if wr is not None and float(wr.min()) >= -neg_tol:
            root = (ur * np.sqrt(np.clip(wr, 0.0, None))) @ ur.T
            inner = root @ cov_g @ root
            inner = (inner + inner.T) / 2.0
            try:
                wm = np.linalg.eigvalsh(inner)
            except np.linalg.LinAlgError:
                wm = None
            if wm is not None and float(wm.min()) >= -neg_tol:
                trace_term = float(
                    np.trace(cov_r)
                    + np.trace(cov_g)
                    - 2.0 * np.sum(np.sqrt(np.clip(wm, 0.0, None)))
                )
                break
        # escalate: grow both jitters and retry
        base = max(
            float(np.trace(real.cov)) / d, float(np.trace(gen.cov)) / d, 1e-12
        )
        jit_r = max(jit_r, 1e-6 * base) * 10.0
        jit_g = max(jit_g, 1e-6 * base) * 10.0
        warnings.append(f"matrix square root retry {attempt + 1}: jitter escalated")
    if trace_term is None:
        raise NumericalError("matrix square root failed after jitter escalation")

    if jit_r > 0:
        warnings.insert(0, f"jitter applied to real covariance (eps={jit_r:.3e})")
    if jit_g > 0:
        warnings.insert(0, f"jitter applied to generated covariance (eps={jit_g:.3e})")

    value = d2 + trace_term
    if value < -1e-8:
        raise NumericalError(f"negative distance {value:.3e} beyond tolerance")
    if value < 0.0:
        value = 0.0

    return MetricReport(
        metric_name="fid",
        value=value,
        params=(
            ("d2", d2),
            ("trace", trace_term),
            ("jitter_real", jit_r),
            ("jitter_gen", jit_g),
            ("dim", d),
        ),
        warnings=tuple(warnings),
        inputs_digest=short_digest(real.mean, real.cov, gen.mean, gen.cov),
    )


# ---------------------------------------------------------------------------
# Inception score
# ---------------------------------------------------------------------------


def inception_score(table: ProbTable) -> MetricReport:
    """exp of the mean per-sample KL between p(y|x) and the marginal p(y).

    Probabilities are clamped at 1e-12 before the logs and rows renormalized;
    the natural log is used throughout, matching the exp wrapper.
    """
    if table.n_classes < 2:
        raise ValidationError("inception score needs C >= 2 classes")
    p = np.clip(table.probs, _PROB_FLOOR, None)
    p = p / p.sum(axis=1, keepdims=True)
    marginal = p.mean(axis=0)
    kl_rows = np.sum(p * (np.log(p) - np.log(marginal)), axis=1)
    value = float(np.exp(kl_rows.mean()))
    return MetricReport(
        metric_name="inception_score",
        value=value,
        params=(("n_samples", table.n_samples), ("n_classes", table.n_classes)),
        inputs_digest=short_digest(table.probs),
    )


# ---------------------------------------------------------------------------
# Discrete divergences
# ---------------------------------------------------------------------------


def _kl_terms(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl_divergence(
    p: DiscreteDist, q: DiscreteDist, smoothing: float | None = None
) -> MetricReport:
    """KL(P || Q) in nats with the 0*log(0/q) = 0 convention.

    Without smoothing, a support atom with P > 0 and Q = 0 raises
    InfiniteDivergence. With smoothing, eps is added to every Q entry,
    Q is renormalized, and a warning is recorded.
    """
    if p.support_size != q.support_size:
        raise DimError(
            f"support mismatch: {p.support_size} vs {q.support_size}"
        )
    warnings = []
    qv = q.probs
    if smoothing is not None:
        if not (smoothing > 0):
            raise ValidationError("smoothing eps must be > 0")
        qv = qv + smoothing
        qv = qv / qv.sum()
        warnings.append(f"smoothing eps={smoothing:g} applied to q")
    elif np.any((p.probs > 0) & (qv == 0)):
        raise InfiniteDivergence(
            "P puts mass where Q has none; pass smoothing to regularize"
        )
    value = _kl_terms(p.probs, qv)
    if -_ZERO_CLAMP < value < 0.0:
        value = 0.0
    return MetricReport(
        metric_name="kl",
        value=value,
        params=(("support_size", p.support_size), ("smoothing", smoothing)),
        warnings=tuple(warnings),
        inputs_digest=short_digest(p.probs, q.probs),
    )


def js_divergence(p: DiscreteDist, q: DiscreteDist) -> MetricReport:
    """Jensen-Shannon divergence in nats; symmetric and bounded by ln 2."""
    if p.support_size != q.support_size:
        raise DimError(
            f"support mismatch: {p.support_size} vs {q.support_size}"
        )
    mid = (p.probs + q.probs) / 2.0
    value = 0.5 * _kl_terms(p.probs, mid) + 0.5 * _kl_terms(q.probs, mid)
    if -_ZERO_CLAMP < value < 0.0:
        value = 0.0
    return MetricReport(
        metric_name="js",
        value=value,
        params=(("support_size", p.support_size),),
        inputs_digest=short_digest(p.probs, q.probs),
    )


# ---------------------------------------------------------------------------
# 1-D Wasserstein (earth mover's) distance
# ---------------------------------------------------------------------------


def _as_weighted(arg, name: str) -> tuple[np.ndarray, np.ndarray]:
    """Accept a 1-D sample list, or a (locations, weights|DiscreteDist) pair."""
    if isinstance(arg, tuple) and len(arg) == 2:
        locs, weights = arg
        if isinstance(weights, DiscreteDist):
            weights = weights.probs
        locs = np.asarray(locs, dtype=np.float64).reshape(-1)
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if locs.size != weights.size:
            raise ValidationError(f"{name}: locations and weights differ in length")
        if np.any(weights < 0) or weights.sum() <= 0:
            raise ValidationError(f"{name}: weights must be >= 0 with positive total")
    else:
        locs = np.asarray(arg, dtype=np.float64).reshape(-1)
        weights = np.ones_like(locs)
    if locs.size < 1:
        raise ValidationError(f"{name}: needs at least one sample or atom")
    if not np.all(np.isfinite(locs)) or not np.all(np.isfinite(weights)):
        raise ValidationError(f"{name}: non-finite location or weight")
    return locs, weights


def wasserstein_1d(x, y) -> MetricReport:
    """Exact 1-D earth mover's distance from piecewise-constant CDFs.

    Inputs are sample lists (equal weights) or (locations, weights) pairs.
    For equal-size sample lists this equals the mean absolute difference of
    the sorted samples.
    """
    xl, xw = _as_weighted(x, "x")
    yl, yw = _as_weighted(y, "y")

    xo = np.argsort(xl, kind="stable")
    yo = np.argsort(yl, kind="stable")
    xl, xw = xl[xo], xw[xo]
    yl, yw = yl[yo], yw[yo]

    grid = np.concatenate([xl, yl])
    grid.sort(kind="stable")
    deltas = np.diff(grid)

    x_cum = np.concatenate([[0.0], np.cumsum(xw)])
    x_cum /= x_cum[-1]
    y_cum = np.concatenate([[0.0], np.cumsum(yw)])
    y_cum /= y_cum[-1]
    x_cdf = x_cum[np.searchsorted(xl, grid[:-1], side="right")]
    y_cdf = y_cum[np.searchsorted(yl, grid[:-1], side="right")]

    value = float(np.sum(np.abs(x_cdf - y_cdf) * deltas))
    return MetricReport(
        metric_name="wasserstein1d",
        value=value,
        params=(("n_x", int(xl.size)), ("n_y", int(yl.size))),
        inputs_digest=short_digest(xl, xw, yl, yw),
    )


# ---------------------------------------------------------------------------
# Maximum mean discrepancy
# ---------------------------------------------------------------------------


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    return np.clip(aa + bb - 2.0 * (a @ b.T), 0.0, None)


def mmd(
    x: ActivationSet,
    y: ActivationSet,
    kernel: KernelConfig = KernelConfig(),
    estimator: str = "biased",
) -> MetricReport:
    """Squared maximum mean discrepancy under an RBF kernel.

    biased: mean over all pairs, diagonals included (always >= 0).
    unbiased: within-set terms exclude the diagonal, divisors m(m-1)/n(n-1).
    The median heuristic takes the median pairwise distance of the pooled set
    and falls back to bandwidth 1 with a warning when that median is zero.
    """
    if x.dim != y.dim:
        raise DimError(f"dimension mismatch: {x.dim} vs {y.dim}")
    if estimator not in ("biased", "unbiased"):
        raise ValidationError(f"unknown estimator {estimator!r}")
    m, n = x.n_samples, y.n_samples
    if estimator == "unbiased" and (m < 2 or n < 2):
        raise ValidationError("unbiased estimator needs N >= 2 on both sides")

    warnings = []
    if isinstance(kernel.bandwidth, str):
        pooled = np.vstack([x.data, y.data])
        dists = np.sqrt(_sq_dists(pooled, pooled))
        upper = dists[np.triu_indices(pooled.shape[0], k=1)]
        bandwidth = float(np.median(upper)) if upper.size else 0.0
        if bandwidth <= 0.0:
            bandwidth = 1.0
            warnings.append("median heuristic degenerate; bandwidth set to 1")
    else:
        bandwidth = float(kernel.bandwidth)

    gamma = 1.0 / (2.0 * bandwidth * bandwidth)
    kxx = np.exp(-gamma * _sq_dists(x.data, x.data))
    kyy = np.exp(-gamma * _sq_dists(y.data, y.data))
    kxy = np.exp(-gamma * _sq_dists(x.data, y.data))

    if estimator == "biased":
        value = float(kxx.mean() + kyy.mean() - 2.0 * kxy.mean())
        if -_ZERO_CLAMP < value < 0.0:
            value = 0.0
    else:
        xx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
        yy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
        value = float(xx + yy - 2.0 * kxy.mean())

    return MetricReport(
        metric_name="mmd2",
        value=value,
        params=(
            ("kernel", kernel.kind),
            ("bandwidth", bandwidth),
            ("estimator", estimator),
            ("n_x", m),
            ("n_y", n),
        ),
        warnings=tuple(warnings),
        inputs_digest=short_digest(x.data, y.data),
    )


# ---------------------------------------------------------------------------
# Discrete Frechet distance between curves
# ---------------------------------------------------------------------------


def discrete_frechet(a: Curve, b: Curve) -> MetricReport:
    """Discrete Frechet distance under the Euclidean point metric.

    Standard dynamic program over the coupling lattice:
    c(i,j) = max(d(a_i, b_j), min(c(i-1,j), c(i,j-1), c(i-1,j-1))).
    """
    if a.dim != b.dim:
        raise DimError(f"point dimension mismatch: {a.dim} vs {b.dim}")
    m, k = a.n_points, b.n_points
    # per-pair sqrt(dot) rather than a Gram expansion: exact for close points
    dist = np.empty((m, k))
    for i in range(m):
        for j in range(k):
            v = a.points[i] - b.points[j]
            dist[i, j] = np.sqrt(np.dot(v, v))
    table = np.empty((m, k))
    table[0, 0] = dist[0, 0]
    for i in range(1, m):
        table[i, 0] = max(table[i - 1, 0], dist[i, 0])
    for j in range(1, k):
        table[0, j] = max(table[0, j - 1], dist[0, j])
    for i in range(1, m):
        for j in range(1, k):
            table[i, j] = max(
                min(table[i - 1, j], table[i, j - 1], table[i - 1, j - 1]),
                dist[i, j],
            )
    return MetricReport(
        metric_name="discrete_frechet",
        value=float(table[-1, -1]),
        params=(("len_a", m), ("len_b", k), ("point_dim", a.dim)),
        inputs_digest=short_digest(a.points, b.points),
    )
