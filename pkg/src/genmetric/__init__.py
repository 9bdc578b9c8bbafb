"""genmetric: generative-model evaluation over feature activations.

Core pieces: activation-set IO and Gaussian summaries, the FID / LFID
kernels with variance-based dimension selection, companion divergences
(IS, KL, JS, 1-D Wasserstein, MMD, discrete Frechet), an early-stopping
monitor, a keep-if-improved grid search, and a closed-form toy generator
that exercises the whole loop end to end.
"""

__version__ = "0.1.0"

from .activations import (
    ActivationSet,
    GaussianSummary,
    ProbTable,
    load_activations,
    save_activations,
    summarize,
)
from .errors import (
    DataError,
    DimError,
    ExternalError,
    FormatError,
    GenmetricError,
    InfiniteDivergence,
    InsufficientSamples,
    IoError,
    NumericalError,
    SequenceError,
    SingularCovarianceWarning,
    StateError,
    TuningError,
    ValidationError,
)
from .lfid import (
    FeatureRanking,
    GateConfig,
    GateDecision,
    SelectionSpec,
    lfid_score,
    quality_gate,
    rank_features,
    select_dims,
)
from .metrics import (
    Curve,
    DiscreteDist,
    KernelConfig,
    MetricReport,
    discrete_frechet,
    frechet_gaussian_distance,
    inception_score,
    js_divergence,
    kl_divergence,
    mmd,
    wasserstein_1d,
)
from .monitoring import (
    MonitorConfig,
    MonitorState,
    TracePoint,
    TuningGrid,
    TuningResult,
    grid_search,
    monitor_update,
    parse_grid_file,
    run_external_evaluation,
)
from .plotting import emit_plot
from .report import RunReport, validate_report
from .toygen import (
    AdamConfig,
    AdamState,
    ToyGenerator,
    adam_step,
    fit_toy_generator,
    sample_toy,
)
