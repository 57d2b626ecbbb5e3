"""Generalized goodness-of-fit (gGOF) tests for correlated data.

The package evaluates supremum-type statistics of ordered p-values, their
null distributions under independence, equal correlation and general
correlation (weighted-average and local-regression surrogates), the
double-adaptation omnibus test, linear transformations of Gaussian
statistics, regression-derived input statistics and simulation studies.
"""

from .crossprob import (
    BoundaryVector,
    CrossProbResult,
    counter_rng,
    cross_prob_batch,
    cross_prob_iid,
    cross_prob_mc,
)
from .dependence import (
    CorrelationModel,
    Engine,
    LoessSpec,
    QuadratureSpec,
    Sidedness,
    boundary_cdf_equal,
    conditional_boundary,
    loess_fit,
    pvalue,
    pvalues_from_stats,
    survival,
    survival_equal_corr,
    survival_iid,
    survival_loess,
    survival_mc,
    survival_wam,
    wam_weights,
)
from .errors import (
    ApproximationWarning,
    ConvergenceError,
    DimensionMismatchError,
    DomainError,
    EmptyRegionError,
    GgofError,
    SingularMatrixError,
    UnsupportedModelError,
)
from .families import (
    GofResult,
    StatFamily,
    TruncationScheme,
    compute_statistic,
    compute_statistics,
    f_eval,
    f_inverse,
    phi_divergence,
    rejection_boundary,
)
from .glm import (
    FitOutput,
    GlmDataset,
    decorrelated_statistics,
    fit_statistics,
    joint_statistics,
    marginal_statistics,
    null_fit,
)
from .omnibus import (
    AdaptationGrid,
    OmnibusResult,
    critical_threshold,
    diggof_pvalue,
    diggof_statistic,
    diggof_test,
)
from .simulation import (
    CorrelationSpec,
    SignalSpec,
    StudyConfig,
    gen_correlation,
    run_power_study,
    run_type1_study,
    sample_glm_dataset,
    sample_gmm,
)
from .transforms import (
    GaussianStatVector,
    TransformKind,
    banded_transform,
    bivariate_snrs,
    decorrelate,
    detection_boundary,
    detection_boundary_glm,
    innovate,
    snr_report,
)

__all__ = [name for name in dir() if not name.startswith("_")]
