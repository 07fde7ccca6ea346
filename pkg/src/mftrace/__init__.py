"""Multifractal analysis of self-similar measures through spectral triples on gap sequences."""

from .errors import (
    BoundaryError,
    BracketError,
    CapacityError,
    ConfigError,
    EmptyIntervalError,
    IfsError,
    InsufficientScalesError,
    LacunarityWarning,
    MftraceError,
    NegativeQUnenlargedError,
    NonConvergedError,
    NonConvexWarning,
    OverlapError,
    RatioError,
    TooFewValuesError,
    WeightError,
    ZeroGapError,
    ZeroMeasureSideError,
)
from .ifs import GapInterval, IfsSystem, Word, enumerate_gaps, gap_count_profile, gap_table, validate_ifs
from .measure import (
    EnlargedInterval,
    GridCell,
    LogValue,
    SelfSimilarMeasure,
    cdf,
    enlarge,
    grid_cells_star,
    grid_moment_sum,
    interval_measure,
    interval_moment_sum,
)
from .multifractal import (
    BetaEstimate,
    SpectrumPoint,
    beta_closed_form,
    beta_grid_estimate,
    beta_interval_estimate,
    default_enlargement,
    enlargement_check,
    lacunarity_estimate,
    legendre_spectrum,
    sandwich_check,
)
from .nc_integral import (
    AuxiliaryMeasure,
    TestFunction,
    cell_indicator,
    constant,
    hat,
    identity,
    integrate_nu,
    nu_weights,
    verify_integral,
    weighted_trace,
)
from .spectral import (
    RenewalConstants,
    SingularValue,
    SingularValues,
    TraceEstimate,
    minkowski_profile,
    partial_sum_trace,
    renewal_constants,
    renewal_diagnostic,
    scale_threshold,
    set_trace_constant,
    singular_values,
    singular_values_above,
    spectral_dimension_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "AuxiliaryMeasure",
    "BetaEstimate",
    "BoundaryError",
    "BracketError",
    "CapacityError",
    "ConfigError",
    "EmptyIntervalError",
    "EnlargedInterval",
    "GapInterval",
    "GridCell",
    "IfsError",
    "IfsSystem",
    "InsufficientScalesError",
    "LacunarityWarning",
    "LogValue",
    "MftraceError",
    "NegativeQUnenlargedError",
    "NonConvergedError",
    "NonConvexWarning",
    "OverlapError",
    "RatioError",
    "RenewalConstants",
    "SelfSimilarMeasure",
    "SingularValue",
    "SingularValues",
    "SpectrumPoint",
    "TestFunction",
    "TooFewValuesError",
    "TraceEstimate",
    "WeightError",
    "Word",
    "ZeroGapError",
    "ZeroMeasureSideError",
    "beta_closed_form",
    "beta_grid_estimate",
    "beta_interval_estimate",
    "cdf",
    "cell_indicator",
    "constant",
    "default_enlargement",
    "enlarge",
    "enlargement_check",
    "enumerate_gaps",
    "gap_count_profile",
    "gap_table",
    "grid_cells_star",
    "grid_moment_sum",
    "hat",
    "identity",
    "integrate_nu",
    "interval_measure",
    "interval_moment_sum",
    "lacunarity_estimate",
    "legendre_spectrum",
    "minkowski_profile",
    "nu_weights",
    "partial_sum_trace",
    "renewal_constants",
    "renewal_diagnostic",
    "sandwich_check",
    "scale_threshold",
    "set_trace_constant",
    "singular_values",
    "singular_values_above",
    "spectral_dimension_estimate",
    "validate_ifs",
    "verify_integral",
    "weighted_trace",
]
