"""Metaorder-driven price formation: simulator, estimators, and scaling oracles."""

from .errors import (
    ConfigurationError,
    ImpactflowError,
    InsufficientDataError,
    NumericalError,
    TapeFormatError,
)
from .flow import FlowStats, Metaorder, MetaorderTable, TradeTape, flow_statistics, initialize_stationary_state, simulate_tape
from .kernels import (
    SignSequence,
    generate_correlated_signs,
    sample_child_volume,
    sample_duration,
    sign_autocorrelation,
    sign_correlation_target,
)
from .params import ModelParams, stream
from .price import (
    PricePath,
    assemble_price_path,
    bracket_constant,
    fundamental_path,
    impact_coefficient,
    impact_trajectory_value,
    peak_impact,
)
from .estimators import (
    AggregatedImpact,
    BinnedSignMemory,
    CollapseResult,
    ExponentFit,
    ImbalanceSeries,
    MomentScaling,
    ScalingSurface,
    WindowPlan,
    aggregated_impact_curve,
    clip_volumes,
    correlation_surface,
    covariance_surface,
    distribution_collapse,
    fit_power_law,
    generalized_imbalance,
    moment_scaling,
    price_moment_scaling,
    sign_autocorrelation_by_volume_bin,
    window_plan,
)
from .oracle import (
    CorrelationPrediction,
    CovariancePrediction,
    ImpactConstants,
    PredictionSet,
    PriceVariancePrediction,
    SigmaPrediction,
    build_prediction_set,
    crossover_a,
    impact_constants,
    offdiag_variance_constant,
    offdiag_variance_constant_closed_form,
    predict_correlation_shape,
    predict_covariance_exponent,
    predict_price_variance_exponent,
    predict_sigma_a_exponent,
)

__version__ = "0.1.0"
