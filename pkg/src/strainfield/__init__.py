"""Multilevel Gaussian-process modelling of train-passing strain events."""

from .classify import BwimFeatures, TrainClass, classify_event, mean_axle_separation
from .config import RunConfig, load_config
from .diagnostics import Diagnostics, compute_diagnostics, compute_ess_bulk, compute_rhat
from .hsgp import (
    DesignMatrix,
    HsgpBasis,
    KernelHyper,
    approx_kernel,
    build_design_matrix,
    eigenfunction,
    eigenvalue,
    matern32_kernel_exact,
    matern32_spectral_density,
    spectral_weights,
)
from .ingest import (
    NormalizationParams,
    RawFbgSeries,
    StrainEvent,
    StrainSeries,
    compute_baseline,
    denormalize_prediction,
    lowpass_filter,
    normalize_event,
    normalize_fleet,
    time_to_distance,
    wavelength_to_microstrain,
)
from .model import (
    EventDataset,
    ParameterState,
    event_function,
    from_unconstrained,
    log_likelihood,
    log_posterior_unconstrained,
    log_prior,
    to_unconstrained,
)
from .monitoring import (
    CorrelationReport,
    correlation_report,
    flag_outliers,
    pearson_correlation_matrix,
    posterior_mean_matrix,
)
from .predictive import PredictiveBand, posterior_predictive
from .sampler import PosteriorSamples, SamplerConfig, run_sampler, sample_nuts
from .simulator import (
    BridgeSpec,
    TrainSpec,
    influence_line,
    inject_speed_error,
    make_fleet,
    simulate_event,
)

__version__ = "0.1.0"
