"""Sequential Monte Carlo state estimation with an adapted-proposal
particle filter.

The core filter splits each step's cloud into an exploration class that
proposes from the model's transition kernel and an exploitation class that
proposes from a Gaussian fitted to the current observation by an
exponential natural evolution strategy. A bootstrap filter, resamplers,
the viral infection benchmark model, and a reproducible experiment runner
round out the package.
"""

from .cloud import (
    ParticleCloud,
    effective_sample_size,
    normalize_weights,
    posterior_mean,
    rmse_series,
    weight_histogram,
)
from .config import (
    ExperimentConfig,
    comparison_configs,
    config_from_dict,
    config_to_dict,
    default_benchmark_config,
    load_config,
    save_config,
)
from .estimators import BootstrapStateEstimator, XnpfStateEstimator
from .exceptions import (
    AllWeightsZero,
    ConfigError,
    LengthMismatch,
    NoSuccessfulRuns,
    NumericalFailure,
    WeightsNotNormalized,
    XnpfError,
)
from .filtering import (
    FilterResult,
    XnpfConfig,
    bootstrap_step,
    run_filter,
    xnpf_step,
)
from .hiv import (
    BetaSchedule,
    HivModel,
    HivParams,
    MeasurementNoise,
    simulate_truth,
)
from .model import StateSpaceModel
from .resampling import multinomial_resample, resample, sus_resample
from .xnes import (
    SearchDistribution,
    XnesConfig,
    gaussian_log_density,
    run_xnes,
)

__version__ = "0.1.0"

__all__ = [
    "AllWeightsZero",
    "BetaSchedule",
    "BootstrapStateEstimator",
    "ConfigError",
    "ExperimentConfig",
    "FilterResult",
    "HivModel",
    "HivParams",
    "LengthMismatch",
    "MeasurementNoise",
    "NoSuccessfulRuns",
    "NumericalFailure",
    "ParticleCloud",
    "SearchDistribution",
    "StateSpaceModel",
    "WeightsNotNormalized",
    "XnesConfig",
    "XnpfConfig",
    "XnpfError",
    "XnpfStateEstimator",
    "bootstrap_step",
    "comparison_configs",
    "config_from_dict",
    "config_to_dict",
    "default_benchmark_config",
    "effective_sample_size",
    "gaussian_log_density",
    "load_config",
    "multinomial_resample",
    "normalize_weights",
    "posterior_mean",
    "resample",
    "rmse_series",
    "run_filter",
    "run_xnes",
    "save_config",
    "simulate_truth",
    "sus_resample",
    "weight_histogram",
    "xnpf_step",
    "__version__",
]
