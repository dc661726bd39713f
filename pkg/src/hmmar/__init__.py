"""Hidden Markov mixture autoregressive (HM-MAR) models."""

from hmmar.errors import (
    AllRestartsFailed,
    ConditionViolated,
    DegenerateRegime,
    DimensionMismatch,
    HmMarError,
    InsufficientData,
    InvalidModel,
    InvalidSeries,
    NonErgodicChain,
    NumericalUnderflow,
    UnsupportedOrder,
)
from hmmar.model import DerivedMatrices, HmMarModel, derive_matrices, shipped_model, stationary_distribution, validate
from hmmar.filtering import (
    ConditionalForecast,
    ForwardState,
    filter_step,
    forecast_one_step,
    gaussian_cdf,
    init_filter,
    log_likelihood,
    rolling_forecast,
)
from hmmar.simulate import SimulationConfig, empirical_moments, simulate, simulate_ensemble
from hmmar.stability import StabilityReport, analyze, limiting_mean, second_moment_bound, variance_bound
from hmmar.estimation import FitConfig, FitResult, em_step, fit, forward_backward

__version__ = "0.1.0"
