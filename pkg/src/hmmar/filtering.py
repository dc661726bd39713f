"""Forward filtering of regime weights and one-step-ahead forecasts.

The mixture weight of regime ``h`` at time ``t`` is the predictive
probability ``P(Z_t = h | y_0, ..., y_{t-1})``.  It is propagated with the
scaled forward recursion: after absorbing ``y_t`` the filtered vector is
renormalised and the log of the normaliser is added to the running
log-likelihood, so long series never underflow.

Lag convention: ``lags[0]`` is ``y_{t-1}`` and ``lags[p-1]`` is ``y_{t-p}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from hmmar.errors import DimensionMismatch, NumericalUnderflow
from hmmar.model import HmMarModel

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def gaussian_cdf(x):
    """Standard normal distribution function, accurate in both tails.

    Accepts scalars or arrays.  Uses ``erfc`` so that ``Phi(-x)`` keeps full
    relative precision for large ``x``.
    """
    out = 0.5 * special.erfc(-np.asarray(x, dtype=np.float64) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def gaussian_logpdf(x, mean, sigma):
    z = (np.asarray(x, dtype=np.float64) - mean) / sigma
    return -_LOG_SQRT_2PI - np.log(sigma) - 0.5 * z * z


def gaussian_pdf(x, mean, sigma):
    return np.exp(gaussian_logpdf(x, mean, sigma))


@dataclass(frozen=True, eq=False)
class ForwardState:
    """Filter state after absorbing observations up to index ``t``.

    ``alpha_filtered`` is ``None`` right after :func:`init_filter`, when
    only the conditioning prefix has been seen.
    """

    t: int
    alpha_filtered: NDArray[np.float64] | None
    alpha_predictive: NDArray[np.float64]
    log_likelihood: float


@dataclass(frozen=True, eq=False)
class ConditionalForecast:
    regime_means: NDArray[np.float64]
    mean: float
    variance: float


def _check_lags(model: HmMarModel, lags: ArrayLike) -> NDArray[np.float64]:
    lags = np.asarray(lags, dtype=np.float64).reshape(-1)
    if lags.shape[0] != model.p:
        raise DimensionMismatch(f"expected {model.p} lags, got {lags.shape[0]}")
    return lags


def init_filter(model: HmMarModel, prefix: ArrayLike = ()) -> ForwardState:
    """Start the recursion at ``t = p`` with predictive weights ``rho``."""
    _check_lags(model, prefix)
    rho = np.array(model.rho, dtype=np.float64)
    rho.setflags(write=False)
    return ForwardState(t=model.p - 1, alpha_filtered=None, alpha_predictive=rho, log_likelihood=0.0)


def regime_log_densities(model: HmMarModel, y_new: float, lags: ArrayLike) -> NDArray[np.float64]:
    means = model.regime_means(lags)
    return gaussian_logpdf(y_new, means, model.sigmas)


def filter_step(state: ForwardState, model: HmMarModel, y_new: float, lags: ArrayLike) -> ForwardState:
    """Absorb ``y_{t+1}`` and return the next state (pure function).

    Raises
    ------
    NumericalUnderflow
        If the observation or its lags are not finite.
    """
    lags = _check_lags(model, lags)
    t = state.t + 1
    if not (math.isfinite(y_new) and np.all(np.isfinite(lags))):
        raise NumericalUnderflow(t, "non-finite observation or lag")
    logd = regime_log_densities(model, y_new, lags)
    shift = float(np.max(logd))
    w = state.alpha_predictive * np.exp(logd - shift)
    total = float(w.sum())
    if not total > 0.0 or not math.isfinite(total):
        raise NumericalUnderflow(t)
    filtered = w / total
    # with identical rows the prediction is that row, independent of the data
    predictive = model.transition[0].copy() if model.identical_rows else filtered @ model.transition
    filtered.setflags(write=False)
    predictive.setflags(write=False)
    return ForwardState(
        t=t,
        alpha_filtered=filtered,
        alpha_predictive=predictive,
        log_likelihood=state.log_likelihood + shift + math.log(total),
    )


def forecast_from_weights(weights: ArrayLike, model: HmMarModel, lags: ArrayLike) -> ConditionalForecast:
    """Mixture mean and variance for arbitrary regime weights."""
    lags = _check_lags(model, lags)
    w = np.asarray(weights, dtype=np.float64)
    means = model.regime_means(lags)
    # centred at the heaviest regime so equal means reproduce exactly
    c = means[int(np.argmax(w))]
    mean = float(c + w @ (means - c))
    # noise part plus spread of the regime means about the mixture mean
    variance = float(w @ (model.sigmas**2)) + float(w @ (means - mean) ** 2)
    return ConditionalForecast(regime_means=means, mean=mean, variance=variance)


def forecast_one_step(state: ForwardState, model: HmMarModel, lags: ArrayLike) -> ConditionalForecast:
    """Conditional mean and variance of ``y_{t+1}`` given the filter state."""
    return forecast_from_weights(state.alpha_predictive, model, lags)


@dataclass(frozen=True, eq=False)
class RollingForecast:
    """One-step forecasts for ``t = p, ..., n-1``.

    ``t``, ``mean``, ``variance`` and ``abs_error`` are aligned arrays;
    ``weights[i]`` holds the predictive regime weights used at ``t[i]``.
    """

    t: NDArray[np.int64]
    y: NDArray[np.float64]
    mean: NDArray[np.float64]
    variance: NDArray[np.float64]
    abs_error: NDArray[np.float64]
    weights: NDArray[np.float64]
    log_likelihood: float

    @property
    def total_abs_error(self) -> float:
        return float(self.abs_error.sum())


def rolling_forecast(model: HmMarModel, series: ArrayLike) -> RollingForecast:
    """Forecast each ``y_t`` from ``y_0..y_{t-1}`` and record the absolute error."""
    y = np.asarray(series, dtype=np.float64).reshape(-1)
    p, n = model.p, y.shape[0]
    if n < p + 1:
        raise DimensionMismatch(f"series of length {n} too short for p = {p}")
    state = init_filter(model, y[:p])
    m = n - p
    mean = np.empty(m)
    var = np.empty(m)
    weights = np.empty((m, model.k))
    for i, t in enumerate(range(p, n)):
        lags = y[t - p : t][::-1]
        fc = forecast_one_step(state, model, lags)
        mean[i], var[i] = fc.mean, fc.variance
        weights[i] = state.alpha_predictive
        state = filter_step(state, model, float(y[t]), lags)
    return RollingForecast(
        t=np.arange(p, n),
        y=y[p:].copy(),
        mean=mean,
        variance=var,
        abs_error=np.abs(y[p:] - mean),
        weights=weights,
        log_likelihood=state.log_likelihood,
    )


def filter_series(model: HmMarModel, series: ArrayLike) -> list[ForwardState]:
    """All states from :func:`init_filter` through the last observation."""
    y = np.asarray(series, dtype=np.float64).reshape(-1)
    p = model.p
    states = [init_filter(model, y[:p])]
    for t in range(p, y.shape[0]):
        states.append(filter_step(states[-1], model, float(y[t]), y[t - p : t][::-1]))
    return states


def log_likelihood(model: HmMarModel, series: ArrayLike) -> float:
    """Log density of ``y_p..y_{n-1}`` given the prefix ``y_0..y_{p-1}``."""
    return filter_series(model, series)[-1].log_likelihood
