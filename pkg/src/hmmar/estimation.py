"""EM estimation of HM-MAR models with a Baum-Welch E-step.

Two modes share the same machinery:

``hmm``
    Free transition matrix (HM-MAR).
``iid``
    All transition rows tied to one weight vector, i.e. the classical
    mixture autoregression (MAR) with independent regimes.

The M-step is the exact complete-data maximiser: per-regime weighted least
squares on ``(1, y_{t-1}, ..., y_{t-p})``, weighted residual variance, and
expected transition counts.  In ``iid`` mode the shared row is the average
smoothed regime probability over ``t >= p + 1`` (the first modeled state is
governed by ``rho`` instead).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from hmmar import _io, _kernels
from hmmar.errors import AllRestartsFailed, DegenerateRegime, DimensionMismatch, InsufficientData, NumericalUnderflow
from hmmar.filtering import gaussian_logpdf
from hmmar.model import HmMarModel

Mode = Literal["hmm", "iid"]

SIGMA_FLOOR = 1e-6
MIN_MASS = 1e-8
MAX_COND = 1e12


def design(series: ArrayLike, p: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Regressors ``(1, y_{t-1}, ..., y_{t-p})`` and targets ``y_t`` for ``t >= p``."""
    y = np.asarray(series, dtype=np.float64).reshape(-1)
    n = y.shape[0]
    X = np.empty((n - p, p + 1))
    X[:, 0] = 1.0
    for i in range(1, p + 1):
        X[:, i] = y[p - i : n - i]
    return X, y[p:]


@dataclass(frozen=True, eq=False)
class Posteriors:
    """Smoothed regime probabilities for modeled indices ``t = p..n-1``.

    ``smoothed[t, h] = P(Z_{p+t} = h | y)`` and
    ``pairwise[t, i, j] = P(Z_{p+t} = i, Z_{p+t+1} = j | y)``.
    """

    smoothed: NDArray[np.float64]
    pairwise: NDArray[np.float64]
    filtered: NDArray[np.float64]
    log_likelihood: float


def _posteriors(model: HmMarModel, X, target) -> Posteriors:
    logd = gaussian_logpdf(target[:, None], X @ model.coeffs.T, model.sigmas[None, :])
    P = np.ascontiguousarray(model.transition)
    filt, dens, scale, ll, bad = _kernels.forward(logd, P, np.ascontiguousarray(model.rho))
    if bad >= 0:
        raise NumericalUnderflow(model.p + int(bad))
    beta = _kernels.backward(dens, scale, P)
    gamma = filt * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    xi = filt[:-1, :, None] * P[None, :, :] * (dens[1:] * beta[1:])[:, None, :] / scale[1:, None, None]
    return Posteriors(smoothed=gamma, pairwise=xi, filtered=filt, log_likelihood=float(ll))


def forward_backward(model: HmMarModel, series: ArrayLike) -> Posteriors:
    """Scaled forward-backward pass over ``series`` (length >= p + 2)."""
    model.check()
    y = np.asarray(series, dtype=np.float64).reshape(-1)
    if y.shape[0] < model.p + 2:
        raise DimensionMismatch(f"need at least p + 2 = {model.p + 2} observations")
    if not np.all(np.isfinite(y)):
        bad = int(np.flatnonzero(~np.isfinite(y))[0])
        raise NumericalUnderflow(bad, "non-finite observation")
    X, target = design(y, model.p)
    return _posteriors(model, X, target)


def _m_step(model: HmMarModel, post: Posteriors, X, target, mode: Mode) -> HmMarModel:
    gamma, xi = post.smoothed, post.pairwise
    k, p = model.k, model.p
    coeffs = np.empty((k, p + 1))
    sigmas = np.empty(k)
    for h in range(k):
        w = gamma[:, h]
        mass = w.sum()
        if mass < MIN_MASS:
            raise DegenerateRegime(h, f"responsibility mass {mass:.3g} below {MIN_MASS:g}")
        A = X.T @ (w[:, None] * X)
        if np.linalg.cond(A) > MAX_COND:
            raise DegenerateRegime(h, "weighted normal equations are singular")
        b = np.linalg.solve(A, X.T @ (w * target))
        r = target - X @ b
        coeffs[h] = b
        sigmas[h] = max(math.sqrt(float(w @ (r * r)) / mass), SIGMA_FLOOR)

    counts = xi.sum(axis=0)
    if mode == "hmm":
        P = counts / counts.sum(axis=1, keepdims=True)
    elif mode == "iid":
        row = counts.sum(axis=0)
        P = np.tile(row / row.sum(), (k, 1))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    rho = gamma[0] / gamma[0].sum()
    return HmMarModel(k, p, coeffs, sigmas, P, rho)


def em_step(model: HmMarModel, series: ArrayLike, mode: Mode = "hmm") -> tuple[HmMarModel, float]:
    """One EM iteration.

    Returns the updated model and the log-likelihood of the *input* model.

    Raises
    ------
    DegenerateRegime
        If a regime carries negligible posterior mass or its weighted normal
        equations are singular.
    """
    post = forward_backward(model, series)
    X, target = design(series, model.p)
    return _m_step(model, post, X, target, mode), post.log_likelihood


@dataclass(frozen=True)
class FitConfig:
    k: int
    p: int
    mode: Mode = "hmm"
    max_iter: int = 500
    tol: float = 1e-8
    restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.p < 0:
            raise ValueError("need k >= 1 and p >= 0")
        if self.mode not in ("hmm", "iid"):
            raise ValueError(f"mode must be 'hmm' or 'iid', got {self.mode!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.restarts < 1 or self.max_iter < 1:
            raise ValueError("restarts and max_iter must be >= 1")


@dataclass(frozen=True, eq=False)
class EMRun:
    """Outcome of one EM run from a given starting model."""

    model: HmMarModel
    loglik_trace: list[float]
    converged: bool

    @property
    def log_likelihood(self) -> float:
        return self.loglik_trace[-1]


@dataclass(frozen=True, eq=False)
class FitResult:
    model: HmMarModel
    loglik_trace: list[float]
    smoothed: NDArray[np.float64]
    pairwise: NDArray[np.float64]
    converged: bool
    iterations_used: int
    restart_index: int
    restart_log_likelihoods: list[float | None] = field(default_factory=list)
    restart_failures: dict[int, str] = field(default_factory=dict)

    @property
    def log_likelihood(self) -> float:
        return self.loglik_trace[-1]

    def diagnostics(self) -> dict:
        return {
            "log_likelihood": self.log_likelihood,
            "loglik_trace": list(self.loglik_trace),
            "converged": self.converged,
            "iterations_used": self.iterations_used,
            "restart_index": self.restart_index,
            "restart_log_likelihoods": list(self.restart_log_likelihoods),
            "restart_failures": {str(k): v for k, v in self.restart_failures.items()},
        }

    def save(self, model_path, diagnostics_path=None) -> None:
        self.model.save(model_path)
        if diagnostics_path is not None:
            _io.atomic_write_text(diagnostics_path, _io.dumps(self.diagnostics()) + "\n")


class _Pooled:
    """Pooled conditional least-squares AR(p) fit used to seed EM."""

    def __init__(self, X, target):
        XtX = X.T @ X
        if np.linalg.cond(XtX) > MAX_COND:
            raise DegenerateRegime(-1, "pooled regressors are collinear (constant series?)")
        self.coef = np.linalg.solve(XtX, X.T @ target)
        resid = target - X @ self.coef
        rss = float(resid @ resid)
        dof = max(X.shape[0] - X.shape[1], 1)
        if rss / X.shape[0] < SIGMA_FLOOR**2:
            raise DegenerateRegime(-1, "pooled residual variance is zero")
        self.sigma = math.sqrt(rss / X.shape[0])
        self.se = np.sqrt(np.diag(np.linalg.inv(XtX)) * rss / dof)

    def perturbed(self, rng: np.random.Generator) -> NDArray[np.float64]:
        return self.coef + rng.normal(0.0, 0.25 * self.se)


def initial_model(pooled: _Pooled, k: int, p: int, mode: Mode, rng: np.random.Generator) -> HmMarModel:
    coeffs = np.stack([pooled.perturbed(rng) for _ in range(k)])
    sigmas = pooled.sigma * rng.uniform(0.5, 2.0, size=k)
    if mode == "hmm":
        P = 0.8 * np.eye(k) + 0.2 * rng.dirichlet(np.ones(k), size=k)
    else:
        P = np.tile(rng.dirichlet(np.full(k, 5.0)), (k, 1))
    P = P / P.sum(axis=1, keepdims=True)
    return HmMarModel(k, p, coeffs, sigmas, P, np.full(k, 1.0 / k))


def run_em(
    series: ArrayLike,
    init: HmMarModel,
    mode: Mode = "hmm",
    max_iter: int = 500,
    tol: float = 1e-8,
    reseed=None,
) -> EMRun:
    """Iterate EM from ``init`` until the log-likelihood gain drops below ``tol``.

    ``reseed(model, regime)`` may return a repaired model the first time a
    regime degenerates; a second degeneracy propagates ``DegenerateRegime``.
    """
    init.check()
    y = np.asarray(series, dtype=np.float64).reshape(-1)
    X, target = design(y, init.p)
    model = init
    trace: list[float] = []
    reseeded = False
    converged = False
    while len(trace) < max_iter:
        post = _posteriors(model, X, target)
        trace.append(post.log_likelihood)
        if len(trace) >= 2 and trace[-1] - trace[-2] < tol:
            converged = True
            break
        try:
            model = _m_step(model, post, X, target, mode)
        except DegenerateRegime as exc:
            if reseeded or reseed is None:
                raise
            reseeded = True
            model = reseed(model, exc.regime)
            # likelihood is not comparable across a reseed
            trace.clear()
    if not converged or not trace:
        # the last M-step produced a model that has not been scored yet
        trace.append(_posteriors(model, X, target).log_likelihood)
    return EMRun(model=model, loglik_trace=trace, converged=converged)


def canonical_order(model: HmMarModel) -> NDArray[np.int64]:
    """Regime order by ascending lag-1 coefficient, ties by ascending sigma.

    For ``p = 0`` the intercept takes the place of the lag-1 coefficient.
    """
    key = model.coeffs[:, 1] if model.p >= 1 else model.coeffs[:, 0]
    return np.lexsort((model.sigmas, key))


def permute(model: HmMarModel, perm: ArrayLike) -> HmMarModel:
    """Relabel regimes so that new regime ``i`` is old regime ``perm[i]``."""
    perm = np.asarray(perm)
    return model.replace(
        coeffs=model.coeffs[perm],
        sigmas=model.sigmas[perm],
        transition=model.transition[np.ix_(perm, perm)],
        rho=model.rho[perm],
    )


def fit(series: ArrayLike, config: FitConfig) -> FitResult:
    """Fit by EM from ``config.restarts`` seeded starts; keep the best.

    Raises
    ------
    InsufficientData
        If ``len(series) < (p + 1) * k + 5``.
    AllRestartsFailed
        If every restart ends in a degenerate regime.
    """
    y = np.asarray(series, dtype=np.float64).reshape(-1)
    k, p = config.k, config.p
    if y.shape[0] < (p + 1) * k + 5:
        raise InsufficientData(f"need at least (p + 1) * k + 5 = {(p + 1) * k + 5} observations, got {y.shape[0]}")
    X, target = design(y, p)

    seed64 = int(config.seed) & ((1 << 64) - 1)
    best: tuple[int, EMRun] | None = None
    failures: dict[int, str] = {}
    lls: list[float | None] = []
    for r in range(config.restarts):
        rng = np.random.default_rng([seed64, r])
        try:
            pooled = _Pooled(X, target)
            init = initial_model(pooled, k, p, config.mode, rng)

            def reseed(m: HmMarModel, h: int, pooled=pooled, rng=rng) -> HmMarModel:
                coeffs = np.array(m.coeffs)
                sigmas = np.array(m.sigmas)
                coeffs[h] = pooled.perturbed(rng)
                sigmas[h] = pooled.sigma
                P = np.array(m.transition)
                P[:, h] = np.maximum(P[:, h], 1.0 / (4 * k))
                P = P / P.sum(axis=1, keepdims=True)
                if config.mode == "iid":
                    P = np.tile(P[0], (k, 1))
                return HmMarModel(k, p, coeffs, sigmas, P, np.full(k, 1.0 / k))

            candidates = []
            errors = []
            try:
                candidates.append(run_em(y, init, config.mode, config.max_iter, config.tol, reseed))
            except (DegenerateRegime, NumericalUnderflow) as exc:
                errors.append(str(exc))
            if config.mode == "hmm" and k > 1:
                # second start: the tied-rows (iid) optimum from the same seed, then freed
                try:
                    iid_init = initial_model(pooled, k, p, "iid", np.random.default_rng([seed64, r]))
                    stage = run_em(y, iid_init, "iid", config.max_iter, config.tol)
                    candidates.append(run_em(y, stage.model, "hmm", config.max_iter, config.tol))
                except (DegenerateRegime, NumericalUnderflow) as exc:
                    errors.append(str(exc))
            if not candidates:
                raise DegenerateRegime(-1, " / ".join(errors))
            run = max(candidates, key=lambda c: c.log_likelihood)
        except (DegenerateRegime, NumericalUnderflow) as exc:
            failures[r] = str(exc)
            lls.append(None)
            continue
        lls.append(run.log_likelihood)
        if best is None or run.log_likelihood > best[1].log_likelihood:
            best = (r, run)

    if best is None:
        raise AllRestartsFailed([failures[r] for r in sorted(failures)])
    r, run = best
    model = permute(run.model, canonical_order(run.model))
    post = _posteriors(model, X, target)
    return FitResult(
        model=model,
        loglik_trace=list(run.loglik_trace),
        smoothed=post.smoothed,
        pairwise=post.pairwise,
        converged=run.converged,
        iterations_used=len(run.loglik_trace),
        restart_index=r,
        restart_log_likelihoods=lls,
        restart_failures=failures,
    )


def posterior_csv(result: FitResult) -> tuple[str, str]:
    """CSV text for ``smoothed`` (columns ``t, g0..``) and ``pairwise``."""
    k = result.model.k
    p = result.model.p
    g_lines = ["t," + ",".join(f"g{h}" for h in range(k))]
    for i, row in enumerate(result.smoothed):
        g_lines.append(f"{p + i}," + ",".join(_io.fmt(v) for v in row))
    x_lines = ["t," + ",".join(f"x{i}_{j}" for i in range(k) for j in range(k))]
    for i, mat in enumerate(result.pairwise):
        x_lines.append(f"{p + i}," + ",".join(_io.fmt(v) for v in mat.reshape(-1)))
    return "\n".join(g_lines) + "\n", "\n".join(x_lines) + "\n"
