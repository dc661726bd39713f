"""Moment stability of first-order HM-MAR models.

For ``Y_t = a0[Z_t] + a1[Z_t] Y_{t-1} + sigma[Z_t] eps_t`` with a stationary
chain, the mean, second moment and variance of ``Y_t`` have closed-form
limits or bounds driven by the diagonal matrices ``phi0 = diag(a0)``,
``phi1 = diag(a1)``, ``sigma = diag(sigma)`` and the transition matrix ``P``:

* ``E[prod_{t=2..n} a1[Z_t] | Z_1 = k]`` is entry ``k`` of ``(P phi1)^{n-1} 1``.
* ``lim E[Y_t] = mu' phi0 (I - P phi1)^{-1} 1`` when ``rho(P phi1) < 1``.
* ``lim E[Y_t^2] <= 2 ((1 + mu' phi0^2 1) / (1 - sqrt(lam)))^2
  + mu' sigma^2 (I - P phi1^2)^{-1} 1`` when ``lam < 1``, where
  ``lam = max_k (P phi1^2 1)_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from hmmar.errors import ConditionViolated, UnsupportedOrder
from hmmar.model import DerivedMatrices, HmMarModel, derive_matrices, spectral_radius
from hmmar.simulate import SimulationConfig, empirical_moments, simulate_ensemble

UNIT_BAND = 1e-12
COND_WARN = 1e12


def inside_unit_circle(radius: float) -> bool:
    """Strictly inside, with a 1e-12 indeterminate band around 1."""
    return radius < 1.0 - UNIT_BAND


def product_expectation_vector(P: ArrayLike, phi1: ArrayLike, n: int) -> NDArray[np.float64]:
    """``(P phi1)^{n-1} 1`` by repeated matrix-vector products."""
    if n < 2:
        raise ValueError("n must be >= 2")
    M = np.asarray(P, dtype=np.float64) @ np.asarray(phi1, dtype=np.float64)
    v = np.ones(M.shape[0])
    for _ in range(n - 1):
        v = M @ v
    return v


def weighted_product_expectation(P, phi0, phi1, mu, n: int) -> float:
    """``E[a0[Z_1] prod_{t=2..n} a1[Z_t]]`` for a chain started from ``mu``."""
    v = product_expectation_vector(P, phi1, n)
    return float(np.asarray(mu) @ np.asarray(phi0) @ v)


def _solve_ones(M: NDArray[np.float64], warnings: list[str] | None, label: str) -> NDArray[np.float64]:
    """Solve ``(I - M) x = 1``, noting ill-conditioning."""
    A = np.eye(M.shape[0]) - M
    cond = np.linalg.cond(A)
    if warnings is not None and cond > COND_WARN:
        warnings.append(f"I - {label} is ill-conditioned (cond = {cond:.3g})")
    return np.linalg.solve(A, np.ones(M.shape[0]))


def _matrices(model_or_dm) -> DerivedMatrices:
    if isinstance(model_or_dm, DerivedMatrices):
        if model_or_dm.phi1 is None:
            raise UnsupportedOrder("stability matrices need p = 1")
        return model_or_dm
    if model_or_dm.p != 1:
        raise UnsupportedOrder(f"stability analysis needs p = 1, got p = {model_or_dm.p}")
    return derive_matrices(model_or_dm, require_order_one=True)


def limiting_mean(model: HmMarModel | DerivedMatrices, warnings: list[str] | None = None) -> float:
    """``mu' phi0 (I - P phi1)^{-1} 1``.

    Raises
    ------
    ConditionViolated
        If the spectral radius of ``P phi1`` is not below 1.
    """
    dm = _matrices(model)
    M = dm.transition @ dm.phi1
    r = spectral_radius(M)
    if not inside_unit_circle(r):
        raise ConditionViolated("rho(P phi1) < 1", r)
    return float(dm.mu @ dm.phi0 @ _solve_ones(M, warnings, "P phi1"))


def second_moment_bound(model: HmMarModel | DerivedMatrices, warnings: list[str] | None = None) -> float:
    """Upper bound on ``lim E[Y_t^2]``; needs ``lam < 1`` and ``rho(P phi1^2) < 1``."""
    dm = _matrices(model)
    lam = dm.lam
    if not inside_unit_circle(lam):
        raise ConditionViolated("lambda < 1", lam)
    M2 = dm.transition @ dm.phi1 @ dm.phi1
    r2 = spectral_radius(M2)
    if not inside_unit_circle(r2):
        raise ConditionViolated("rho(P phi1^2) < 1", r2)
    c0 = float(dm.mu @ np.diag(dm.phi0) ** 2)
    intercept_part = 2.0 * ((1.0 + c0) / (1.0 - math.sqrt(lam))) ** 2
    noise_part = float(dm.mu @ dm.sigma_diag**2 @ _solve_ones(M2, warnings, "P phi1^2"))
    return intercept_part + noise_part


def variance_bound(model: HmMarModel | DerivedMatrices, warnings: list[str] | None = None) -> float:
    """Second-moment bound minus the squared limiting mean."""
    dm = _matrices(model)
    m = limiting_mean(dm, warnings)
    return second_moment_bound(dm, warnings) - m * m


@dataclass(frozen=True, eq=False)
class StabilityReport:
    mu: NDArray[np.float64]
    rho_Pphi1: float
    rho_Pphi1sq: float
    rho_Pphi1abs: float
    lam: float
    mean_limit: float | None
    second_moment_bound: float | None
    variance_bound: float | None
    theorem1_applicable: bool
    theorem2_applicable: bool
    theorem3_applicable: bool
    reasons: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def flags(self) -> dict[str, bool]:
        return {
            "theorem1_applicable": self.theorem1_applicable,
            "theorem2_applicable": self.theorem2_applicable,
            "theorem3_applicable": self.theorem3_applicable,
        }

    def verdict(self) -> str:
        b = lambda x: "true" if x else "false"  # noqa: E731
        return f"T1={b(self.theorem1_applicable)} T2={b(self.theorem2_applicable)} T3={b(self.theorem3_applicable)}"

    def to_dict(self) -> dict:
        def bound(name):
            value = getattr(self, name)
            if value is None:
                return {"value": None, "reason": self.reasons.get(name, "not applicable")}
            return {"value": value, "reason": None}

        return {
            "mu": self.mu.tolist(),
            "rho_Pphi1": self.rho_Pphi1,
            "rho_Pphi1sq": self.rho_Pphi1sq,
            "rho_Pphi1abs": self.rho_Pphi1abs,
            "lambda": self.lam,
            "mean_limit": bound("mean_limit"),
            "second_moment_bound": bound("second_moment_bound"),
            "variance_bound": bound("variance_bound"),
            "flags": self.flags,
            "warnings": list(self.warnings),
        }


def _describe(name: str, value: float) -> str:
    if abs(value - 1.0) <= UNIT_BAND:
        return f"{name} = {value:.17g} is within 1e-12 of 1 (boundary, indeterminate)"
    return f"{name} = {value:.17g} is not below 1"


def analyze(model: HmMarModel) -> StabilityReport:
    """Evaluate every stability condition and the limits/bounds they certify.

    Theorem flags: T1 needs ``rho(P phi1) < 1`` and ``rho(P phi1^2) < 1``;
    T2 additionally ``lam < 1``; T3 additionally ``rho(P |phi1|) < 1``.
    """
    if model.p != 1:
        raise UnsupportedOrder(f"stability analysis needs p = 1, got p = {model.p}")
    dm = derive_matrices(model, require_order_one=True)
    P = dm.transition
    r1 = spectral_radius(P @ dm.phi1)
    r2 = spectral_radius(P @ dm.phi1 @ dm.phi1)
    rabs = spectral_radius(P @ dm.phi1_abs)
    lam = dm.lam

    ok1, ok2, okabs, oklam = (inside_unit_circle(v) for v in (r1, r2, rabs, lam))
    t1 = ok1 and ok2
    t2 = t1 and oklam
    t3 = t2 and okabs

    warnings: list[str] = []
    reasons: dict[str, str] = {}
    mean = smb = vb = None
    if ok1:
        mean = limiting_mean(dm, warnings)
    else:
        reasons["mean_limit"] = _describe("rho(P phi1)", r1)
    if oklam and ok2:
        smb = second_moment_bound(dm, warnings)
    else:
        reasons["second_moment_bound"] = _describe("lambda", lam) if not oklam else _describe("rho(P phi1^2)", r2)
    if mean is not None and smb is not None:
        vb = smb - mean * mean
    else:
        reasons["variance_bound"] = "needs both the limiting mean and the second-moment bound"

    return StabilityReport(
        mu=dm.mu,
        rho_Pphi1=r1,
        rho_Pphi1sq=r2,
        rho_Pphi1abs=rabs,
        lam=lam,
        mean_limit=mean,
        second_moment_bound=smb,
        variance_bound=vb,
        theorem1_applicable=t1,
        theorem2_applicable=t2,
        theorem3_applicable=t3,
        reasons=reasons,
        warnings=sorted(set(warnings)),
    )


@dataclass(frozen=True)
class MonteCarloCheck:
    """Ensemble tail moments compared with the closed-form limit and bounds."""

    tail_mean: float
    tail_mean_se: float
    tail_second_moment: float
    tail_variance: float
    mean_limit: float | None
    second_moment_bound: float | None
    variance_bound: float | None

    @property
    def mean_ok(self) -> bool | None:
        if self.mean_limit is None:
            return None
        return abs(self.tail_mean - self.mean_limit) <= 3.0 * self.tail_mean_se

    @property
    def bounds_ok(self) -> bool | None:
        if self.second_moment_bound is None:
            return None
        ok = self.tail_second_moment <= self.second_moment_bound
        if self.variance_bound is not None:
            ok = ok and self.tail_variance <= self.variance_bound
        return ok


def monte_carlo_check(
    model: HmMarModel,
    replicates: int = 10_000,
    n: int = 500,
    tail: int = 50,
    seed: int = 20240601,
) -> MonteCarloCheck:
    """Simulate an ensemble started from the invariant measure and compare.

    The chain is started from ``mu`` (not ``model.rho``) and ``Y_0 = 0``,
    which is independent of the chain.
    """
    report = analyze(model)
    stationary = model.replace(rho=report.mu)
    ens = simulate_ensemble(stationary, SimulationConfig(n=n, seed=seed), replicates)
    mom = empirical_moments(ens.y[:, model.p :], tail=tail)
    return MonteCarloCheck(
        tail_mean=mom.tail_mean,
        tail_mean_se=mom.tail_mean_se,
        tail_second_moment=mom.tail_second_moment,
        tail_variance=mom.tail_var,
        mean_limit=report.mean_limit,
        second_moment_bound=report.second_moment_bound,
        variance_bound=report.variance_bound,
    )
