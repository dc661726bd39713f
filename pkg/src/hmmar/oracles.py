"""Brute-force reference computations for small instances.

Everything here is deliberately naive: latent paths are enumerated
explicitly and the forward recursion is run on unnormalised joint
densities in 50-digit arithmetic.  These routines share no code with the
production paths they check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import mpmath
import numpy as np

from hmmar.model import HmMarModel

DPS = 50


def enumerate_product_expectation(P, a1, n: int) -> np.ndarray:
    """``E[prod_{t=2..n} a1[Z_t] | Z_1 = k]`` for each ``k`` by path enumeration.

    Every one of the ``K^(n-1)`` continuations is listed explicitly; numpy
    only vectorises the per-path products.
    """
    P = np.asarray(P, dtype=float)
    a1 = np.asarray(a1, dtype=float)
    K = P.shape[0]
    paths = np.array(list(itertools.product(range(K), repeat=n - 1)), dtype=np.intp)
    out = np.zeros(K)
    for k in range(K):
        prob = P[k, paths[:, 0]].copy()
        for i in range(1, n - 1):
            prob *= P[paths[:, i - 1], paths[:, i]]
        out[k] = float(np.sum(prob * np.prod(a1[paths], axis=1)))
    return out


def enumerate_weighted_product(P, a0, a1, mu, n: int) -> float:
    """``E[a0[Z_1] prod_{t=2..n} a1[Z_t]]`` with ``Z_1 ~ mu``, by enumeration."""
    cond = enumerate_product_expectation(P, a1, n)
    return float(sum(mu[k] * a0[k] * cond[k] for k in range(len(mu))))


def _mp_density(y, mean, sigma):
    z = (y - mean) / sigma
    return mpmath.exp(-z * z / 2) / (sigma * mpmath.sqrt(2 * mpmath.pi))


def _mp_means(model: HmMarModel, y, t):
    means = []
    for h in range(model.k):
        m = mpmath.mpf(float(model.coeffs[h, 0]))
        for i in range(1, model.p + 1):
            m += mpmath.mpf(float(model.coeffs[h, i])) * y[t - i]
        means.append(m)
    return means


def unscaled_weights(model: HmMarModel, series) -> list[np.ndarray]:
    """Predictive weights ``P(Z_t = h | y_0..y_{t-1})`` for ``t = p..n``.

    Runs the joint-density recursion
    ``F_t(h) = sum_m F_{t-1}(m) P[m, h] f_h(y_t)`` with ``F_p(h) = rho_h f_h(y_p)``
    and takes ``alpha(t+1) = F_t P / sum F_t``, all without normalisation.
    """
    with mpmath.workdps(DPS):
        y = [mpmath.mpf(float(v)) for v in series]
        K, p = model.k, model.p
        P = [[mpmath.mpf(float(model.transition[i, j])) for j in range(K)] for i in range(K)]
        sig = [mpmath.mpf(float(s)) for s in model.sigmas]
        weights = [np.array([float(r) for r in model.rho])]
        F = None
        for t in range(p, len(y)):
            means = _mp_means(model, y, t)
            dens = [_mp_density(y[t], means[h], sig[h]) for h in range(K)]
            if F is None:
                F = [mpmath.mpf(float(model.rho[h])) * dens[h] for h in range(K)]
            else:
                F = [sum(F[m] * P[m][h] for m in range(K)) * dens[h] for h in range(K)]
            total = sum(F)
            weights.append(np.array([float(sum(F[m] * P[m][h] for m in range(K)) / total) for h in range(K)]))
        return weights


def path_sum_likelihood(model: HmMarModel, series) -> float:
    """Joint density of ``y_p..y_{n-1}`` given the prefix, summed over all paths."""
    with mpmath.workdps(DPS):
        return float(_path_terms(model, series)[1])


def _path_terms(model: HmMarModel, series):
    y = [mpmath.mpf(float(v)) for v in series]
    K, p = model.k, model.p
    T = len(y) - p
    dens = []
    for t in range(p, len(y)):
        means = _mp_means(model, y, t)
        dens.append([_mp_density(y[t], means[h], mpmath.mpf(float(model.sigmas[h]))) for h in range(K)])
    terms = {}
    total = mpmath.mpf(0)
    for path in itertools.product(range(K), repeat=T):
        w = mpmath.mpf(float(model.rho[path[0]])) * dens[0][path[0]]
        for t in range(1, T):
            w *= mpmath.mpf(float(model.transition[path[t - 1], path[t]])) * dens[t][path[t]]
        terms[path] = w
        total += w
    return terms, total


def enumerate_posteriors(model: HmMarModel, series) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed ``gamma`` (T, K) and pairwise ``xi`` (T-1, K, K) by enumeration."""
    with mpmath.workdps(DPS):
        terms, total = _path_terms(model, series)
        K = model.k
        T = len(series) - model.p
        gamma = [[mpmath.mpf(0)] * K for _ in range(T)]
        xi = [[[mpmath.mpf(0)] * K for _ in range(K)] for _ in range(T - 1)]
        for path, w in terms.items():
            for t in range(T):
                gamma[t][path[t]] += w
            for t in range(T - 1):
                xi[t][path[t]][path[t + 1]] += w
        g = np.array([[float(v / total) for v in row] for row in gamma])
        x = np.array([[[float(v / total) for v in r] for r in mat] for mat in xi]).reshape(T - 1, K, K)
        return g, x


def random_model(rng: np.random.Generator, k: int, p: int = 1) -> HmMarModel:
    """A random valid model with strictly positive transition entries."""
    P = rng.dirichlet(np.ones(k), size=k) * 0.9 + 0.1 / k
    P = P / P.sum(axis=1, keepdims=True)
    coeffs = np.column_stack([rng.uniform(-2, 2, k)] + [rng.uniform(-1.2, 1.2, k) for _ in range(p)])
    rho = rng.dirichlet(np.ones(k))
    return HmMarModel(k, p, coeffs, rng.uniform(0.5, 1.5, k), P, rho)


@dataclass(frozen=True)
class OracleCheck:
    name: str
    max_abs_dev: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_abs_dev <= self.tolerance)


def run_oracle_suite(
    max_k: int = 3,
    max_n: int = 12,
    models: int = 50,
    seed: int = 0,
    inject_fault: bool = False,
    tolerance: float = 1e-9,
) -> list[OracleCheck]:
    """Compare closed forms and the scaled filter against brute force.

    ``inject_fault`` flips the sign of the lag-1 coefficients fed to the
    closed-form route only, which every product check must detect.
    """
    from hmmar.filtering import filter_series
    from hmmar.model import stationary_distribution
    from hmmar.stability import product_expectation_vector, weighted_product_expectation

    if not 1 <= max_k <= 3:
        raise ValueError(f"k must be in [1, 3] (got {max_k})")
    if not 2 <= max_n <= 12:
        raise ValueError(f"n must be in [2, 12] (got {max_n})")
    rng = np.random.default_rng(seed)
    lemma1 = lemma2 = 0.0
    n_prod = min(max_n, 8)
    ks = [k for k in (2, 3) if k <= max_k] or [1]
    for k in ks:
        for _ in range(models):
            m = random_model(rng, k)
            a0, a1 = m.coeffs[:, 0], m.coeffs[:, 1]
            mu = stationary_distribution(m.transition)
            a1_closed = -a1 if inject_fault else a1
            for n in range(2, n_prod + 1):
                brute = enumerate_product_expectation(m.transition, a1, n)
                closed = product_expectation_vector(m.transition, np.diag(a1_closed), n)
                lemma1 = max(lemma1, float(np.max(np.abs(brute - closed))))
                wb = enumerate_weighted_product(m.transition, a0, a1, mu, n)
                wc = weighted_product_expectation(m.transition, np.diag(a0), np.diag(a1_closed), mu, n)
                lemma2 = max(lemma2, abs(wb - wc))

    filt_dev = 0.0
    lik_dev = 0.0
    frng = np.random.default_rng(seed + 1)
    for k in ks:
        for p in (1, 2):
            for _ in range(5):
                m = random_model(frng, k, p)
                y = frng.normal(0.0, 1.5, size=max_n)
                states = filter_series(m, y)
                ref = unscaled_weights(m, y)
                for st, w in zip(states, ref):
                    filt_dev = max(filt_dev, float(np.max(np.abs(st.alpha_predictive - w))))
                n_lik = min(max_n, p + (6 if k == 3 else 8))
                lik = path_sum_likelihood(m, y[:n_lik])
                got = np.exp(filter_series(m, y[:n_lik])[-1].log_likelihood)
                lik_dev = max(lik_dev, float(abs(got - lik) / lik))
    return [
        OracleCheck("product_expectation (path enumeration)", lemma1, tolerance),
        OracleCheck("weighted_product_expectation (path enumeration)", lemma2, tolerance),
        OracleCheck("forward weights (unscaled recursion)", filt_dev, tolerance),
        OracleCheck("likelihood (path sum, relative)", lik_dev, 1e-8),
    ]


def geometric_series_mean(P, a0, a1, mu, tail_tol: float = 1e-12) -> float:
    """``sum_{m>=0} mu' phi0 (P phi1)^m 1`` truncated once ``r^(M+1) / (1 - r) < tail_tol``.

    ``r`` is the spectral radius of ``P phi1``, found from the modulus of the
    roots of its characteristic polynomial.
    """
    M = np.asarray(P, dtype=float) * np.asarray(a1, dtype=float)[None, :]
    r = float(np.max(np.abs(np.roots(np.poly(M)))))
    if r >= 1.0:
        raise ValueError(f"series diverges: spectral radius {r}")
    terms = 0
    while r ** (terms + 1) / (1.0 - r) >= tail_tol:
        terms += 1
    w = np.asarray(mu, dtype=float) * np.asarray(a0, dtype=float)
    v = np.ones(M.shape[0])
    total = 0.0
    for _ in range(terms + 1):
        total += float(w @ v)
        v = M @ v
    return total
