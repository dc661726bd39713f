"""Seeded simulation of HM-MAR sample paths and ensemble moment summaries.

Random source
-------------
Every path uses two independent Philox4x64 streams (numpy's counter-based
generator, stable across platforms and numpy versions).  The 128-bit
Philox key is ``seed + (stream_tag << 64)`` with ``CHAIN_STREAM = 1`` for
the latent chain and ``NOISE_STREAM = 2`` for the innovations, so the two
never overlap and the regime path does not depend on the noise seed.

Raw 64-bit words become uniforms on the open interval (0, 1) as
``((w >> 11) + 0.5) * 2**-53``.  Innovations are obtained by inverting the
normal distribution function: a ``ndtri`` starting point refined by Newton
steps on :func:`hmmar.filtering.gaussian_cdf` until the step is below
``1e-14`` (relative to ``max(1, |x|)``).

Ensembles use per-replicate seeds ``(seed + r) mod 2**64``, and replicate
``r`` of :func:`simulate_ensemble` is bit-identical to :func:`simulate`
called with that seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from hmmar import _io
from hmmar.errors import DimensionMismatch, InvalidSeries
from hmmar.filtering import gaussian_cdf
from hmmar.model import HmMarModel

CHAIN_STREAM = 1
NOISE_STREAM = 2
NEWTON_TOL = 1e-14
_MASK64 = (1 << 64) - 1


def _bit_generator(seed: int, stream: int) -> np.random.Philox:
    return np.random.Philox(key=(int(seed) & _MASK64) | (stream << 64))


def uniforms(seed: int, stream: int, size: int) -> NDArray[np.float64]:
    """``size`` uniforms on (0, 1) from the given substream."""
    raw = _bit_generator(seed, stream).random_raw(size)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normal_quantile(u: ArrayLike) -> NDArray[np.float64]:
    """Inverse standard normal distribution function on (0, 1)."""
    u = np.asarray(u, dtype=np.float64)
    # work in the lower tail where Phi has full relative precision
    q = np.minimum(u, 1.0 - u)
    x = special.ndtri(q)
    for _ in range(8):
        pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        step = (gaussian_cdf(x) - q) / pdf
        x = x - step
        if np.all(np.abs(step) <= NEWTON_TOL * np.maximum(1.0, np.abs(x))):
            break
    return np.where(u > 0.5, -x, x)


def standard_normals(seed: int, size: int) -> NDArray[np.float64]:
    return normal_quantile(uniforms(seed, NOISE_STREAM, size))


@dataclass(frozen=True)
class SimulationConfig:
    """Settings for :func:`simulate`.

    ``initial_regime`` is ``None`` to draw ``Z_p`` from ``rho``, otherwise a
    fixed regime index.  ``noise_seed`` overrides the seed of the noise
    substream only (defaults to ``seed``).
    """

    n: int
    seed: int = 0
    initial_lags: tuple[float, ...] | None = None
    initial_regime: int | None = None
    emit_latent: bool = False
    noise_seed: int | None = None

    def check(self, model: HmMarModel) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.initial_regime is not None and not 0 <= self.initial_regime < model.k:
            raise ValueError(f"initial_regime {self.initial_regime} outside [0, {model.k})")
        if self.initial_lags is not None and len(self.initial_lags) != model.p:
            raise DimensionMismatch(f"expected {model.p} initial lags, got {len(self.initial_lags)}")


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """Simulated series ``y`` (prefix included, length ``p + n``) and regimes.

    ``z[i]`` is the regime of ``y[p + i]``; it is ``None`` unless requested.
    """

    y: NDArray[np.float64]
    z: NDArray[np.int64] | None = None
    p: int = 0

    @property
    def observations(self) -> NDArray[np.float64]:
        """The ``n`` simulated values after the prefix."""
        return self.y[self.p :]


def _regime_paths(model: HmMarModel, u: NDArray[np.float64], initial_regime) -> NDArray[np.int64]:
    """Latent paths from chain uniforms ``u`` of shape (R, n)."""
    R, n = u.shape
    k = model.k
    cum_rho = np.cumsum(model.rho)
    cum_P = np.cumsum(model.transition, axis=1)
    z = np.empty((R, n), dtype=np.int64)
    if initial_regime is None:
        z[:, 0] = np.minimum(np.searchsorted(cum_rho, u[:, 0], side="right"), k - 1)
    else:
        z[:, 0] = initial_regime
    for t in range(1, n):
        rows = cum_P[z[:, t - 1]]
        z[:, t] = np.minimum((rows <= u[:, t, None]).sum(axis=1), k - 1)
    return z


def _ar_paths(model: HmMarModel, z, eps, prefix) -> NDArray[np.float64]:
    R, n = z.shape
    p = model.p
    y = np.empty((R, p + n))
    y[:, :p] = prefix
    a = model.coeffs
    s = model.sigmas
    for i in range(n):
        t = p + i
        zt = z[:, i]
        acc = a[zt, 0]
        for j in range(1, p + 1):
            acc = acc + a[zt, j] * y[:, t - j]
        y[:, t] = acc + s[zt] * eps[:, i]
    return y


def _simulate_block(model: HmMarModel, config: SimulationConfig, seeds) -> tuple:
    model.check()
    config.check(model)
    n = config.n
    if config.noise_seed is None:
        noise_seeds = seeds
    else:
        noise_seeds = [(int(config.noise_seed) + r) & _MASK64 for r in range(len(seeds))]
    u = np.stack([uniforms(s, CHAIN_STREAM, n) for s in seeds])
    eps = np.stack([standard_normals(s, n) for s in noise_seeds])
    z = _regime_paths(model, u, config.initial_regime)
    prefix = np.zeros(model.p) if config.initial_lags is None else np.asarray(config.initial_lags, dtype=np.float64)
    return _ar_paths(model, z, eps, prefix), z


def simulate(model: HmMarModel, config: SimulationConfig) -> SimulationResult:
    """Draw one sample path.

    ``y_t = a_0 + sum_i a_i y_{t-i} + sigma * eps_t`` with the coefficients of
    the regime ``Z_t``; the chain starts at index ``p`` and the prefix
    ``y_0..y_{p-1}`` is ``config.initial_lags`` (zeros by default).
    """
    y, z = _simulate_block(model, config, [int(config.seed) & _MASK64])
    return SimulationResult(y=y[0], z=z[0] if config.emit_latent else None, p=model.p)


def simulate_ensemble(model: HmMarModel, config: SimulationConfig, replicates: int) -> SimulationResult:
    """``replicates`` independent paths stacked row-wise (shape (R, p + n))."""
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    seeds = [(int(config.seed) + r) & _MASK64 for r in range(replicates)]
    y, z = _simulate_block(model, config, seeds)
    return SimulationResult(y=y, z=z if config.emit_latent else None, p=model.p)


@dataclass(frozen=True, eq=False)
class EnsembleMoments:
    """Cross-sectional moments of an (R, n) ensemble.

    Variances use the population convention (divisor ``R``).  Tail averages
    run over the last ``tail`` time indices.
    """

    mean: NDArray[np.float64]
    var: NDArray[np.float64]
    second_moment: NDArray[np.float64]
    replicates: int
    tail: int
    tail_mean: float = field(init=False)
    tail_var: float = field(init=False)
    tail_second_moment: float = field(init=False)

    def __post_init__(self):
        w = slice(-self.tail, None)
        object.__setattr__(self, "tail_mean", float(np.mean(self.mean[w])))
        object.__setattr__(self, "tail_var", float(np.mean(self.var[w])))
        object.__setattr__(self, "tail_second_moment", float(np.mean(self.second_moment[w])))

    @property
    def tail_mean_se(self) -> float:
        """Monte Carlo standard error of ``tail_mean``: ensemble sd over sqrt(R)."""
        return math.sqrt(self.tail_var / self.replicates)


def empirical_moments(ensemble: ArrayLike, tail: int | None = None) -> EnsembleMoments:
    """Per-time mean and variance across replicates plus tail averages.

    The default tail window is the last ``max(10, n // 10)`` indices.
    """
    x = np.asarray(ensemble, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DimensionMismatch("ensemble must be a 2-D array with at least 2 replicates")
    n = x.shape[1]
    if tail is None:
        tail = max(10, n // 10)
    tail = min(tail, n)
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    return EnsembleMoments(mean=mean, var=var, second_moment=(x * x).mean(axis=0), replicates=x.shape[0], tail=tail)


# CSV interface


def series_csv(y: ArrayLike, z: ArrayLike | None = None) -> str:
    y = np.asarray(y, dtype=np.float64)
    if z is None:
        lines = ["y"] + [_io.fmt(v) for v in y]
    else:
        lines = ["y,z"] + [f"{_io.fmt(v)},{int(r)}" for v, r in zip(y, z)]
    return "\n".join(lines) + "\n"


def write_series_csv(path, y, z=None) -> None:
    _io.atomic_write_text(path, series_csv(y, z))


def read_series_csv(path) -> NDArray[np.float64]:
    """Read the ``y`` column of a series file (header required)."""
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise InvalidSeries(f"{path}: empty series file")
    header = [h.strip() for h in lines[0].split(",")]
    if "y" not in header:
        raise InvalidSeries(f"{path}: missing 'y' column")
    col = header.index("y")
    try:
        return np.array([float(ln.split(",")[col]) for ln in lines[1:]], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise InvalidSeries(f"{path}: malformed row ({exc})") from exc
