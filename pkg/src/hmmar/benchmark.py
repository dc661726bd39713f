"""Forecast-error comparison of fitted HM-MAR and MAR models on simulated data.

Each replicate simulates a series from a true model, fits the same
``(k, p)`` in ``hmm`` and ``iid`` mode, and scores both fits by the total
absolute one-step-ahead error of their rolling in-sample forecasts.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from hmmar import _io
from hmmar.errors import HmMarError
from hmmar.estimation import FitConfig, fit
from hmmar.filtering import rolling_forecast
from hmmar.model import HmMarModel
from hmmar.simulate import SimulationConfig, simulate

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ReplicateOutcome:
    index: int
    seed: int
    hmm_error: float | None
    iid_error: float | None
    failure: str | None = None


@dataclass(frozen=True, eq=False)
class BenchmarkResult:
    """Per-replicate totals; failed replicates keep a NaN row and a reason.

    Attributes
    ----------
    replicate_errors : ndarray, shape (R, 2)
        Columns are HM-MAR and MAR total absolute errors.
    failures : dict
        Replicate index to failure message.
    """

    replicate_errors: NDArray[np.float64]
    seeds: list[int]
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def replicates(self) -> int:
        return self.replicate_errors.shape[0]

    @property
    def wins(self) -> int:
        e = self.replicate_errors
        ok = np.all(np.isfinite(e), axis=1)
        return int(np.sum(e[ok, 0] < e[ok, 1]))

    def summary(self) -> dict[str, dict[str, float]]:
        ok = np.all(np.isfinite(self.replicate_errors), axis=1)
        e = self.replicate_errors[ok]
        out = {}
        for j, name in enumerate(("hmm", "iid")):
            col = e[:, j]
            out[name] = {
                "mean": float(col.mean()) if col.size else float("nan"),
                "std": float(col.std(ddof=1)) if col.size > 1 else float("nan"),
            }
        return out

    def to_csv(self) -> str:
        lines = ["replicate,seed,hmm_total_abs_error,iid_total_abs_error,status"]
        for i, (row, s) in enumerate(zip(self.replicate_errors, self.seeds)):
            status = "ok" if i not in self.failures else "failed: " + self.failures[i].replace(",", ";").replace("\n", " ")
            cells = ["" if not np.isfinite(v) else _io.fmt(v) for v in row]
            lines.append(f"{i},{s},{cells[0]},{cells[1]},{status}")
        summ = self.summary()
        lines.append(f"# wins={self.wins} of {self.replicates}")
        for name in ("hmm", "iid"):
            lines.append(f"# {name} mean={_io.fmt(summ[name]['mean'])} std={_io.fmt(summ[name]['std'])}")
        return "\n".join(lines) + "\n"


def thread_count() -> int:
    """Worker cap from ``HMMAR_THREADS``, defaulting to the CPU count."""
    raw = os.environ.get("HMMAR_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"HMMAR_THREADS must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"HMMAR_THREADS must be a positive integer, got {raw!r}")
        return n
    return os.cpu_count() or 1


def run_replicate(true_model: HmMarModel, n: int, seed: int, restarts: int = 10, index: int = 0) -> ReplicateOutcome:
    """Simulate ``n`` observations with ``seed``, fit both modes, score them."""
    try:
        y = simulate(true_model, SimulationConfig(n=n, seed=seed)).observations
        errors = []
        for mode in ("hmm", "iid"):
            res = fit(y, FitConfig(k=true_model.k, p=true_model.p, mode=mode, restarts=restarts, seed=seed))
            errors.append(rolling_forecast(res.model, y).total_abs_error)
    except HmMarError as exc:
        return ReplicateOutcome(index, seed, None, None, f"{type(exc).__name__}: {exc}")
    return ReplicateOutcome(index, seed, errors[0], errors[1])


def run_benchmark(
    true_model: HmMarModel,
    replicates: int = 10,
    n: int = 100,
    seed: int = 0,
    restarts: int = 10,
    threads: int | None = None,
) -> BenchmarkResult:
    """Replicate ``r`` uses seed ``seed + r`` for both simulation and fitting."""
    if replicates < 1 or n < 1:
        raise ValueError("replicates and n must be >= 1")
    true_model.check()
    seeds = [(seed + r) & MASK64 for r in range(replicates)]
    workers = min(threads or thread_count(), replicates)

    def job(r: int) -> ReplicateOutcome:
        return run_replicate(true_model, n, seeds[r], restarts, r)

    if workers == 1:
        outcomes = [job(r) for r in range(replicates)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(job, range(replicates)))

    errors = np.full((replicates, 2), np.nan)
    failures = {}
    for o in outcomes:
        if o.failure is not None:
            failures[o.index] = o.failure
        else:
            errors[o.index] = (o.hmm_error, o.iid_error)
    return BenchmarkResult(errors, seeds, failures)
