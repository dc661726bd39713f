"""Compare forecast error of the Markov and iid fits over seeded replicates.

Each replicate simulates a fresh series, fits both models and scores
their one-step forecasts.  Set HMMAR_THREADS to bound the worker pool.
"""

from hmmar import shipped_model
from hmmar.benchmark import run_benchmark

res = run_benchmark(shipped_model(), replicates=5, n=100, seed=0, restarts=5)
print(res.to_csv(), end="")
s = res.summary()
print(f"Markov fit wins {res.wins} of {res.replicates}")
print(f"mean error: hmm {s['hmm']['mean']:.3f}, iid {s['iid']['mean']:.3f}")
