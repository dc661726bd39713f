"""Fit the Markov-switching model and its iid-mixture special case by EM.

The iid fit ties every transition row together, so its maximized
log-likelihood can never exceed the Markov fit on the same data.
"""

import numpy as np

from hmmar import FitConfig, SimulationConfig, fit, rolling_forecast, shipped_model, simulate

truth = shipped_model()
y = simulate(truth, SimulationConfig(n=300, seed=7)).y

np.set_printoptions(precision=3, suppress=True)
print("true coefficients (intercept, lag 1, lag 2):")
print(truth.coeffs)
for mode in ("hmm", "iid"):
    res = fit(y, FitConfig(k=2, p=2, mode=mode, seed=0))
    err = rolling_forecast(res.model, y).total_abs_error
    print(f"\n[{mode}] log-likelihood {res.log_likelihood:.3f} after {res.iterations_used} iterations")
    print("coefficients:")
    print(res.model.coeffs)
    print("transition:")
    print(res.model.transition)
    print(f"in-sample total absolute forecast error {err:.3f}")
