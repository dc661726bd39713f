"""Simulate the shipped two-regime AR(2) model and forecast it one step ahead.

The forward filter turns the past into regime weights; the forecast is the
weighted mixture of the two regime predictions.
"""

import numpy as np

from hmmar import SimulationConfig, rolling_forecast, shipped_model, simulate

model = shipped_model()
sim = simulate(model, SimulationConfig(n=100, seed=1, emit_latent=True))
rf = rolling_forecast(model, sim.y)

print(f"model: K={model.k}, p={model.p}")
print(f"log-likelihood of the simulated path: {rf.log_likelihood:.4f}")
print(" t  regime  P(regime 0)  forecast  observed")
for i in range(5):
    t = rf.t[i]
    print(f"{t:2d}  {sim.z[t]:6d}  {rf.weights[i, 0]:11.4f}  {rf.mean[i]:8.4f}  {rf.y[i]:8.4f}")
print(f"total absolute error over {rf.t.size} forecasts: {rf.total_abs_error:.4f}")

# With identical rows the latent chain forgets its past: the weights never move.
row = model.transition[0]
tied = model.replace(transition=np.tile(row, (2, 1)), rho=row)
flat = rolling_forecast(tied, sim.y).weights
print("identical-row weights constant:", bool(np.all(flat == row)))
