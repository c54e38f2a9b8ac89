"""
Simulating a GARCH(1,1) path and recovering its parameters
==========================================================

Draw a series from a stationary GARCH(1,1), fit it by quasi-maximum
likelihood and compare the estimate with the truth.
"""

import numpy as np

from causalsel import ModelFamily, ModelSpec, fit, hat_moments, simulate

spec = ModelSpec(ModelFamily.GARCH(1, 1))
truth = spec.param([0.1, 0.2, 0.5])  # omega, a1, b1

# 20000 observations after the default 1000-step burn-in
traj = simulate(spec, truth, 20_000, seed=42)
print("sample variance", traj.values.var(), "(stationary value", 0.1 / (1 - 0.2 - 0.5), ")")

res = fit(spec, traj)
for name, est, true in zip(spec.family.coord_names, res.theta_hat.values, truth.values):
    print(f"{name:>6}  estimate {est:.4f}  truth {true:.4f}")
print("converged:", res.converged, " evaluations:", res.n_evals)

# the standardised error that the LIL diagnostics track
print("sqrt(n / log log n) * |theta_hat - theta*| =", res.lil_statistic(truth))

# zero-past conditional variances at the estimate
h = hat_moments(spec, res.theta_hat, traj).h_hat
print("first conditional variances", np.round(h[:5], 4))
