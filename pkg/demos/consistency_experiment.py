"""
A small consistency experiment
==============================

Repeat selection over nested sample sizes and watch the frequency of the
true order grow, then ask whether the LIL-scaled error stays flat.
Set CAUSALSEL_WORKERS to use several processes.
"""

import math

from causalsel import AIC, BIC, ExperimentConfig, ModelFamily, ModelSpec, build_collection, lil_summary, run_experiment

truth = ModelSpec(ModelFamily.AR(1))
cfg = ExperimentConfig(
    truth=truth,
    theta_star=truth.param([0.8, 1.0]),
    collection=tuple(build_collection(ModelFamily.AR(3))),
    penalties=(BIC(), AIC()),
    n_grid=(250, 1000, 4000),
    replications=40,
    master_seed=3,
)
report = run_experiment(cfg)

# P(m_hat = m*) per penalty along the grid
for p, pen in enumerate(cfg.penalties):
    print(pen.to_string(), report.prob_true()[p].round(3).tolist())

# AIC's constant penalty keeps overfitting at every n
print("overfit frequency (BIC, AIC):", report.overfit_frequency().round(3).tolist())

s = lil_summary(report)
print("median s_n:", s.medians.round(3).tolist(), "->", s.verdict)

# the same errors scaled too aggressively grow without bound
fast = lil_summary(report, normalization=lambda n: n / math.log(math.log(n)))
print("n/loglog n scaling:", fast.medians.round(1).tolist(), "->", fast.verdict)
