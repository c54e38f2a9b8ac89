"""
Choosing an autoregressive order with BIC and AIC
=================================================

Fit every model of a hierarchical AR collection to one series and compare
the penalised contrasts under two penalties.
"""

from causalsel import AIC, BIC, ModelFamily, ModelSpec, build_collection, fit_collection, score, simulate

truth = ModelSpec(ModelFamily.AR(1))
x = simulate(truth, truth.param([0.8, 1.0]), 2000, seed=7)

# AR(0) through AR(3), all in the AR(3) coordinate layout
collection = build_collection(ModelFamily.AR(3))
fits = fit_collection(collection, x)

# re-scoring the same fits costs nothing; only kappa_n changes
for penalty in (BIC(), AIC()):
    report = score(collection, fits, penalty, x.n)
    print(f"{penalty.to_string()}: kappa_n = {report.kappa_n:.3f}")
    for e in report.entries:
        mark = "<-" if e.spec == report.chosen_spec else ""
        print(f"   {e.spec.name:<8} l_hat {e.fit.l_hat:11.3f}  criterion {e.criterion:11.3f} {mark}")
