"""Acceptance criteria, one test (and one PASS/FAIL line) per criterion.

The Monte Carlo experiments run once per module; criteria 4 to 7 read
different summaries of the same replications.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from causalsel.cli import main
from causalsel.likelihood import lhat_n
from causalsel.models import ModelFamily, ModelSpec, build_collection, check_theta_r, hat_moments
from causalsel.montecarlo import ExperimentConfig, lil_summary, overfit_gap_summary, run_experiment, trend_test
from causalsel.qmle import fit
from causalsel.selection import AIC, BIC
from causalsel.simulate import InnovationLaw

MASTER_SEED = 1
AR_GRID = (500, 2000, 8000, 32000)
CONSISTENCY_GRID = AR_GRID[:3]
R = 200

AR1 = ModelSpec(ModelFamily.AR(1))
GARCH11 = ModelSpec(ModelFamily.GARCH(1, 1))


def loglog(n):
    return math.log(math.log(n))


@pytest.fixture(scope="module")
def ar_report():
    cfg = ExperimentConfig(
        truth=AR1,
        theta_star=AR1.param([0.8, 1.0]),
        collection=tuple(build_collection(ModelFamily.AR(3))),
        penalties=(BIC(), AIC()),
        n_grid=AR_GRID,
        replications=R,
        master_seed=MASTER_SEED,
    )
    return run_experiment(cfg)


@pytest.fixture(scope="module")
def garch_report():
    cfg = ExperimentConfig(
        truth=GARCH11,
        theta_star=GARCH11.param([0.1, 0.2, 0.5]),
        collection=tuple(build_collection(ModelFamily.GARCH(2, 2))),
        penalties=(BIC(),),
        n_grid=(1000, 4000, 16000),
        replications=R,
        master_seed=MASTER_SEED,
    )
    return run_experiment(cfg)


def fmt(values):
    return "[" + ", ".join(f"{v:.4g}" for v in values) + "]"


# 1 ------------------------------------------------------------------------


def test_c1_closed_form_variance(verdict):
    ar0 = ModelSpec(ModelFamily.AR(0))
    rng = np.random.default_rng(101)
    datasets = [
        rng.standard_normal(10),
        rng.standard_normal(1000) * 37.0,
        rng.standard_t(3, 5000) * 0.02,
        rng.uniform(-1, 1, 100_000),
        np.linspace(-2.0, 5.0, 333),
        np.array([1.0, 2.0]),
    ]
    worst, slowest = 0.0, 0.0
    for x in datasets:
        t0 = time.perf_counter()
        res = fit(ar0, x)
        slowest = max(slowest, time.perf_counter() - t0)
        target = math.fsum(x * x) / x.size
        worst = max(worst, abs(res.theta_hat.values[0] - target) / target)
    verdict(
        "C1 closed-form QMLE",
        worst <= 1e-6 and slowest < 1.0,
        f"max rel err {worst:.2e} (tol 1e-6), max runtime {slowest:.3f}s (< 1s)",
    )


# 2 ------------------------------------------------------------------------


def arch_inf_variance(omega, a, b, x):
    """H_t = omega / (1 - b) + sum_{j < t} a * b^(j-1) * x_{t-j}^2, term by term."""
    out = np.empty(x.size)
    for t in range(x.size):
        acc = omega / (1.0 - b)
        for j in range(1, t + 1):
            acc += a * b ** (j - 1) * x[t - j] ** 2
        out[t] = acc
    return out


def test_c2_hat_recursion_oracle(verdict):
    rng = np.random.default_rng(202)
    norm = InnovationLaw().norm(InnovationLaw().default_r)
    worst, points = 0.0, 0
    while points < 50:
        omega, a, b = rng.uniform(0.01, 2.0), rng.uniform(0.0, 0.6), rng.uniform(0.0, 0.95)
        theta = GARCH11.param([omega, a, b])
        if not check_theta_r(GARCH11, theta, norm).holds:
            continue
        points += 1
        x = rng.standard_normal(100) * rng.uniform(0.1, 3.0)
        h = hat_moments(GARCH11, theta, x).h_hat
        worst = max(worst, float(np.max(np.abs(h - arch_inf_variance(omega, a, b, x)))))
    verdict("C2 GARCH(1,1) hat recursion", worst <= 1e-10, f"max abs diff {worst:.2e} over 50 points (tol 1e-10)")


# 3 ------------------------------------------------------------------------


def test_c3_gaussian_equivalence(verdict):
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(20):
        p = int(rng.integers(1, 4))
        spec = ModelSpec(ModelFamily.AR(p))
        phi = rng.uniform(-0.9, 0.9, p) / p
        sigma2 = rng.uniform(0.2, 5.0)
        x = rng.standard_normal(int(rng.integers(20, 400))) * rng.uniform(0.5, 2.0)
        xp = np.concatenate((np.zeros(p), x))
        mean = np.array([xp[t : t + p][::-1] @ phi for t in range(x.size)])
        nll = -math.fsum(stats.norm.logpdf(x, loc=mean, scale=math.sqrt(sigma2)))
        minus2l = -2.0 * lhat_n(spec, spec.param([*phi, sigma2]), x).l_hat
        # -2 L_n drops the n log(2 pi) constant of twice the Gaussian NLL
        worst = max(worst, abs((2.0 * nll - minus2l) - x.size * math.log(2.0 * math.pi)))
    verdict("C3 Gaussian likelihood equivalence", worst <= 1e-8, f"max deviation {worst:.2e} over 20 pairs (tol 1e-8)")


# 4 ------------------------------------------------------------------------


@pytest.mark.slow
def test_c4_consistency_ar(verdict, ar_report):
    p = ar_report.prob_true()[0, : len(CONSISTENCY_GRID)]
    ok = bool(np.all(np.diff(p) >= 0) and p[-1] >= 0.9)
    verdict("C4a consistency AR(1), BIC", ok, f"P(m_hat=m*) over n={CONSISTENCY_GRID}: {fmt(p)}")


@pytest.mark.slow
def test_c4_consistency_garch(verdict, garch_report):
    p = garch_report.prob_true()[0]
    ok = bool(np.all(np.diff(p) >= 0) and p[-1] >= 0.9)
    verdict("C4b consistency GARCH(1,1), BIC", ok, f"P(m_hat=m*) over n={garch_report.n_grid}: {fmt(p)}")


# 5 ------------------------------------------------------------------------


@pytest.mark.slow
def test_c5_aic_overfits(verdict, ar_report):
    over = ar_report.overfit_frequency()[:, : len(CONSISTENCY_GRID)]
    bic, aic = over[0], over[1]
    ok = bool(np.all(aic > bic) and aic[-1] - bic[-1] > 0.05)
    verdict("C5 AIC vs BIC overfitting", ok, f"AIC {fmt(aic)} vs BIC {fmt(bic)}, gap at 8000 = {aic[-1] - bic[-1]:.3f}")


# 6 ------------------------------------------------------------------------


@pytest.mark.slow
def test_c6_lil_rate_bounded(verdict, ar_report):
    s = lil_summary(ar_report)
    verdict(
        "C6a LIL rate bounded",
        s.verdict == "bounded",
        f"medians {fmt(s.medians)}, slope {s.slope:.3g}, CI ({s.ci[0]:.3g}, {s.ci[1]:.3g})",
    )


@pytest.mark.slow
def test_c6_wrong_rate_unbounded(verdict, ar_report):
    s = trend_test(ar_report.lil_values(lambda n: math.sqrt(n) / loglog(n)), ar_report.n_grid)
    verdict(
        "C6b sqrt(n)/loglog n normalisation unbounded",
        s.verdict == "unbounded",
        f"medians {fmt(s.medians)}, slope {s.slope:.3g}, CI ({s.ci[0]:.3g}, {s.ci[1]:.3g})",
    )


@pytest.mark.slow
def test_c6_supplementary_fast_rate_unbounded(verdict, ar_report):
    # normalising as if the error were O(log log n / n)
    s = trend_test(ar_report.lil_values(lambda n: n / loglog(n)), ar_report.n_grid)
    verdict(
        "C6c (supplementary) n/loglog n normalisation unbounded",
        s.verdict == "unbounded",
        f"medians {fmt(s.medians)}, slope {s.slope:.3g}, CI ({s.ci[0]:.3g}, {s.ci[1]:.3g})",
    )


# 7 ------------------------------------------------------------------------


@pytest.mark.slow
def test_c7_overfit_gap_bounded(verdict, ar_report):
    s = overfit_gap_summary(ar_report)["AR(2)"]
    verdict(
        "C7 overfit gap AR(2) vs AR(1) bounded",
        s.verdict == "bounded",
        f"medians {fmt(s.medians)}, slope {s.slope:.3g}, CI ({s.ci[0]:.3g}, {s.ci[1]:.3g})",
    )


# 8 ------------------------------------------------------------------------

CONFIGS = {
    "simulate": "[run]\nseed = 5\n[model]\nfamily = GARCH\norders = 1, 1\ntheta = 0.1, 0.2, 0.5\n[simulate]\nn = 500\n",
    "fit": "[model]\nfamily = GARCH\norders = 1, 1\n",
    "select": "[collection]\nfamily = GARCH\norders = 1, 1\n[selection]\npenalty = BIC, AIC\n",
    "mc": (
        "[run]\nseed = 9\n[model]\nfamily = AR\norders = 1\ntheta = 0.5, 1.0\n"
        "[collection]\nfamily = AR\norders = 2\n[selection]\npenalty = BIC, AIC\n"
        "[mc]\nn_grid = 100, 200, 400\nreplications = 4\n"
    ),
}


def _data_outputs(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.name != "run_metadata.json"}


def test_c8_determinism(verdict, tmp_path):
    for name, text in CONFIGS.items():
        (tmp_path / f"{name}.cfg").write_text(text)
    data = tmp_path / "simulate1" / "trajectory.csv"
    mismatched, codes = [], []
    for name in CONFIGS:
        runs = []
        for k in (1, 2):
            out = tmp_path / f"{name}{k}"
            args = [name, "--config", str(tmp_path / f"{name}.cfg"), "--out", str(out)]
            if name in ("fit", "select"):
                args += ["--data", str(data)]
            codes.append(main(args))
            runs.append(_data_outputs(out))
        if not runs[0] or runs[0] != runs[1]:
            mismatched.append(name)
    verdict(
        "C8 determinism",
        not mismatched and all(c == 0 for c in codes),
        f"exit codes {codes}, mismatched outputs: {mismatched or 'none'}",
    )
