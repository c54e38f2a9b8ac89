"""Monte Carlo experiments for selection consistency and estimation rates.

One replication simulates a single trajectory of length ``max(n_grid)`` and
uses its prefixes for every ``n``, so the series are nested across the grid.
The collection is fitted once per ``(replication, n)`` and re-scored under
each penalty.

Strong consistency is an almost-sure statement and cannot be observed
directly; its finite-sample surrogate here is a selection frequency of the
true model that does not decrease along ``n_grid`` and is high at the end.
"""

from __future__ import annotations

import concurrent.futures
import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import CausalSelError, InsufficientDataError
from .models import ModelSpec, ParamVector, check_theta_r
from .qmle import FitOptions, FitResult, fit, lil_rate
from .selection import PenaltyRule, fit_collection, score
from .simulate import DEFAULT_BURN_IN, InnovationLaw, derive_seed, make_rng, simulate

__all__ = [
    "WORKERS_ENV",
    "ExperimentConfig",
    "ExperimentReport",
    "TrendSummary",
    "lil_summary",
    "overfit_gap_summary",
    "run_experiment",
    "trend_test",
]

#: Environment variable holding the number of worker processes.
WORKERS_ENV = "CAUSALSEL_WORKERS"


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Truth, candidate collection, penalties and Monte Carlo design.

    ``truth``/``theta_star`` may be given in a smaller family of the same
    kind; they are lifted into the collection's ambient coordinates.
    """

    truth: ModelSpec
    theta_star: ParamVector
    collection: tuple[ModelSpec, ...]
    penalties: tuple[PenaltyRule, ...]
    n_grid: tuple[int, ...]
    replications: int
    law: InnovationLaw = field(default_factory=InnovationLaw)
    master_seed: int = 0
    burn_in: int = DEFAULT_BURN_IN
    fit_options: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self) -> None:
        object.__setattr__(self, "collection", tuple(self.collection))
        object.__setattr__(self, "penalties", tuple(self.penalties))
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if not self.collection:
            raise ValueError("collection must not be empty")
        if len({s.d for s in self.collection}) != 1:
            raise ValueError("all models in the collection must share d")
        if not self.penalties:
            raise ValueError("at least one penalty rule is required")
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError(f"n_grid must be strictly increasing, got {self.n_grid}")
        if self.n_grid[0] < 3:
            raise ValueError("n_grid values must be >= 3")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        self.truth._check_theta(self.theta_star)
        check = check_theta_r(self.truth, self.theta_star, self.law.norm(self.law.default_r))
        if not check.holds:
            raise ValueError(f"theta_star is outside the stationarity region (margin {check.margin})")
        # fail early if the truth cannot be expressed in the ambient family
        self.lifted_truth()

    def lifted_truth(self) -> tuple[ModelSpec, ParamVector]:
        ambient = self.collection[0].family
        if self.truth.family == ambient:
            return self.truth, self.theta_star
        spec = self.truth.lift(ambient)
        return spec, self.truth.lift_param(self.theta_star, spec)

    @property
    def truth_index(self) -> int | None:
        spec, _ = self.lifted_truth()
        for i, s in enumerate(self.collection):
            if s.active == spec.active:
                return i
        return None


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    """Raw per-replication outcomes plus derived summaries.

    Arrays (``P`` penalties, ``K`` grid points, ``R`` replications, ``M``
    models): ``selections`` (P, K, R) chosen model index or -1 on failure;
    ``l_hats`` (K, R, M); ``errors`` (K, R) ``||theta_hat(m*) - theta*||``;
    ``selected_errors`` (P, K, R) the same for ``theta_hat(m_hat)``.
    """

    config: ExperimentConfig
    selections: np.ndarray
    l_hats: np.ndarray
    errors: np.ndarray
    selected_errors: np.ndarray
    failures: tuple[str, ...] = ()

    @property
    def n_grid(self) -> tuple[int, ...]:
        return self.config.n_grid

    @property
    def model_names(self) -> list[str]:
        return [s.name for s in self.config.collection]

    def frequencies(self) -> np.ndarray:
        """(P, K, M + 1) selection frequencies; the last column counts failures."""
        P, K, R = self.selections.shape
        M = len(self.config.collection)
        out = np.zeros((P, K, M + 1))
        for p in range(P):
            for k in range(K):
                idx = self.selections[p, k]
                idx = np.where(idx < 0, M, idx)
                out[p, k] = np.bincount(idx, minlength=M + 1) / R
        return out

    def prob_true(self) -> np.ndarray:
        """(P, K) frequency of selecting the true model."""
        ti = self.config.truth_index
        if ti is None:
            return np.zeros(self.selections.shape[:2])
        return np.mean(self.selections == ti, axis=2)

    def overfit_frequency(self) -> np.ndarray:
        """(P, K) frequency of choosing a model larger than the truth."""
        truth_spec, _ = self.config.lifted_truth()
        dims = np.array([s.dim for s in self.config.collection] + [-1])
        sel = np.where(self.selections < 0, len(dims) - 1, self.selections)
        return np.mean(dims[sel] > truth_spec.dim, axis=2)

    def lil_values(self, normalization: str | Callable[[int], float] = "lil", selected: int | None = None) -> np.ndarray:
        """(R, K) normalised errors; ``selected`` picks a penalty's m_hat."""
        norm = _normalizer(normalization)
        raw = self.errors if selected is None else self.selected_errors[selected]
        scale = np.array([norm(n) for n in self.n_grid])
        return (raw * scale[:, None]).T

    def overfit_models(self) -> list[int]:
        """Indices of collection models strictly containing the truth."""
        truth_spec, _ = self.config.lifted_truth()
        base = set(truth_spec.active)
        return [i for i, s in enumerate(self.config.collection) if set(s.active) > base]

    def overfit_gaps(self, model: int) -> np.ndarray:
        """(R, K) values of ``(L(m) - L(m*)) / log log n``."""
        ti = self.config.truth_index
        if ti is None:
            raise ValueError("the true model is not part of the collection")
        ll = np.array([math.log(math.log(n)) for n in self.n_grid])
        return ((self.l_hats[:, :, model] - self.l_hats[:, :, ti]) / ll[:, None]).T

    # serialisation ------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        cfg = self.config
        freqs = self.frequencies()
        ptrue = self.prob_true()
        names = self.model_names + ["failed"]
        selection = []
        for p, pen in enumerate(cfg.penalties):
            for k, n in enumerate(cfg.n_grid):
                selection.append(
                    {
                        "penalty": pen.to_string(),
                        "n": n,
                        "kappa_n": pen(n),
                        "frequencies": {name: float(freqs[p, k, j]) for j, name in enumerate(names)},
                        "p_true": float(ptrue[p, k]),
                        "overfit_frequency": float(self.overfit_frequency()[p, k]),
                        "chosen": [int(v) for v in self.selections[p, k]],
                    }
                )
        s = self.lil_values()
        lil = [
            {
                "n": n,
                "median": _nan_to_none(np.nanmedian(s[:, k])) if np.any(np.isfinite(s[:, k])) else None,
                "max": _nan_to_none(np.nanmax(s[:, k])) if np.any(np.isfinite(s[:, k])) else None,
                "error_norms": [_nan_to_none(v) for v in self.errors[k]],
            }
            for k, n in enumerate(cfg.n_grid)
        ]
        gaps = []
        if cfg.truth_index is not None:
            for m in self.overfit_models():
                g = self.overfit_gaps(m)
                gaps.append(
                    {
                        "model": self.model_names[m],
                        "per_n": [
                            {
                                "n": n,
                                "median": _nan_to_none(np.nanmedian(g[:, k])) if np.any(np.isfinite(g[:, k])) else None,
                                "values": [_nan_to_none(v) for v in g[:, k]],
                            }
                            for k, n in enumerate(cfg.n_grid)
                        ],
                    }
                )
        truth_spec, theta = cfg.lifted_truth()
        return {
            "config": {
                "truth": truth_spec.name,
                "theta_star": theta.values.tolist(),
                "collection": self.model_names,
                "penalties": [p.to_string() for p in cfg.penalties],
                "n_grid": list(cfg.n_grid),
                "replications": cfg.replications,
                "law": cfg.law.name,
                "master_seed": cfg.master_seed,
                "burn_in": cfg.burn_in,
            },
            "note": "consistency surrogate: P(m_hat = m*) nondecreasing over n_grid and high at the final n",
            "selection": selection,
            "lil": lil,
            "overfit_gap": gaps,
            "failures": list(self.failures),
        }

    def csv_tables(self) -> dict[str, list[list[Any]]]:
        """Flat tables keyed by file stem; first row is the header."""
        freqs = self.frequencies()
        names = self.model_names + ["failed"]
        sel = [["penalty", "n", "model", "frequency"]]
        for p, pen in enumerate(self.config.penalties):
            for k, n in enumerate(self.n_grid):
                for j, name in enumerate(names):
                    sel.append([pen.to_string(), n, name, float(freqs[p, k, j])])
        lil = [["n", "replication", "error_norm", "s_n"]]
        s = self.lil_values()
        for k, n in enumerate(self.n_grid):
            for r in range(self.errors.shape[1]):
                lil.append([n, r, float(self.errors[k, r]), float(s[r, k])])
        gap = [["model", "n", "replication", "gap"]]
        if self.config.truth_index is not None:
            for m in self.overfit_models():
                g = self.overfit_gaps(m)
                for k, n in enumerate(self.n_grid):
                    for r in range(g.shape[0]):
                        gap.append([self.model_names[m], n, r, float(g[r, k])])
        return {"selection_frequencies": sel, "lil": lil, "overfit_gap": gap}


def _nan_to_none(v) -> float | None:
    v = float(v)
    return v if math.isfinite(v) else None


def _normalizer(normalization: str | Callable[[int], float]) -> Callable[[int], float]:
    if callable(normalization):
        return normalization
    if normalization == "lil":
        return lil_rate
    if normalization == "sqrt_n":
        return math.sqrt
    raise ValueError(f"unknown normalization {normalization!r}")


# --------------------------------------------------------------------------
# execution


def _error_norm(res: FitResult | Exception, theta: ParamVector) -> float:
    if isinstance(res, FitResult):
        return res.error_norm(theta)
    return math.nan


def _run_replication(cfg: ExperimentConfig, r: int) -> dict[str, Any]:
    P, K, M = len(cfg.penalties), len(cfg.n_grid), len(cfg.collection)
    out = {
        "selections": np.full((P, K), -1, dtype=int),
        "l_hats": np.full((K, M), math.nan),
        "errors": np.full(K, math.nan),
        "selected_errors": np.full((P, K), math.nan),
        "failures": [],
    }
    truth_spec, theta = cfg.lifted_truth()
    ti = cfg.truth_index
    try:
        traj = simulate(
            cfg.truth,
            cfg.theta_star,
            cfg.n_grid[-1],
            cfg.burn_in,
            cfg.law,
            derive_seed(cfg.master_seed, r),
        )
    except CausalSelError as exc:
        out["failures"].append(f"replication {r}: simulation failed: {exc}")
        return out
    for k, n in enumerate(cfg.n_grid):
        x = traj.values[:n]
        fits = fit_collection(cfg.collection, x, cfg.fit_options)
        for j, res in enumerate(fits):
            if isinstance(res, FitResult):
                out["l_hats"][k, j] = res.l_hat
            else:
                out["failures"].append(f"replication {r}, n={n}, {cfg.collection[j].name}: {res}")
        if ti is not None:
            truth_fit = fits[ti]
        else:
            try:
                truth_fit = fit(truth_spec, x, cfg.fit_options)
            except CausalSelError as exc:
                truth_fit = exc
        out["errors"][k] = _error_norm(truth_fit, theta)
        for p, pen in enumerate(cfg.penalties):
            try:
                rep = score(cfg.collection, fits, pen, n)
            except CausalSelError as exc:
                out["failures"].append(f"replication {r}, n={n}, {pen.to_string()}: {exc}")
                continue
            out["selections"][p, k] = rep.chosen
            out["selected_errors"][p, k] = _error_norm(fits[rep.chosen], theta)
    return out


def _worker_count(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, int(workers))


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentReport:
    """Run all replications; the result does not depend on ``workers``."""
    R = cfg.replications
    workers = _worker_count(workers)
    if workers == 1 or R == 1:
        results = [_run_replication(cfg, r) for r in range(R)]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_replication, [cfg] * R, range(R)))
    return ExperimentReport(
        config=cfg,
        selections=np.stack([res["selections"] for res in results], axis=2),
        l_hats=np.stack([res["l_hats"] for res in results], axis=1),
        errors=np.stack([res["errors"] for res in results], axis=1),
        selected_errors=np.stack([res["selected_errors"] for res in results], axis=2),
        failures=tuple(f for res in results for f in res["failures"]),
    )


# --------------------------------------------------------------------------
# trend diagnostics


@dataclass(frozen=True, eq=False)
class TrendSummary:
    """Median trend of a statistic along the sample-size grid.

    ``slope`` is the Theil-Sen slope of the per-``n`` medians against
    ``log n``; ``ci`` its bootstrap percentile interval obtained by resampling
    whole replications. The verdict is ``"unbounded"`` when the interval lies
    strictly above zero.
    """

    n_grid: tuple[int, ...]
    medians: np.ndarray
    maxima: np.ndarray
    slope: float
    ci: tuple[float, float]
    verdict: str
    values: np.ndarray

    @property
    def bounded(self) -> bool:
        return self.verdict == "bounded"

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_grid": list(self.n_grid),
            "medians": [_nan_to_none(v) for v in self.medians],
            "maxima": [_nan_to_none(v) for v in self.maxima],
            "slope": self.slope,
            "ci": list(self.ci),
            "verdict": self.verdict,
        }


def _theil_sen(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Theil-Sen slopes of the rows of ``y`` against ``t``."""
    i, j = np.triu_indices(t.size, k=1)
    slopes = (y[..., j] - y[..., i]) / (t[j] - t[i])
    return np.median(slopes, axis=-1)


def trend_test(
    values: np.ndarray,
    n_grid: Sequence[int],
    n_boot: int = 999,
    level: float = 0.95,
    seed: int = 0,
) -> TrendSummary:
    """Test the (R, K) array ``values`` for an increasing median trend in log n."""
    values = np.asarray(values, dtype=float)
    n_grid = tuple(int(n) for n in n_grid)
    if values.ndim != 2 or values.shape[1] != len(n_grid):
        raise ValueError("values must have shape (replications, len(n_grid))")
    if len(n_grid) < 3:
        raise InsufficientDataError("trend test needs at least 3 grid points")
    keep = np.all(np.isfinite(values), axis=1)
    v = values[keep]
    if v.shape[0] < 1:
        raise InsufficientDataError("no replication has finite values on the whole grid")
    t = np.log(np.asarray(n_grid, dtype=float))
    med = np.median(v, axis=0)
    slope = float(_theil_sen(med, t))
    rng = make_rng(seed)
    idx = rng.integers(0, v.shape[0], size=(n_boot, v.shape[0]))
    boot_med = np.median(v[idx], axis=1)
    boot = _theil_sen(boot_med, t)
    alpha = 1.0 - level
    lo, hi = (float(q) for q in np.quantile(boot, [alpha / 2, 1 - alpha / 2]))
    verdict = "unbounded" if lo > 0 else "bounded"
    return TrendSummary(n_grid, med, np.max(v, axis=0), slope, (lo, hi), verdict, values)


def lil_summary(
    report: ExperimentReport,
    normalization: str | Callable[[int], float] = "lil",
    selected: int | None = None,
    **kwargs,
) -> TrendSummary:
    """Boundedness verdict for ``normalization(n) * ||theta_hat - theta*||``.

    With the default ``"lil"`` normaliser ``sqrt(n / log log n)`` a bounded
    verdict is the expected finite-sample behaviour. ``selected`` switches
    from the true model's estimate to the one selected under that penalty.
    """
    return trend_test(report.lil_values(normalization, selected), report.n_grid, **kwargs)


def overfit_gap_summary(report: ExperimentReport, **kwargs) -> dict[str, TrendSummary]:
    """Trend verdicts of the scaled overfit gap for each model containing the truth."""
    return {
        report.model_names[m]: trend_test(report.overfit_gaps(m), report.n_grid, **kwargs)
        for m in report.overfit_models()
    }
