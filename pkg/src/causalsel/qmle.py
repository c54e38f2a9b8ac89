"""Quasi-maximum-likelihood fitting over a model's active coordinates.

The maximisation is a bound-projected Nelder-Mead simplex search run from
one deterministic start and a few seeded random interior starts. Global
optimality is not certified; the multi-start is the declared approximation.

For AR models the innovation variance is concentrated out (its conditional
argmax is the mean squared residual), so the simplex only moves the
autoregressive coefficients. A value-only search cannot resolve a scale
argmax much below ``sqrt(eps)`` relative, the closed form can.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, minimize

from .errors import InsufficientDataError, NonStationaryError, NumericalError, OptimizationFailed
from .likelihood import lhat_n
from .models import ModelSpec, ParamVector, _raw_moments, _series_values
from .simulate import make_rng

__all__ = ["FitOptions", "FitResult", "fit", "lil_rate"]


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings.

    Attributes
    ----------
    n_random_starts : int
        Seeded random starts in addition to the deterministic one.
    tol_x, tol_f : float
        Simplex size and value-spread tolerances. The objective is the
        per-observation negative quasi-log-likelihood ``-L_n / n``.
    max_evals_per_dim : int
        Evaluation budget per start is ``max_evals_per_dim * |m|``.
    seed : int
        Seed for the random starts.
    """

    n_random_starts: int = 4
    tol_x: float = 1e-8
    tol_f: float = 1e-10
    max_evals_per_dim: int = 2000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_random_starts < 0:
            raise ValueError("n_random_starts must be >= 0")
        if not (self.tol_x > 0 and self.tol_f > 0):
            raise ValueError("tolerances must be positive")
        if self.max_evals_per_dim < 1:
            raise ValueError("max_evals_per_dim must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be in [0, 2**64)")


@dataclass(frozen=True, eq=False)
class FitResult:
    spec: ModelSpec
    theta_hat: ParamVector
    l_hat: float
    n: int
    n_evals: int
    converged: bool
    starts_used: int
    at_boundary: bool = False
    start_l_hats: tuple[float, ...] = field(default=(), repr=False)
    final_l_hats: tuple[float, ...] = field(default=(), repr=False)

    def error_norm(self, theta_star: ParamVector) -> float:
        """Euclidean distance ``||theta_hat - theta_star||`` in the ambient space."""
        return float(np.linalg.norm(self.theta_hat.values - theta_star.values))

    def lil_statistic(self, theta_star: ParamVector) -> float:
        """``sqrt(n / log log n) * ||theta_hat - theta_star||``."""
        return lil_rate(self.n) * self.error_norm(theta_star)


def lil_rate(n: int) -> float:
    """Normaliser ``sqrt(n / log log n)``; needs ``n >= 3``."""
    if n < 3:
        raise ValueError("log log n is not positive for n < 3")
    return math.sqrt(n / math.log(math.log(n)))


class _Objective:
    """``-L_n / n`` over the free active coordinates, +inf where undefined."""

    def __init__(self, spec: ModelSpec, x: np.ndarray, free: list[int], base: np.ndarray, profile: int | None = None):
        self.family = spec.family
        # AR scale is concentrated out: sigma2 = mean squared residual, clipped to the box
        self.profile = profile
        self.profile_box = (spec.lower[profile], spec.upper[profile]) if profile is not None else None
        self.floor = spec.h_floor
        self.zero_mean = spec.family.kind in ("ARCH", "GARCH", "TARCH")
        self.x = x
        with np.errstate(over="ignore"):
            self.xsq = x * x
        self.free = free
        self.base = base
        self.n = x.size
        self.evals = 0
        self.best_value = math.inf
        self.best_point: np.ndarray | None = None

    def _profiled(self, v: np.ndarray) -> tuple[np.ndarray, float]:
        v[self.profile] = 1.0
        f, _ = _raw_moments(self.family, v, self.x, self.xsq)
        r = self.x - f
        ms = float(np.mean(r * r))
        v[self.profile] = min(max(ms, self.profile_box[0]), self.profile_box[1])
        return v, ms

    def full(self, z: np.ndarray) -> np.ndarray:
        v = self.base.copy()
        v[self.free] = z
        if self.profile is not None:
            v, _ = self._profiled(v)
        return v

    def __call__(self, z: np.ndarray) -> float:
        self.evals += 1
        v = self.base.copy()
        v[self.free] = z
        try:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                if self.profile is not None:
                    v, ms = self._profiled(v)
                    s2 = v[self.profile]
                    value = 0.5 * (ms / s2 + math.log(s2))
                else:
                    f, h = _raw_moments(self.family, v, self.x, self.xsq)
                    h = np.maximum(h, self.floor)
                    if self.zero_mean:
                        rsq = self.xsq
                    else:
                        r = self.x - f
                        rsq = r * r
                    value = 0.5 * float(np.sum(rsq / h + np.log(h))) / self.n
        except (NonStationaryError, NumericalError, FloatingPointError, ValueError):
            return math.inf
        if not math.isfinite(value):
            return math.inf
        if value < self.best_value:
            self.best_value = value
            self.best_point = v
        return value


def _second_moment(x: np.ndarray) -> float:
    with np.errstate(over="ignore"):
        return max(float(np.mean(x * x)), 1e-12)


def _deterministic_start(spec: ModelSpec, x: np.ndarray) -> np.ndarray:
    lo, hi = np.asarray(spec.lower), np.asarray(spec.upper)
    v = 0.5 * (lo + hi)
    roles = spec.family.coord_roles
    act = set(spec.active)
    s2 = _second_moment(x)
    kind = spec.family.kind
    a_idx = [i for i in spec.active if roles[i] == "a"]
    b_idx = [i for i in spec.active if roles[i] == "b"]
    if kind == "AR":
        v[spec.family.mandatory[0]] = s2
    elif kind in ("ARCH", "GARCH", "ARMA_GARCH"):
        for i in a_idx:
            v[i] = 0.1 / len(a_idx)
        for i in b_idx:
            v[i] = 0.8 / len(b_idx)
        persistence = 0.1 * bool(a_idx) + 0.8 * bool(b_idx)
        # variance targeting; the 0.5 factor applies to GARCH-type starts
        factor = 0.5 if b_idx else 1.0
        v[spec.family.mandatory[0]] = factor * s2 * (1.0 - persistence)
    else:  # TARCH
        for i in a_idx:
            v[i] = 0.1 / len(a_idx)
        tot = sum(v[i] for i in a_idx)
        v[spec.family.mandatory[0]] = math.sqrt(s2) * (1.0 - 0.4 * tot)
    v = np.clip(v, lo, hi)
    return np.array([v[i] if i in act else 0.0 for i in range(spec.d)])


def _random_start(spec: ModelSpec, x: np.ndarray, rng: np.random.Generator, det: np.ndarray) -> np.ndarray:
    lo, hi = np.asarray(spec.lower), np.asarray(spec.upper)
    roles = spec.family.coord_roles
    v = det.copy()
    s2 = _second_moment(x)
    for i in spec.active:
        role = roles[i]
        if role in ("phi", "ar", "ma"):
            v[i] = rng.uniform(lo[i], hi[i])
        elif role == "a":
            v[i] = rng.uniform(lo[i], max(lo[i], min(hi[i], 0.3)))
        elif role == "b":
            v[i] = rng.uniform(lo[i], max(lo[i], min(hi[i], 0.9)))
    a_idx = [i for i in spec.active if roles[i] == "a"]
    b_idx = [i for i in spec.active if roles[i] == "b"]
    sb = sum(v[i] for i in b_idx)
    if sb > 0.95:
        for i in b_idx:
            v[i] *= 0.95 / sb
    if spec.family.kind == "TARCH":
        v[spec.family.mandatory[0]] = det[spec.family.mandatory[0]] * rng.uniform(0.5, 2.0)
    else:
        persistence = sum(v[i] for i in a_idx) + sum(v[i] for i in b_idx)
        if persistence > 0.99:
            for i in a_idx + b_idx:
                v[i] *= 0.99 / persistence
            persistence = 0.99
        v[spec.family.mandatory[0]] = s2 * (1.0 - persistence) * rng.uniform(0.5, 2.0)
    v = np.clip(v, lo, hi)
    v[[i for i in range(spec.d) if i not in spec.active]] = 0.0
    return v


def _initial_simplex(z0: np.ndarray, lo: np.ndarray, hi: np.ndarray, scale_like: np.ndarray) -> np.ndarray:
    k = z0.size
    sim = np.tile(z0, (k + 1, 1))
    for j in range(k):
        width = hi[j] - lo[j]
        if scale_like[j] and z0[j] > 0:
            step = 0.2 * z0[j]
        else:
            step = 0.1 * min(1.0, width)
        step = min(step, 0.5 * width)
        if z0[j] + step <= hi[j]:
            sim[j + 1, j] = z0[j] + step
        elif z0[j] - step >= lo[j]:
            sim[j + 1, j] = z0[j] - step
        else:
            sim[j + 1, j] = lo[j] if z0[j] - lo[j] > hi[j] - z0[j] else hi[j]
    return sim


def fit(spec: ModelSpec, x, opts: FitOptions | None = None) -> FitResult:
    """QMLE of ``spec`` on the series ``x``.

    Returns the best end point over all starts (ties go to the lowest start
    index). ``converged`` requires at least one start to meet both
    tolerances and the estimate not to sit on the box boundary.

    Raises
    ------
    InsufficientDataError
        If ``n < |m| + 1``.
    OptimizationFailed
        If every start ends at a non-finite objective.
    """
    opts = FitOptions() if opts is None else opts
    arr = _series_values(x)
    n = arr.size
    if n < spec.dim + 1:
        raise InsufficientDataError(f"need at least {spec.dim + 1} observations for {spec.name}, got {n}")

    lo_full, hi_full = np.asarray(spec.lower), np.asarray(spec.upper)
    free = [i for i in spec.active if hi_full[i] > lo_full[i]]
    profile = None
    if spec.family.kind == "AR" and spec.family.mandatory[0] in free:
        profile = spec.family.mandatory[0]
        free.remove(profile)
    det = _deterministic_start(spec, arr)
    rng = make_rng(opts.seed)
    starts = [det] + [_random_start(spec, arr, rng, det) for _ in range(opts.n_random_starts)]

    roles = spec.family.coord_roles
    scale_like = np.array([roles[i] in ("variance", "scale") for i in free])
    lo, hi = lo_full[free], hi_full[free]
    maxfev = opts.max_evals_per_dim * max(spec.dim, 1)

    finals: list[tuple[float, np.ndarray, bool]] = []
    start_values: list[float] = []
    total_evals = 0
    obj_best_value, obj_best_point = math.inf, None
    for s in starts:
        obj = _Objective(spec, arr, free, s, profile)
        z0 = s[free]
        start_values.append(obj(z0))
        if free:
            with np.errstate(invalid="ignore"):  # inf - inf in the simplex spread test
                res = minimize(
                    obj,
                    z0,
                    method="Nelder-Mead",
                    bounds=Bounds(lo, hi),
                    options={
                        "initial_simplex": _initial_simplex(z0, lo, hi, scale_like),
                        "xatol": opts.tol_x,
                        "fatol": opts.tol_f,
                        "maxfev": maxfev,
                    },
                )
            z, value, ok = np.clip(res.x, lo, hi), float(res.fun), res.status == 0
            value = obj(z) if math.isfinite(value) else value
        else:
            z, value, ok = z0, start_values[-1], True
        total_evals += obj.evals
        if obj.best_value < obj_best_value:
            obj_best_value, obj_best_point = obj.best_value, obj.best_point
        finals.append((value, obj.full(z), ok))

    values = [f[0] for f in finals]
    if not any(math.isfinite(v) for v in values):
        best = None if obj_best_point is None else ParamVector.zeroed(obj_best_point, spec.active)
        raise OptimizationFailed(f"all {len(starts)} starts diverged for {spec.name}", best)
    best_idx = min(range(len(values)), key=lambda i: (values[i], i))
    theta_hat = ParamVector.zeroed(finals[best_idx][1], spec.active)
    l_hat = lhat_n(spec, theta_hat, arr).l_hat

    act = list(spec.active)
    v = theta_hat.values[act]
    atol = 10 * opts.tol_x
    at_boundary = bool(np.any(np.abs(v - lo_full[act]) <= atol) or np.any(np.abs(hi_full[act] - v) <= atol))
    converged = any(f[2] for f in finals) and not at_boundary

    def as_lhat(value: float) -> float:
        return -value * n if math.isfinite(value) else -math.inf

    return FitResult(
        spec=spec,
        theta_hat=theta_hat,
        l_hat=l_hat,
        n=n,
        n_evals=total_evals,
        converged=converged,
        starts_used=len(starts),
        at_boundary=at_boundary,
        start_l_hats=tuple(as_lhat(v) for v in start_values),
        final_l_hats=tuple(as_lhat(v) for v in values),
    )
