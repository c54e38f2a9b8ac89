"""Forward simulation of the model families.

All randomness flows through numpy's counter-based ``Philox`` bit generator
seeded via ``SeedSequence``. Per-replication seeds are derived by hashing the
pair ``(master_seed, index)``, so a batch is reproducible no matter how its
replications are scheduled.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.signal import lfilter
from scipy.special import gammaln

from .errors import DataError, DivergenceError, NonStationaryError
from .models import ModelSpec, ParamVector, _split, check_theta_r

__all__ = [
    "DEFAULT_BURN_IN",
    "DEFAULT_R",
    "InnovationLaw",
    "Trajectory",
    "derive_seed",
    "make_rng",
    "simulate",
]

DEFAULT_BURN_IN = 1000
#: Moment order used for the stationarity pre-check. Any r > 4 is admissible;
#: the region shrinks with r, so the check is run just above 4.
DEFAULT_R = 4.01

_LAWS = ("gaussian", "student_t", "rademacher")


def make_rng(seed: int) -> np.random.Generator:
    """Philox generator for a 64-bit non-negative ``seed``."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def derive_seed(master_seed: int, index: int) -> int:
    """Seed of replication ``index`` under ``master_seed``."""
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class InnovationLaw:
    """Centered, unit-variance innovation distribution.

    ``kind`` is ``"gaussian"``, ``"student_t"`` (rescaled by
    ``sqrt((df - 2) / df)``, ``df > 4``) or ``"rademacher"``.
    """

    kind: str = "gaussian"
    df: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in _LAWS:
            raise ValueError(f"innovation law must be one of {_LAWS}, got {self.kind!r}")
        if self.kind == "student_t":
            if self.df is None or not self.df > 4:
                raise ValueError("student_t innovations need df > 4")
            object.__setattr__(self, "df", float(self.df))
        elif self.df is not None:
            raise ValueError(f"df only applies to student_t, not {self.kind}")

    @property
    def name(self) -> str:
        return f"student_t({self.df!r})" if self.kind == "student_t" else self.kind

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "student_t":
            return rng.standard_t(self.df, size) * math.sqrt((self.df - 2.0) / self.df)
        return rng.integers(0, 2, size).astype(float) * 2.0 - 1.0

    def abs_moment(self, r: float) -> float:
        """``E|xi|^r``; infinite for Student-t when ``r >= df``."""
        if r <= 0:
            raise ValueError("moment order must be positive")
        if self.kind == "rademacher":
            return 1.0
        if self.kind == "gaussian":
            return math.exp(0.5 * r * math.log(2.0) + gammaln(0.5 * (r + 1)) - 0.5 * math.log(math.pi))
        nu = self.df
        if r >= nu:
            return math.inf
        return math.exp(
            0.5 * r * math.log(nu - 2.0)
            + gammaln(0.5 * (r + 1))
            + gammaln(0.5 * (nu - r))
            - 0.5 * math.log(math.pi)
            - gammaln(0.5 * nu)
        )

    def norm(self, r: float) -> float:
        """``||xi||_r = (E|xi|^r)^(1/r)``."""
        return self.abs_moment(r) ** (1.0 / r)

    @property
    def default_r(self) -> float:
        if self.kind == "student_t":
            return min(DEFAULT_R, 0.5 * (4.0 + self.df))
        return DEFAULT_R


@dataclass(frozen=True, eq=False)
class Trajectory:
    """An observed or simulated series with provenance metadata."""

    values: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size < 1:
            raise DataError("trajectory must contain at least one value")
        if not np.all(np.isfinite(v)):
            raise DataError("trajectory values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n

    def prefix(self, n: int) -> Trajectory:
        if not 1 <= n <= self.n:
            raise ValueError(f"prefix length {n} outside 1..{self.n}")
        return Trajectory(self.values[:n], {**self.meta, "prefix_of": self.n})


def simulate(
    spec: ModelSpec,
    theta: ParamVector,
    n: int,
    burn_in: int = DEFAULT_BURN_IN,
    law: InnovationLaw | None = None,
    seed: int = 0,
    *,
    r: float | None = None,
    allow_nonstationary: bool = False,
) -> Trajectory:
    """Simulate ``burn_in + n`` steps from a zero initial state; keep the last ``n``.

    Raises
    ------
    NonStationaryError
        If ``theta`` fails :func:`check_theta_r` and ``allow_nonstationary`` is
        false. With the override a warning is emitted instead.
    DivergenceError
        If the recursion produces a non-finite value.
    """
    law = InnovationLaw() if law is None else law
    n, burn_in = int(n), int(burn_in)
    if n < 1:
        raise ValueError("n must be >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    r = law.default_r if r is None else float(r)
    check = check_theta_r(spec, theta, law.norm(r))
    if not check.holds:
        msg = f"theta outside the stationarity region for r={r} (margin {check.margin})"
        if not allow_nonstationary:
            raise NonStationaryError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)

    total = burn_in + n
    xi = law.draw(make_rng(seed), total)
    parts = _split(spec.family, theta.values)
    x = _RECURSIONS[spec.family.kind](parts, xi, spec.h_floor)
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise DivergenceError(int(bad[0]) + 1)
    meta = {
        "model": spec.to_mapping(),
        "theta": theta.values.tolist(),
        "n": n,
        "burn_in": burn_in,
        "law": law.name,
        "seed": int(seed),
    }
    return Trajectory(x[burn_in:], meta)


def _sim_ar(parts, xi, floor):
    phi = np.asarray(parts["phi"], dtype=float)
    sigma = math.sqrt(max(float(parts["var"]), floor))
    with np.errstate(over="ignore", invalid="ignore"):
        return lfilter([1.0], np.concatenate(([1.0], -phi)), sigma * xi)


def _garch_loop(omega, a, b, xi, floor, ar=(), ma=()):
    """Shared ARMA-GARCH forward loop; plain floats keep it reasonably fast."""
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    ar = [float(v) for v in ar]
    ma = [float(v) for v in ma]
    sb = sum(b)
    if sb >= 1.0:
        raise NonStationaryError(f"sum of GARCH coefficients {sb} >= 1")
    level = omega / (1.0 - sb)
    total = xi.size
    xs = [0.0] * total
    es = [0.0] * total
    esq = [0.0] * total
    gs = [0.0] * total
    q, p, pa, qm = len(a), len(b), len(ar), len(ma)
    xi_l = xi.tolist()
    for t in range(total):
        g = 0.0
        for i in range(q):
            if t > i:
                g += a[i] * esq[t - i - 1]
        for j in range(p):
            if t > j:
                g += b[j] * gs[t - j - 1]
        gs[t] = g
        h = level + g
        if h < floor:
            h = floor
        e = math.sqrt(h) * xi_l[t]
        mean = 0.0
        for i in range(pa):
            if t > i:
                mean += ar[i] * xs[t - i - 1]
        for j in range(qm):
            if t > j:
                mean += ma[j] * es[t - j - 1]
        es[t] = e
        esq[t] = e * e
        xs[t] = mean + e
        if not math.isfinite(xs[t]):
            raise DivergenceError(t + 1)
    return np.asarray(xs)


def _sim_arch(parts, xi, floor):
    return _garch_loop(float(parts["omega"]), parts["a"], (), xi, floor)


def _sim_garch(parts, xi, floor):
    return _garch_loop(float(parts["omega"]), parts["a"], parts["b"], xi, floor)


def _sim_arma_garch(parts, xi, floor):
    return _garch_loop(float(parts["omega"]), parts["a"], parts["b"], xi, floor, parts["ar"], parts["ma"])


def _sim_tarch(parts, xi, floor):
    omega = float(parts["omega"])
    ap = [float(v) for v in parts["ap"]]
    am = [float(v) for v in parts["am"]]
    q = len(ap)
    total = xi.size
    xs = [0.0] * total
    xi_l = xi.tolist()
    for t in range(total):
        m = omega
        for k in range(q):
            if t > k:
                prev = xs[t - k - 1]
                m += ap[k] * prev if prev > 0 else -am[k] * prev
        xs[t] = m * xi_l[t]
        if not math.isfinite(xs[t]):
            raise DivergenceError(t + 1)
    return np.asarray(xs)


_RECURSIONS = {
    "AR": _sim_ar,
    "ARCH": _sim_arch,
    "GARCH": _sim_garch,
    "TARCH": _sim_tarch,
    "ARMA_GARCH": _sim_arma_garch,
}
