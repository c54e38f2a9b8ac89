"""Affine causal model families and their zero-past recursions.

Every family maps a parameter vector on a fixed ambient coordinate layout to
the conditional mean ``f`` and conditional variance ``H`` of ``X_t`` given the
observed past, with pre-sample observations replaced by zero.

Coordinate layouts (0-based indices):

========================  =====================================================
``AR(p)``                 ``phi1..phip, sigma2``
``ARCH(q)``               ``omega, a1..aq``
``GARCH(p, q)``           ``omega, a1..aq, b1..bp`` (p GARCH lags, q ARCH lags)
``TARCH(q)``              ``omega, a1+..aq+, a1-..aq-`` (affine in the scale)
``ARMA_GARCH(p,q,P,Q)``   ``ar1..arp, ma1..maq, omega, a1..aQ, b1..bP``
========================  =====================================================

A model of a collection is a :class:`ModelSpec`: an ambient family plus the
subset of coordinates it is allowed to move; all other coordinates are held
at zero.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import DataError, NonStationaryError, NumericalError

__all__ = [
    "FAMILY_KINDS",
    "H_FLOOR",
    "ConditionalMoments",
    "ModelFamily",
    "ModelSpec",
    "ParamVector",
    "ThetaRCheck",
    "build_collection",
    "check_theta_r",
    "hat_moments",
]

FAMILY_KINDS = ("AR", "ARCH", "GARCH", "TARCH", "ARMA_GARCH")

#: Lower clamp applied to every conditional variance.
H_FLOOR = 1e-8

_MAX_EXHAUSTIVE = 20
_SERIES_EPS = 1e-17
_MAX_SERIES = 1_000_000

_N_ORDERS = {"AR": 1, "ARCH": 1, "GARCH": 2, "TARCH": 1, "ARMA_GARCH": 4}

# Default closed intervals per coordinate role.
_DEFAULT_BOUNDS = {
    "phi": (-1.0, 1.0),
    "ar": (-1.0, 1.0),
    "ma": (-0.99, 0.99),
    "variance": (1e-6, 1e4),
    "scale": (1e-3, 1e2),
    "a": (0.0, 1.0),
    "b": (0.0, 0.999),
}


@dataclass(frozen=True)
class ModelFamily:
    """A family variant together with its (maximal) orders.

    Use the named constructors ``ModelFamily.AR(p)``, ``ModelFamily.ARCH(q)``,
    ``ModelFamily.GARCH(p, q)``, ``ModelFamily.TARCH(q)`` and
    ``ModelFamily.ARMA_GARCH(p, q, P, Q)``.
    """

    kind: str
    orders: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family {self.kind!r}; expected one of {FAMILY_KINDS}")
        orders = tuple(int(o) for o in self.orders)
        object.__setattr__(self, "orders", orders)
        if len(orders) != _N_ORDERS[self.kind]:
            raise ValueError(f"{self.kind} takes {_N_ORDERS[self.kind]} order(s), got {orders}")
        if any(o < 0 for o in orders):
            raise ValueError(f"orders must be >= 0, got {orders}")
        if not _orders_valid(self.kind, orders):
            raise ValueError(
                f"{self.kind}{orders}: GARCH lags require at least one ARCH lag "
                "(a pure b-only recursion is not identifiable)"
            )

    # named constructors -------------------------------------------------
    @classmethod
    def AR(cls, p: int) -> ModelFamily:  # noqa: N802
        return cls("AR", (p,))

    @classmethod
    def ARCH(cls, q: int) -> ModelFamily:  # noqa: N802
        return cls("ARCH", (q,))

    @classmethod
    def GARCH(cls, p: int, q: int) -> ModelFamily:  # noqa: N802
        return cls("GARCH", (p, q))

    @classmethod
    def TARCH(cls, q: int) -> ModelFamily:  # noqa: N802
        return cls("TARCH", (q,))

    @classmethod
    def ARMA_GARCH(cls, p: int, q: int, P: int, Q: int) -> ModelFamily:  # noqa: N802
        return cls("ARMA_GARCH", (p, q, P, Q))

    # geometry -----------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.coord_names)

    @property
    def coord_names(self) -> tuple[str, ...]:
        return _layout(self.kind, self.orders)[0]

    @property
    def coord_roles(self) -> tuple[str, ...]:
        return _layout(self.kind, self.orders)[1]

    @property
    def mandatory(self) -> tuple[int, ...]:
        """Indices that every model of the family keeps active."""
        return tuple(i for i, r in enumerate(self.coord_roles) if r in ("variance", "scale"))

    @property
    def optional(self) -> tuple[int, ...]:
        mand = set(self.mandatory)
        return tuple(i for i in range(self.dim) if i not in mand)

    def lag_groups(self) -> list[list[tuple[int, ...]]]:
        """Per order slot, the coordinates switched on by each successive lag."""
        idx = {name: i for i, name in enumerate(self.coord_names)}
        k, o = self.kind, self.orders
        if k == "AR":
            return [[(idx[f"phi{j}"],) for j in range(1, o[0] + 1)]]
        if k == "ARCH":
            return [[(idx[f"a{j}"],) for j in range(1, o[0] + 1)]]
        if k == "GARCH":
            return [
                [(idx[f"b{j}"],) for j in range(1, o[0] + 1)],
                [(idx[f"a{j}"],) for j in range(1, o[1] + 1)],
            ]
        if k == "TARCH":
            return [[(idx[f"a{j}+"], idx[f"a{j}-"]) for j in range(1, o[0] + 1)]]
        return [
            [(idx[f"ar{j}"],) for j in range(1, o[0] + 1)],
            [(idx[f"ma{j}"],) for j in range(1, o[1] + 1)],
            [(idx[f"b{j}"],) for j in range(1, o[2] + 1)],
            [(idx[f"a{j}"],) for j in range(1, o[3] + 1)],
        ]

    def active_for_orders(self, orders: Sequence[int]) -> tuple[int, ...]:
        """Active set of the hierarchical sub-model with the given orders."""
        orders = tuple(int(o) for o in orders)
        if len(orders) != len(self.orders) or any(
            o < 0 or o > m for o, m in zip(orders, self.orders)
        ):
            raise ValueError(f"orders {orders} outside the family bounds {self.orders}")
        active = set(self.mandatory)
        for slot, lags in zip(orders, self.lag_groups()):
            for group in lags[:slot]:
                active.update(group)
        return tuple(sorted(active))

    def default_box(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        lo = tuple(_DEFAULT_BOUNDS[r][0] for r in self.coord_roles)
        hi = tuple(_DEFAULT_BOUNDS[r][1] for r in self.coord_roles)
        return lo, hi

    def label(self, orders: Sequence[int] | None = None) -> str:
        orders = self.orders if orders is None else orders
        return f"{self.kind}({','.join(str(o) for o in orders)})"

    def __str__(self) -> str:
        return self.label()


def _orders_valid(kind: str, orders: Sequence[int]) -> bool:
    if kind == "GARCH":
        p, q = orders
        return not (p >= 1 and q == 0)
    if kind == "ARMA_GARCH":
        P, Q = orders[2], orders[3]
        return not (P >= 1 and Q == 0)
    return True


def _layout(kind: str, orders: tuple[int, ...]) -> tuple[tuple[str, ...], tuple[str, ...]]:
    names: list[str] = []
    roles: list[str] = []

    def add(prefix: str, count: int, role: str, suffix: str = "") -> None:
        for j in range(1, count + 1):
            names.append(f"{prefix}{j}{suffix}")
            roles.append(role)

    if kind == "AR":
        add("phi", orders[0], "phi")
        names.append("sigma2")
        roles.append("variance")
    elif kind == "ARCH":
        names.append("omega")
        roles.append("variance")
        add("a", orders[0], "a")
    elif kind == "GARCH":
        p, q = orders
        names.append("omega")
        roles.append("variance")
        add("a", q, "a")
        add("b", p, "b")
    elif kind == "TARCH":
        names.append("omega")
        roles.append("scale")
        add("a", orders[0], "a", "+")
        add("a", orders[0], "a", "-")
    else:
        p, q, P, Q = orders
        add("ar", p, "ar")
        add("ma", q, "ma")
        names.append("omega")
        roles.append("variance")
        add("a", Q, "a")
        add("b", P, "b")
    return tuple(names), tuple(roles)


def _parse_ints(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(tok) for tok in text.split(","))


def _parse_floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(tok) for tok in text.split(","))


def _fmt_floats(values: Iterable[float]) -> str:
    return ", ".join(repr(float(v)) for v in values)


@dataclass(frozen=True)
class ModelSpec:
    """One candidate model: ambient family, active coordinates and a compact box.

    Parameters
    ----------
    family : ModelFamily
        Ambient family; fixes the dimension ``d`` shared by a collection.
    active : sequence of int
        0-based active coordinate indices. Defaults to every coordinate.
    lower, upper : sequence of float, optional
        Box bounds on all ``d`` coordinates. Defaults to
        :meth:`ModelFamily.default_box`.
    """

    family: ModelFamily
    active: tuple[int, ...] = None  # type: ignore[assignment]
    lower: tuple[float, ...] = None  # type: ignore[assignment]
    upper: tuple[float, ...] = None  # type: ignore[assignment]
    h_floor: float = field(default=H_FLOOR, compare=False)

    def __post_init__(self) -> None:
        d = self.family.dim
        active = tuple(range(d)) if self.active is None else tuple(sorted({int(i) for i in self.active}))
        if self.active is not None and len(active) != len(tuple(self.active)):
            raise ValueError(f"duplicate indices in active set {tuple(self.active)}")
        if any(i < 0 or i >= d for i in active):
            raise ValueError(f"active indices {active} outside 0..{d - 1}")
        missing = set(self.family.mandatory) - set(active)
        if missing:
            names = [self.family.coord_names[i] for i in sorted(missing)]
            raise ValueError(f"mandatory coordinates {names} must be active")
        dlo, dhi = self.family.default_box()
        lower = dlo if self.lower is None else tuple(float(v) for v in self.lower)
        upper = dhi if self.upper is None else tuple(float(v) for v in self.upper)
        if len(lower) != d or len(upper) != d:
            raise ValueError(f"box bounds must have length {d}")
        for i, (lo, hi) in enumerate(zip(lower, upper)):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ValueError(
                    f"box for {self.family.coord_names[i]} must be a finite interval, got [{lo}, {hi}]"
                )
        for i in self.family.mandatory:
            if lower[i] < self.h_floor or lower[i] <= 0:
                raise ValueError(
                    f"Assumption D: lower bound of {self.family.coord_names[i]} must be "
                    f">= {self.h_floor} > 0, got {lower[i]}"
                )
        object.__setattr__(self, "active", active)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def d(self) -> int:
        return self.family.dim

    @property
    def dim(self) -> int:
        """Model dimension ``|m|``."""
        return len(self.active)

    @property
    def orders(self) -> tuple[int, ...]:
        """Effective orders: the largest active lag of each order slot."""
        act = set(self.active)
        out = []
        for lags in self.family.lag_groups():
            top = 0
            for k, group in enumerate(lags, start=1):
                if any(i in act for i in group):
                    top = k
            out.append(top)
        return tuple(out)

    @property
    def is_hierarchical(self) -> bool:
        return self.active == self.family.active_for_orders(self.orders)

    @property
    def name(self) -> str:
        label = self.family.label(self.orders)
        if self.is_hierarchical:
            return label
        names = [self.family.coord_names[i] for i in self.active if i not in self.family.mandatory]
        return f"{label}[{','.join(names)}]"

    def __str__(self) -> str:
        return self.name

    # parameter maps -----------------------------------------------------
    def embed(self, values: Sequence[float]) -> ParamVector:
        """Map active-coordinate values in R^|m| to a full ParamVector."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} active values, got shape {values.shape}")
        full = np.zeros(self.d)
        full[list(self.active)] = values
        return ParamVector(full, self.active)

    def restrict(self, theta: ParamVector) -> np.ndarray:
        self._check_theta(theta)
        return theta.values[list(self.active)].copy()

    def param(self, values: Sequence[float]) -> ParamVector:
        """Full ``d``-vector, given explicitly, as a ParamVector of this model."""
        return ParamVector(values, self.active)

    def project(self, theta: ParamVector) -> ParamVector:
        """Clip the active coordinates onto the box."""
        self._check_theta(theta)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return ParamVector(np.clip(theta.values, lo, hi) * theta.mask, self.active)

    def contains(self, theta: ParamVector) -> bool:
        self._check_theta(theta)
        v = theta.values
        return bool(np.all(v >= np.asarray(self.lower)) and np.all(v <= np.asarray(self.upper)))

    def _check_theta(self, theta: ParamVector) -> None:
        if theta.values.shape != (self.d,):
            raise ValueError(
                f"parameter has dimension {theta.values.shape[0]}, model {self.name} needs {self.d}"
            )
        if tuple(theta.active) != self.active:
            raise ValueError(f"parameter active set {theta.active} differs from model's {self.active}")

    def lift(self, family: ModelFamily) -> ModelSpec:
        """Re-express this model inside a larger ambient family of the same kind."""
        if family.kind != self.family.kind:
            raise ValueError(f"cannot lift {self.family.kind} into {family.kind}")
        index = {name: i for i, name in enumerate(family.coord_names)}
        try:
            mapping = [index[name] for name in self.family.coord_names]
        except KeyError as exc:
            raise ValueError(f"{family} does not contain coordinate {exc.args[0]}") from None
        lo, hi = (list(b) for b in family.default_box())
        for src, dst in enumerate(mapping):
            lo[dst], hi[dst] = self.lower[src], self.upper[src]
        return ModelSpec(family, tuple(mapping[i] for i in self.active), lo, hi, self.h_floor)

    def lift_param(self, theta: ParamVector, target: ModelSpec) -> ParamVector:
        index = {name: i for i, name in enumerate(target.family.coord_names)}
        full = np.zeros(target.d)
        for src, name in enumerate(self.family.coord_names):
            full[index[name]] = theta.values[src]
        return ParamVector(full, target.active)

    # serialization ------------------------------------------------------
    def to_mapping(self) -> dict[str, str]:
        return {
            "family": self.family.kind,
            "orders": ", ".join(str(o) for o in self.family.orders),
            "active": ", ".join(str(i) for i in self.active),
            "lower": _fmt_floats(self.lower),
            "upper": _fmt_floats(self.upper),
        }

    @classmethod
    def from_mapping(cls, m: Mapping[str, str]) -> ModelSpec:
        """Build from the key-value schema (``family``, ``orders``, ``active``,
        ``lower``, ``upper``); the last three are optional."""
        unknown = set(m) - {"family", "orders", "active", "lower", "upper"}
        if unknown:
            raise ValueError(f"unknown model key(s): {sorted(unknown)}")
        if "family" not in m or "orders" not in m:
            raise ValueError("model needs 'family' and 'orders'")
        family = ModelFamily(m["family"].strip().upper(), _parse_ints(m["orders"]))
        active = _parse_ints(m["active"]) if "active" in m else None
        lower = _parse_floats(m["lower"]) if "lower" in m else None
        upper = _parse_floats(m["upper"]) if "upper" in m else None
        return cls(family, active, lower, upper)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_mapping().items())

    @classmethod
    def from_text(cls, text: str) -> ModelSpec:
        m: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            m[key] = value
        return cls.from_mapping(m)


class ParamVector:
    """A full ``d``-dimensional parameter with zeros off its active set.

    The stored array is read-only. Construction rejects non-zero inactive
    coordinates; use :meth:`zeroed` to coerce an arbitrary vector.
    """

    __slots__ = ("values", "active", "mask")

    def __init__(self, values: Sequence[float], active: Sequence[int]) -> None:
        v = np.array(values, dtype=float).reshape(-1)
        active = tuple(sorted(int(i) for i in active))
        if any(i < 0 or i >= v.size for i in active):
            raise ValueError(f"active indices {active} outside 0..{v.size - 1}")
        mask = np.zeros(v.size)
        mask[list(active)] = 1.0
        if not np.all(np.isfinite(v)):
            raise DataError("parameter values must be finite")
        if np.any(v[mask == 0] != 0):
            raise ValueError("inactive parameter coordinates must be exactly zero")
        v.setflags(write=False)
        mask.setflags(write=False)
        self.values = v
        self.active = active
        self.mask = mask

    @classmethod
    def zeroed(cls, values: Sequence[float], active: Sequence[int]) -> ParamVector:
        v = np.array(values, dtype=float).reshape(-1)
        keep = np.zeros(v.size, dtype=bool)
        keep[list(active)] = True
        v[~keep] = 0.0
        return cls(v, active)

    @property
    def active_values(self) -> np.ndarray:
        return self.values[list(self.active)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self.active == other.active and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.active, self.values.tobytes()))

    def __repr__(self) -> str:
        return f"ParamVector({self.values.tolist()!r}, active={self.active})"


class ConditionalMoments(NamedTuple):
    f_hat: np.ndarray
    h_hat: np.ndarray


class ThetaRCheck(NamedTuple):
    holds: bool
    margin: float


# --------------------------------------------------------------------------
# recursions


def _series_values(x) -> np.ndarray:
    arr = np.asarray(getattr(x, "values", x), dtype=float).reshape(-1)
    if arr.size < 1:
        raise DataError("trajectory must contain at least one observation")
    if not np.all(np.isfinite(arr)):
        raise DataError("trajectory contains non-finite values")
    return arr


def _lagsum(coefs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """sum_k coefs[k-1] * z[t-k] with z[s] = 0 for s < 0."""
    out = np.zeros_like(z)
    n = z.size
    for k, c in enumerate(coefs, start=1):
        if c != 0.0 and k < n:
            out[k:] += c * z[: n - k]
    return out


def _split(family: ModelFamily, v: np.ndarray) -> dict[str, np.ndarray]:
    k, o = family.kind, family.orders
    if k == "AR":
        p = o[0]
        return {"phi": v[:p], "var": v[p]}
    if k == "ARCH":
        return {"omega": v[0], "a": v[1:]}
    if k == "GARCH":
        p, q = o
        return {"omega": v[0], "a": v[1 : 1 + q], "b": v[1 + q : 1 + q + p]}
    if k == "TARCH":
        q = o[0]
        return {"omega": v[0], "ap": v[1 : 1 + q], "am": v[1 + q :]}
    p, q, P, Q = o
    return {
        "ar": v[:p],
        "ma": v[p : p + q],
        "omega": v[p + q],
        "a": v[p + q + 1 : p + q + 1 + Q],
        "b": v[p + q + 1 + Q :],
    }


def _garch_variance(omega: float, a: np.ndarray, b: np.ndarray, esq: np.ndarray) -> np.ndarray:
    # H_t = omega/(1 - sum b) + G_t, where G solves the GARCH filter with zero
    # pre-sample state; this is the zero-past ARCH(inf) representation exactly.
    v = _lagsum(a, esq)
    if b.size == 0 or not np.any(b):
        return omega + v
    sb = float(np.sum(b))
    if sb >= 1.0:
        raise NonStationaryError(f"sum of GARCH coefficients {sb} >= 1")
    g = lfilter([1.0], np.concatenate(([1.0], -b)), v)
    return omega / (1.0 - sb) + g


def _raw_moments(family: ModelFamily, v: np.ndarray, x: np.ndarray, xsq: np.ndarray | None = None):
    """Unclamped conditional mean and variance for full parameter ``v``."""
    parts = _split(family, v)
    k = family.kind
    if xsq is None and k in ("ARCH", "GARCH"):
        xsq = x * x
    if k == "AR":
        f = _lagsum(parts["phi"], x)
        h = np.full(x.size, float(parts["var"]))
    elif k == "ARCH":
        f = np.zeros(x.size)
        h = parts["omega"] + _lagsum(parts["a"], xsq)
    elif k == "GARCH":
        f = np.zeros(x.size)
        h = _garch_variance(parts["omega"], parts["a"], parts["b"], xsq)
    elif k == "TARCH":
        f = np.zeros(x.size)
        scale = parts["omega"] + _lagsum(parts["ap"], np.maximum(x, 0.0)) + _lagsum(
            parts["am"], np.maximum(-x, 0.0)
        )
        h = scale * scale
    else:
        ar, ma = parts["ar"], parts["ma"]
        if ma.size and np.any(ma):
            resid = lfilter(np.concatenate(([1.0], -ar)), np.concatenate(([1.0], ma)), x)
        else:
            resid = x - _lagsum(ar, x)
        f = x - resid
        h = _garch_variance(parts["omega"], parts["a"], parts["b"], resid * resid)
    return f, h


def hat_moments(spec: ModelSpec, theta: ParamVector, x, h_floor: float | None = None) -> ConditionalMoments:
    """Zero-past conditional means and variances for ``t = 1..n``.

    Parameters
    ----------
    spec : ModelSpec
    theta : ParamVector
        Must share ``spec``'s dimension and active set.
    x : Trajectory or array_like
        Observations ``X_1..X_n``.
    h_floor : float, optional
        Lower clamp on the variances; defaults to ``spec.h_floor``.

    Returns
    -------
    ConditionalMoments
        ``f_hat`` and ``h_hat`` arrays of length ``n``.
    """
    spec._check_theta(theta)
    arr = _series_values(x)
    f, h = _raw_moments(spec.family, theta.values, arr)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(h))):
        raise NumericalError("conditional moments overflowed to non-finite values")
    floor = spec.h_floor if h_floor is None else h_floor
    return ConditionalMoments(f, np.maximum(h, floor))


# --------------------------------------------------------------------------
# stationarity region


def _impulse(num: np.ndarray, den: np.ndarray, rho: float, extra: int) -> np.ndarray:
    if rho <= 0.0:
        length = extra + 1
    else:
        length = int(math.ceil(math.log(_SERIES_EPS) / math.log(rho))) + extra + 1
    length = min(max(length, extra + 1), _MAX_SERIES)
    imp = np.zeros(length)
    imp[0] = 1.0
    return lfilter(num, den, imp)


def _spectral_radius(poly_tail: np.ndarray) -> float:
    """Largest root modulus of z^k - c1 z^(k-1) - ... - ck for coefs c."""
    c = np.asarray(poly_tail, dtype=float)
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        return 0.0
    c = c[: nz[-1] + 1]
    return float(np.max(np.abs(np.roots(np.concatenate(([1.0], -c))))))


def _abs_series_sum(series: np.ndarray, rho: float) -> float:
    s = float(np.sum(np.abs(series)))
    if rho > 0.0 and series.size:
        s += abs(float(series[-1])) * rho / (1.0 - rho)
    return s


def check_theta_r(spec: ModelSpec, theta: ParamVector, xi_norm_r: float) -> ThetaRCheck:
    """Membership of ``theta`` in the moment-``r`` stationarity region.

    ``xi_norm_r`` is the ``L^r`` norm of the innovation law. The check uses the
    closed-form Lipschitz coefficient sums of each family and returns whether
    the contraction inequality holds strictly together with its slack
    ``1 - lhs``. Non-stationary GARCH blocks and non-invertible MA parts give
    ``margin = -inf``.
    """
    spec._check_theta(theta)
    if not (xi_norm_r > 0 and math.isfinite(xi_norm_r)):
        raise ValueError(f"xi_norm_r must be a positive finite number, got {xi_norm_r}")
    parts = _split(spec.family, theta.values)
    k = spec.family.kind
    if k == "AR":
        lhs = float(np.sum(np.abs(parts["phi"])))
    elif k == "ARCH":
        lhs = xi_norm_r**2 * float(np.sum(np.abs(parts["a"])))
    elif k == "GARCH":
        sb = float(np.sum(np.abs(parts["b"])))
        if sb >= 1.0:
            return ThetaRCheck(False, -math.inf)
        lhs = xi_norm_r**2 * float(np.sum(np.abs(parts["a"]))) / (1.0 - sb)
    elif k == "TARCH":
        lhs = xi_norm_r * float(np.sum(np.maximum(np.abs(parts["ap"]), np.abs(parts["am"]))))
    else:
        lhs = _arma_garch_lhs(parts, xi_norm_r)
        if lhs is None:
            return ThetaRCheck(False, -math.inf)
    margin = 1.0 - lhs
    return ThetaRCheck(bool(margin > 0.0), margin)


def _arma_garch_lhs(parts: dict[str, np.ndarray], xi_norm_r: float) -> float | None:
    ar, ma = parts["ar"], parts["ma"]
    a, b = np.abs(parts["a"]), np.abs(parts["b"])
    # Residual in terms of the past: eps_t = sum_i c_i X_{t-i}, c_0 = 1, and the
    # AR(inf) mean coefficients are pi_k = -c_k.
    rho_ma = _spectral_radius(-ma)
    if rho_ma >= 1.0:
        return None
    c = _impulse(np.concatenate(([1.0], -ar)), np.concatenate(([1.0], ma)), rho_ma, ar.size + ma.size)
    sum_pi = _abs_series_sum(c[1:], rho_ma)
    if not np.any(a):
        return sum_pi
    sb = float(np.sum(b))
    if sb >= 1.0:
        return None
    # The scale is Lipschitz in past residuals with coefficients sqrt(psi_j);
    # composing with the residual filter multiplies the two coefficient sums.
    rho_b = _spectral_radius(b)
    psi = _impulse(np.concatenate(([0.0], a)), np.concatenate(([1.0], -b)), rho_b, a.size + b.size)
    sum_sqrt_psi = _abs_series_sum(np.sqrt(np.abs(psi[1:])), math.sqrt(rho_b))
    return sum_pi + xi_norm_r * sum_sqrt_psi * (1.0 + sum_pi)


# --------------------------------------------------------------------------
# collections


def build_collection(
    family: ModelFamily,
    mode: str = "hierarchical",
    box: tuple[Sequence[float], Sequence[float]] | None = None,
) -> list[ModelSpec]:
    """Candidate models inside the ambient ``family``.

    ``hierarchical`` gives one model per valid order tuple up to
    ``family.orders`` (all lags up to each order active). ``exhaustive`` gives
    one model per subset of optional coordinates; subsets with GARCH lags but
    no ARCH lag are skipped as non-identifiable.
    """
    lower, upper = (None, None) if box is None else box
    specs: list[ModelSpec] = []
    seen: set[tuple[int, ...]] = set()
    if mode == "hierarchical":
        for orders in itertools.product(*(range(o + 1) for o in family.orders)):
            if not _orders_valid(family.kind, orders):
                continue
            active = family.active_for_orders(orders)
            if active not in seen:
                seen.add(active)
                specs.append(ModelSpec(family, active, lower, upper))
    elif mode == "exhaustive":
        optional = family.optional
        if len(optional) > _MAX_EXHAUSTIVE:
            raise ValueError(
                f"exhaustive collection over {len(optional)} optional coordinates refused "
                f"(limit {_MAX_EXHAUSTIVE})"
            )
        roles = family.coord_roles
        for size in range(len(optional) + 1):
            for subset in itertools.combinations(optional, size):
                if any(roles[i] == "b" for i in subset) and not any(roles[i] == "a" for i in subset):
                    continue
                active = tuple(sorted(set(family.mandatory) | set(subset)))
                if active not in seen:
                    seen.add(active)
                    specs.append(ModelSpec(family, active, lower, upper))
    else:
        raise ValueError(f"mode must be 'hierarchical' or 'exhaustive', got {mode!r}")
    return specs
