"""Penalised-contrast model selection.

Each candidate is scored by ``-2 * L_n(theta_hat(m)) + |m| * kappa_n`` and
the minimiser is chosen. Ties go to the smaller model, then to the
lexicographically smaller active set, then to the earlier collection entry.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Sequence

from .errors import CausalSelError, SelectionFailed
from .models import ModelSpec
from .qmle import FitOptions, FitResult, fit

__all__ = [
    "AIC",
    "BIC",
    "Custom",
    "LogLogPower",
    "PenaltyRule",
    "PowerLaw",
    "SelectionEntry",
    "SelectionReport",
    "choose",
    "criterion",
    "fit_collection",
    "parse_penalty",
    "score",
    "select",
]


class PenaltyRule:
    """Base class of the regularisation sequences ``kappa_n``."""

    name: str = ""

    def kappa(self, n: int) -> float:
        raise NotImplementedError

    def __call__(self, n: int) -> float:
        k = float(self.kappa(int(n)))
        if not (k > 0 and math.isfinite(k)):
            raise ValueError(f"{self.to_string()} gives non-positive kappa {k} at n={n}")
        return k

    @property
    def theorem_conditions(self) -> dict[str, bool | None]:
        """Whether ``kappa_n / log log n -> inf`` and ``kappa_n / n -> 0`` hold
        for the sequence (``None`` when the rule cannot tell)."""
        raise NotImplementedError

    def to_string(self) -> str:
        return self.name


@dataclass(frozen=True)
class BIC(PenaltyRule):
    name = "BIC"

    def kappa(self, n: int) -> float:
        return math.log(n)

    @property
    def theorem_conditions(self):
        return {"kappa_over_loglog_n_diverges": True, "kappa_over_n_vanishes": True}


@dataclass(frozen=True)
class AIC(PenaltyRule):
    name = "AIC"

    def kappa(self, n: int) -> float:
        return 2.0

    @property
    def theorem_conditions(self):
        return {"kappa_over_loglog_n_diverges": False, "kappa_over_n_vanishes": True}


@dataclass(frozen=True)
class LogLogPower(PenaltyRule):
    """``kappa_n = c * (log log n)^(1 + delta)``."""

    c: float = 1.0
    delta: float = 0.5
    name = "loglog"

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError("LogLogPower needs c > 0")

    def kappa(self, n: int) -> float:
        ll = math.log(math.log(n)) if n > 1 else -math.inf
        if not ll > 0:
            raise ValueError(f"log log n is not positive at n={n}")
        return self.c * ll ** (1.0 + self.delta)

    @property
    def theorem_conditions(self):
        return {"kappa_over_loglog_n_diverges": self.delta > 0, "kappa_over_n_vanishes": True}

    def to_string(self) -> str:
        return f"loglog({self.c!r}, {self.delta!r})"


@dataclass(frozen=True)
class PowerLaw(PenaltyRule):
    """``kappa_n = n^alpha`` with ``0 < alpha < 1``."""

    alpha: float = 0.5
    name = "power"

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise ValueError("PowerLaw needs 0 < alpha < 1")

    def kappa(self, n: int) -> float:
        return float(n) ** self.alpha

    @property
    def theorem_conditions(self):
        return {"kappa_over_loglog_n_diverges": True, "kappa_over_n_vanishes": True}

    def to_string(self) -> str:
        return f"power({self.alpha!r})"


@dataclass(frozen=True)
class Custom(PenaltyRule):
    """Tabulated ``kappa_n``, given as ``((n, kappa), ...)``."""

    table: tuple[tuple[int, float], ...] = ()
    name = "custom"

    def __post_init__(self) -> None:
        table = tuple(sorted((int(n), float(k)) for n, k in self.table))
        if not table:
            raise ValueError("Custom penalty needs at least one (n, kappa) entry")
        if len({n for n, _ in table}) != len(table):
            raise ValueError("Custom penalty has duplicate n entries")
        object.__setattr__(self, "table", table)

    def kappa(self, n: int) -> float:
        for m, k in self.table:
            if m == n:
                return k
        raise ValueError(f"custom penalty has no entry for n={n}")

    @property
    def theorem_conditions(self):
        return {"kappa_over_loglog_n_diverges": None, "kappa_over_n_vanishes": None}

    def to_string(self) -> str:
        return "custom(" + "; ".join(f"{n}:{k!r}" for n, k in self.table) + ")"


_CALL = re.compile(r"^\s*([A-Za-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_penalty(text: str) -> PenaltyRule:
    """Parse ``BIC``, ``AIC``, ``loglog(c, delta)``, ``power(alpha)`` or
    ``custom(n1:k1; n2:k2; ...)``."""
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot parse penalty {text!r}")
    head, args = m.group(1).lower(), m.group(2)
    try:
        if head in ("bic", "aic"):
            if args not in (None, ""):
                raise ValueError(f"{head.upper()} takes no arguments")
            return BIC() if head == "bic" else AIC()
        if head == "loglog":
            vals = [float(a) for a in args.split(",")] if args else []
            return LogLogPower(*vals)
        if head == "power":
            vals = [float(a) for a in args.split(",")] if args else []
            return PowerLaw(*vals)
        if head == "custom":
            pairs = []
            for item in (args or "").split(";"):
                if item.strip():
                    n, k = item.split(":")
                    pairs.append((int(n), float(k)))
            return Custom(tuple(pairs))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad penalty {text!r}: {exc}") from None
    raise ValueError(f"unknown penalty {head!r}")


def criterion(l_hat: float, model_dim: int, kappa_n: float) -> float:
    """Penalised contrast ``-2 * l_hat + model_dim * kappa_n``."""
    if not kappa_n > 0:
        raise ValueError(f"kappa_n must be positive, got {kappa_n}")
    if not (math.isfinite(l_hat) and math.isfinite(kappa_n)):
        raise ValueError("criterion inputs must be finite")
    return -2.0 * l_hat + model_dim * kappa_n


def _raw_criterion(l_hat: float, model_dim: int, kappa_n: float) -> float:
    if not math.isfinite(l_hat):
        return math.inf
    return -2.0 * l_hat + model_dim * kappa_n


def choose(criteria: Sequence[float], specs: Sequence[ModelSpec]) -> int:
    """Index of the minimiser under the documented tie-break."""
    if not criteria:
        raise ValueError("nothing to choose from")
    if not any(math.isfinite(c) for c in criteria):
        raise SelectionFailed("every candidate model failed")
    return min(range(len(criteria)), key=lambda i: (criteria[i], specs[i].dim, specs[i].active, i))


@dataclass(frozen=True, eq=False)
class SelectionEntry:
    spec: ModelSpec
    fit: FitResult | None
    criterion: float
    error: str | None = None

    @property
    def feasible(self) -> bool:
        return self.fit is not None and math.isfinite(self.criterion)


@dataclass(frozen=True, eq=False)
class SelectionReport:
    entries: tuple[SelectionEntry, ...]
    chosen: int
    kappa_n: float
    penalty: PenaltyRule
    n: int
    theorem_conditions: dict[str, bool | None] = field(default_factory=dict)

    @property
    def chosen_spec(self) -> ModelSpec:
        return self.entries[self.chosen].spec

    @property
    def chosen_fit(self) -> FitResult:
        return self.entries[self.chosen].fit  # type: ignore[return-value]

    def to_dict(self) -> dict[str, Any]:
        models = []
        for i, e in enumerate(self.entries):
            models.append(
                {
                    "id": i,
                    "name": e.spec.name,
                    "family": e.spec.family.kind,
                    "orders": list(e.spec.family.orders),
                    "active": list(e.spec.active),
                    "dim": e.spec.dim,
                    "feasible": e.feasible,
                    "theta_hat": None if e.fit is None else e.fit.theta_hat.values.tolist(),
                    "l_hat": None if e.fit is None else e.fit.l_hat,
                    "criterion": e.criterion if math.isfinite(e.criterion) else None,
                    "converged": None if e.fit is None else e.fit.converged,
                    "at_boundary": None if e.fit is None else e.fit.at_boundary,
                    "chosen": i == self.chosen,
                    "error": e.error,
                }
            )
        return {
            "penalty": self.penalty.to_string(),
            "kappa_n": self.kappa_n,
            "n": self.n,
            "chosen": self.chosen,
            "chosen_name": self.chosen_spec.name,
            "theorem_conditions": dict(self.theorem_conditions),
            "models": models,
        }


def _check_collection(collection: Sequence[ModelSpec]) -> None:
    if not collection:
        raise ValueError("collection must not be empty")
    dims = {s.d for s in collection}
    if len(dims) != 1:
        raise ValueError(f"all models in a collection must share d, got {sorted(dims)}")


def fit_collection(collection: Sequence[ModelSpec], x, opts: FitOptions | None = None) -> list[FitResult | CausalSelError]:
    """Fit every model; failures are returned in place of the result."""
    _check_collection(collection)
    out: list[FitResult | CausalSelError] = []
    for spec in collection:
        try:
            out.append(fit(spec, x, opts))
        except CausalSelError as exc:
            out.append(exc)
    return out


def score(
    collection: Sequence[ModelSpec],
    fits: Sequence[FitResult | Exception],
    penalty: PenaltyRule,
    n: int,
) -> SelectionReport:
    """Re-score existing fits under ``penalty`` (no refitting)."""
    kappa_n = penalty(n)
    entries = []
    for spec, res in zip(collection, fits):
        if isinstance(res, FitResult):
            entries.append(SelectionEntry(spec, res, _raw_criterion(res.l_hat, spec.dim, kappa_n)))
        else:
            entries.append(SelectionEntry(spec, None, math.inf, f"{type(res).__name__}: {res}"))
    chosen = choose([e.criterion for e in entries], collection)
    return SelectionReport(tuple(entries), chosen, kappa_n, penalty, n, penalty.theorem_conditions)


def select(
    collection: Sequence[ModelSpec],
    x,
    penalty: PenaltyRule,
    opts: FitOptions | None = None,
) -> SelectionReport:
    """Fit every candidate and return the penalised-contrast minimiser."""
    fits = fit_collection(collection, x, opts)
    n = int(len(getattr(x, "values", x)))
    return score(collection, fits, penalty, n)
