"""Key-value run configuration.

The format is a sequence of ``[section]`` headers followed by
``key = value`` lines; ``#`` starts a comment. Lists are comma separated.
Every key is validated: unknown sections or keys are errors, reported with
their line number. Recognised sections and keys::

    [run]        seed, verbosity
    [model]      family, orders, active, lower, upper, theta
    [simulate]   n, burn_in, law, df, r, allow_nonstationary
    [collection] family, orders, mode, lower, upper
    [selection]  penalty
    [optimizer]  n_random_starts, tol_x, tol_f, max_evals_per_dim, seed
    [mc]         n_grid, replications, master_seed

``theta`` lists either all ``d`` coordinates or only the active ones.
Active indices are 0-based positions in the family's coordinate layout.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from typing import Any

from .errors import ConfigError
from .models import ModelFamily, ModelSpec, ParamVector, build_collection
from .qmle import FitOptions
from .selection import BIC, PenaltyRule, parse_penalty
from .simulate import DEFAULT_BURN_IN, InnovationLaw

__all__ = [
    "CollectionSettings",
    "MCSettings",
    "RunConfig",
    "SimulateSettings",
    "parse_config",
    "serialize_config",
]

_SECTIONS = {
    "run": {"seed", "verbosity"},
    "model": {"family", "orders", "active", "lower", "upper", "theta"},
    "simulate": {"n", "burn_in", "law", "df", "r", "allow_nonstationary"},
    "collection": {"family", "orders", "mode", "lower", "upper"},
    "selection": {"penalty"},
    "optimizer": {"n_random_starts", "tol_x", "tol_f", "max_evals_per_dim", "seed"},
    "mc": {"n_grid", "replications", "master_seed"},
}

_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")


@dataclass(frozen=True)
class SimulateSettings:
    n: int = 1000
    burn_in: int = DEFAULT_BURN_IN
    law: InnovationLaw = field(default_factory=InnovationLaw)
    r: float | None = None
    allow_nonstationary: bool = False


@dataclass(frozen=True)
class CollectionSettings:
    family: ModelFamily
    mode: str = "hierarchical"
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None

    def build(self) -> list[ModelSpec]:
        box = None if self.lower is None and self.upper is None else (
            self.lower or self.family.default_box()[0],
            self.upper or self.family.default_box()[1],
        )
        return build_collection(self.family, self.mode, box)


@dataclass(frozen=True)
class MCSettings:
    n_grid: tuple[int, ...]
    replications: int = 100
    master_seed: int | None = None


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; sections absent from the text are ``None``."""

    seed: int = 0
    verbosity: int = 1
    model: ModelSpec | None = None
    theta: ParamVector | None = None
    simulate: SimulateSettings | None = None
    collection: CollectionSettings | None = None
    penalties: tuple[PenaltyRule, ...] = (BIC(),)
    optimizer: FitOptions = field(default_factory=FitOptions)
    mc: MCSettings | None = None
    subcommand: str | None = field(default=None, compare=False)

    def require(self, *sections: str) -> None:
        for name in sections:
            if getattr(self, name) is None:
                raise ConfigError(f"the {self.subcommand or 'requested'} command needs a [{name}] section")
        if "model" in sections and self.subcommand in ("simulate", "mc") and self.theta is None:
            raise ConfigError("[model] needs 'theta' for this command")


# --------------------------------------------------------------------------
# parsing


def _tokenize(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: dict[str, tuple[str, int]] | None = None
    current_name = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            current_name = m.group(1).lower()
            if current_name not in _SECTIONS:
                raise ConfigError(f"unknown section [{current_name}]", lineno)
            if current_name in sections:
                raise ConfigError(f"duplicate section [{current_name}]", lineno)
            current = sections[current_name] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key not in _SECTIONS[current_name]:
            raise ConfigError(f"unknown key '{key}' in [{current_name}]", lineno)
        if key in current:
            raise ConfigError(f"duplicate key '{key}' in [{current_name}]", lineno)
        current[key] = (value, lineno)
    return sections


class _Section:
    def __init__(self, name: str, items: dict[str, tuple[str, int]], header_line: int | None = None):
        self.name = name
        self.items = items
        self.first_line = min((ln for _, ln in items.values()), default=header_line)

    def has(self, key: str) -> bool:
        return key in self.items

    def line(self, key: str | None = None) -> int | None:
        if key is not None and key in self.items:
            return self.items[key][1]
        return self.first_line

    def raw(self, key: str) -> str:
        if key not in self.items:
            raise ConfigError(f"[{self.name}] is missing required key '{key}'", self.first_line)
        return self.items[key][0]

    def get(self, key: str, conv, default: Any = None) -> Any:
        if key not in self.items:
            return default
        value, lineno = self.items[key]
        try:
            return conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for '{key}' in [{self.name}]: {exc}", lineno) from None


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _split_top(text: str) -> list[str]:
    """Split on commas outside parentheses."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur).strip())
    return [s for s in out if s]


def _model_spec(sec: _Section) -> ModelSpec:
    mapping = {k: v for k, (v, _) in sec.items.items() if k != "theta"}
    try:
        return ModelSpec.from_mapping(mapping)
    except ValueError as exc:
        # a bound violation is only possible through an explicit lower box
        line = sec.line("lower") if "Assumption D" in str(exc) else sec.line()
        raise ConfigError(f"[{sec.name}]: {exc}", line) from None


def _theta(spec: ModelSpec, sec: _Section) -> ParamVector | None:
    values = sec.get("theta", _floats)
    if values is None:
        return None
    try:
        if len(values) == spec.d:
            return spec.param(values)
        if len(values) == spec.dim:
            return spec.embed(values)
        raise ValueError(f"expected {spec.d} (full) or {spec.dim} (active) values, got {len(values)}")
    except ValueError as exc:
        raise ConfigError(f"bad theta in [model]: {exc}", sec.line("theta")) from None


def parse_config(text: str, subcommand: str | None = None) -> RunConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        On syntax errors, unknown keys, bad values or violated model
        invariants; the message carries the line number.
    """
    raw = _tokenize(text)
    secs = {name: _Section(name, items) for name, items in raw.items()}
    kwargs: dict[str, Any] = {"subcommand": subcommand}

    if "run" in secs:
        s = secs["run"]
        kwargs["seed"] = s.get("seed", int, 0)
        kwargs["verbosity"] = s.get("verbosity", int, 1)
        if not 0 <= kwargs["seed"] < 2**64:
            raise ConfigError("seed must be in [0, 2**64)", s.line("seed"))

    if "model" in secs:
        spec = _model_spec(secs["model"])
        kwargs["model"] = spec
        kwargs["theta"] = _theta(spec, secs["model"])

    if "simulate" in secs:
        s = secs["simulate"]
        kind = s.get("law", lambda v: v.strip().lower(), "gaussian")
        df = s.get("df", float)
        try:
            law = InnovationLaw(kind, df)
        except ValueError as exc:
            raise ConfigError(f"[simulate]: {exc}", s.line("law")) from None
        settings = SimulateSettings(
            n=s.get("n", int, 1000),
            burn_in=s.get("burn_in", int, DEFAULT_BURN_IN),
            law=law,
            r=s.get("r", float),
            allow_nonstationary=s.get("allow_nonstationary", _bool, False),
        )
        if settings.n < 1:
            raise ConfigError("n must be >= 1", s.line("n"))
        if settings.burn_in < 0:
            raise ConfigError("burn_in must be >= 0", s.line("burn_in"))
        if settings.r is not None and not settings.r > 4:
            raise ConfigError("moment order r must exceed 4", s.line("r"))
        kwargs["simulate"] = settings

    if "collection" in secs:
        s = secs["collection"]
        try:
            family = ModelFamily(s.raw("family").strip().upper(), _ints(s.raw("orders")))
            settings = CollectionSettings(
                family=family,
                mode=s.get("mode", lambda v: v.strip().lower(), "hierarchical"),
                lower=s.get("lower", _floats),
                upper=s.get("upper", _floats),
            )
            settings.build()
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            line = s.line("lower") if "Assumption D" in str(exc) else s.line()
            raise ConfigError(f"[collection]: {exc}", line) from None
        kwargs["collection"] = settings

    if "selection" in secs:
        s = secs["selection"]
        items = _split_top(s.raw("penalty"))
        if not items:
            raise ConfigError("[selection] penalty list is empty", s.line("penalty"))
        try:
            kwargs["penalties"] = tuple(parse_penalty(p) for p in items)
        except ValueError as exc:
            raise ConfigError(str(exc), s.line("penalty")) from None

    if "optimizer" in secs:
        s = secs["optimizer"]
        defaults = FitOptions()
        try:
            kwargs["optimizer"] = FitOptions(
                n_random_starts=s.get("n_random_starts", int, defaults.n_random_starts),
                tol_x=s.get("tol_x", float, defaults.tol_x),
                tol_f=s.get("tol_f", float, defaults.tol_f),
                max_evals_per_dim=s.get("max_evals_per_dim", int, defaults.max_evals_per_dim),
                seed=s.get("seed", int, defaults.seed),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"[optimizer]: {exc}", s.line()) from None

    if "mc" in secs:
        s = secs["mc"]
        grid = s.get("n_grid", _ints)
        if not grid:
            raise ConfigError("[mc] needs a non-empty n_grid", s.line("n_grid"))
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("n_grid must be strictly increasing", s.line("n_grid"))
        reps = s.get("replications", int, 100)
        if reps < 1:
            raise ConfigError("replications must be >= 1", s.line("replications"))
        kwargs["mc"] = MCSettings(grid, reps, s.get("master_seed", int))

    return RunConfig(**kwargs)


# --------------------------------------------------------------------------
# serialisation


def _fmt(values) -> str:
    return ", ".join(repr(float(v)) if isinstance(v, float) else str(v) for v in values)


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config` (defaults are written out explicitly)."""
    lines = ["[run]", f"seed = {cfg.seed}", f"verbosity = {cfg.verbosity}", ""]
    if cfg.model is not None:
        lines.append("[model]")
        lines += [f"{k} = {v}" for k, v in cfg.model.to_mapping().items()]
        if cfg.theta is not None:
            lines.append(f"theta = {_fmt(float(v) for v in cfg.theta.values)}")
        lines.append("")
    if cfg.simulate is not None:
        s = cfg.simulate
        lines += ["[simulate]", f"n = {s.n}", f"burn_in = {s.burn_in}", f"law = {s.law.kind}"]
        if s.law.df is not None:
            lines.append(f"df = {s.law.df!r}")
        if s.r is not None:
            lines.append(f"r = {s.r!r}")
        lines += [f"allow_nonstationary = {str(s.allow_nonstationary).lower()}", ""]
    if cfg.collection is not None:
        c = cfg.collection
        lines += [
            "[collection]",
            f"family = {c.family.kind}",
            f"orders = {_fmt(c.family.orders)}",
            f"mode = {c.mode}",
        ]
        if c.lower is not None:
            lines.append(f"lower = {_fmt(float(v) for v in c.lower)}")
        if c.upper is not None:
            lines.append(f"upper = {_fmt(float(v) for v in c.upper)}")
        lines.append("")
    lines += ["[selection]", "penalty = " + ", ".join(p.to_string() for p in cfg.penalties), ""]
    o = cfg.optimizer
    lines += ["[optimizer]"] + [f"{f.name} = {getattr(o, f.name)!r}" for f in fields(o)] + [""]
    if cfg.mc is not None:
        lines += ["[mc]", f"n_grid = {_fmt(cfg.mc.n_grid)}", f"replications = {cfg.mc.replications}"]
        if cfg.mc.master_seed is not None:
            lines.append(f"master_seed = {cfg.mc.master_seed}")
        lines.append("")
    return "\n".join(lines)
