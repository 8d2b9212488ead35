"""Run configuration: TOML (or JSON) with [stack], [demand], [scheme], [grid], [mc], [option]."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, fields, replace
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import pde
from .analysis import TABLE5_LEVELS
from .dynamics import JacobiParams
from .errors import CarbonStackError, ConfigError
from .scheme import Mechanism, SchemeParams, TwoPeriodScheme
from .stack import StackParams, max_emissions_rate

ALIGNMENTS = ("stretch", "snap", "exact")
CFL_POLICIES = ("raise", "warn", "ignore")


@dataclass(frozen=True)
class GridSettings:
    n_d: int = 24
    n_e: int = 400
    n_t: int = 1760
    cap_alignment: str = "stretch"
    price_levels: int = pde.DEFAULT_PRICE_LEVELS
    cfl: str = "raise"


@dataclass(frozen=True)
class McSettings:
    n_paths: int = 100_000
    n_steps: int = 365
    seed: int = 20240101
    batch_size: int = 8192
    penalties: tuple = (0.0, 25.0, 50.0, 75.0, 100.0, 150.0, 200.0)
    price_levels: int = 257
    demand_cells: int = 3000


@dataclass(frozen=True)
class OptionSettings:
    strike: float = 50.0
    maturity: float | None = None  # None: half the compliance period


@dataclass(frozen=True)
class AnalysisSettings:
    levels: tuple = (1, 2, 3, 4)
    cfl: str = "warn"


@dataclass(frozen=True)
class Config:
    stack: StackParams
    demand: JacobiParams
    scheme: SchemeParams
    two_period: TwoPeriodScheme
    grid: GridSettings
    mc: McSettings
    option: OptionSettings
    analysis: AnalysisSettings
    source: str = "<defaults>"

    @property
    def e_required(self):
        """Cumulative emissions bound over one compliance period."""
        return max_emissions_rate(self.stack) * self.scheme.horizon

    def build_grid(self, scheme: SchemeParams | None = None, caps=None):
        """Mesh from [grid] with the caps placed on nodes per ``cap_alignment``.

        Returns ``(grid, scheme)``; ``snap`` moves the scheme's cap.
        """
        s = self.scheme if scheme is None else scheme
        g = self.grid
        caps = [s.e_cap] if caps is None else list(caps)
        e_req = max_emissions_rate(self.stack) * s.horizon
        if g.cap_alignment == "stretch":
            grid = pde.grid_for_caps(g.n_d, g.n_e, g.n_t, caps, e_req, self.stack.xi_max, s.horizon)
        else:
            grid = pde.Grid(g.n_d, g.n_e, g.n_t, self.stack.xi_max, e_req, s.horizon)
            if g.cap_alignment == "snap":
                s = replace(s, e_cap=pde.snap_cap(s.e_cap, grid.delta_e))
        return grid, replace(s, e_max=max(s.e_max, grid.e_max))

    def build_two_period_grid(self):
        tp = self.two_period
        g = self.grid
        p1, p2 = tp.period1, tp.period2
        e_req = max_emissions_rate(self.stack) * max(p1.horizon, p2.horizon)
        if g.cap_alignment == "stretch":
            grid = pde.grid_for_caps(g.n_d, g.n_e, g.n_t, [p1.e_cap, p2.e_cap], e_req,
                                     self.stack.xi_max, p1.horizon)
        else:
            grid = pde.Grid(g.n_d, g.n_e, g.n_t, self.stack.xi_max, e_req, p1.horizon)
            if g.cap_alignment == "snap":
                p1 = replace(p1, e_cap=pde.snap_cap(p1.e_cap, grid.delta_e))
                p2 = replace(p2, e_cap=pde.snap_cap(p2.e_cap, grid.delta_e))
        e_max = max(p1.e_max, grid.e_max)
        tp = replace(tp, period1=replace(p1, e_max=e_max), period2=replace(p2, e_max=e_max))
        return grid, tp

    def option_maturity(self):
        m = self.option.maturity
        return self.scheme.horizon / 2 if m is None else m

    def to_dict(self):
        tp = self.two_period
        return {
            "source": self.source,
            "stack": asdict(self.stack),
            "demand": asdict(self.demand),
            "scheme": {
                **asdict(self.scheme),
                "mechanism": tp.mechanism.value,
                "extra_penalty": tp.extra_penalty,
                "period1": _period_dict(tp.period1),
                "period2": _period_dict(tp.period2),
            },
            "grid": asdict(self.grid),
            "mc": {**asdict(self.mc), "penalties": list(self.mc.penalties)},
            "option": {**asdict(self.option), "maturity": self.option_maturity()},
            "analysis": {**asdict(self.analysis), "levels": list(self.analysis.levels)},
        }


def _period_dict(p):
    return {"e_cap": p.e_cap, "penalty": p.penalty, "horizon": p.horizon}


def _take(section, cls, name, exclude=()):
    section = dict(section or {})
    allowed = {f.name for f in fields(cls)} - set(exclude)
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"[{name}]: unknown keys {', '.join(unknown)}")
    return section


def _build(cls, kwargs, name):
    try:
        return cls(**kwargs)
    except CarbonStackError as exc:
        raise ConfigError(f"[{name}]: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from None


def from_mapping(data, source="<mapping>") -> Config:
    """Validate a parsed configuration tree."""
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a table")
    known = {"stack", "demand", "scheme", "grid", "mc", "option", "analysis"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(unknown)}")

    stack = _build(StackParams, _take(data.get("stack"), StackParams, "stack"), "stack")

    demand_kw = _take(data.get("demand"), JacobiParams, "demand")
    if "xi_max" in demand_kw and demand_kw["xi_max"] != stack.xi_max:
        raise ConfigError("[demand].xi_max must equal [stack].xi_max")
    demand_kw["xi_max"] = stack.xi_max
    demand = _build(JacobiParams, demand_kw, "demand")
    problems = demand.violations()
    if problems:
        raise ConfigError("[demand]: " + "; ".join(problems))

    sch = dict(data.get("scheme") or {})
    p1_raw = sch.pop("period1", None)
    p2_raw = sch.pop("period2", None)
    mechanism = sch.pop("mechanism", "bw")
    extra = sch.pop("extra_penalty", None)
    sch = _take(sch, SchemeParams, "scheme")
    horizon = float(sch.get("horizon", 1.0))
    e_bound = max_emissions_rate(stack) * horizon
    sch.setdefault("e_max", e_bound)
    if sch["e_max"] < e_bound * (1 - 1e-12):
        raise ConfigError(f"[scheme].e_max {sch['e_max']:g} below the emissions bound {e_bound:g}")
    scheme = _build(SchemeParams, sch, "scheme")

    def period(raw, name):
        raw = _take(raw, SchemeParams, name, exclude=("rate", "e_max"))
        kw = {"e_cap": scheme.e_cap, "penalty": scheme.penalty, "horizon": scheme.horizon, **raw}
        kw["rate"] = scheme.rate
        return kw

    k1, k2 = period(p1_raw, "scheme.period1"), period(p2_raw, "scheme.period2")
    e_two = max(max_emissions_rate(stack) * max(k1["horizon"], k2["horizon"]), scheme.e_max)
    k1["e_max"] = k2["e_max"] = e_two
    try:
        mech = Mechanism(mechanism)
    except ValueError:
        raise ConfigError(f"[scheme].mechanism must be 'bw' or 'bbw', not {mechanism!r}") from None
    p1 = _build(SchemeParams, k1, "scheme.period1")
    p2 = _build(SchemeParams, k2, "scheme.period2")
    two = _build(TwoPeriodScheme, {"period1": p1, "period2": p2, "extra_penalty": extra,
                                   "mechanism": mech}, "scheme")

    grid = _build(GridSettings, _take(data.get("grid"), GridSettings, "grid"), "grid")
    if grid.cap_alignment not in ALIGNMENTS:
        raise ConfigError(f"[grid].cap_alignment must be one of {ALIGNMENTS}")
    if grid.cfl not in CFL_POLICIES:
        raise ConfigError(f"[grid].cfl must be one of {CFL_POLICIES}")
    for name in ("n_d", "n_e", "n_t", "price_levels"):
        v = getattr(grid, name)
        if not isinstance(v, int) or v < (2 if name in ("n_d", "price_levels") else 1):
            raise ConfigError(f"[grid].{name} must be a positive integer")

    mc_kw = _take(data.get("mc"), McSettings, "mc")
    if "penalties" in mc_kw:
        mc_kw["penalties"] = tuple(float(x) for x in mc_kw["penalties"])
    mc = _build(McSettings, mc_kw, "mc")
    for name in ("n_paths", "n_steps", "batch_size", "price_levels", "demand_cells"):
        v = getattr(mc, name)
        if not isinstance(v, int) or v < 1:
            raise ConfigError(f"[mc].{name} must be a positive integer")
    if not isinstance(mc.seed, int) or mc.seed < 0:
        raise ConfigError("[mc].seed must be a non-negative integer")
    if any(p < 0 for p in mc.penalties):
        raise ConfigError("[mc].penalties must be >= 0")

    option = _build(OptionSettings, _take(data.get("option"), OptionSettings, "option"), "option")
    if option.strike < 0:
        raise ConfigError("[option].strike must be >= 0")
    if option.maturity is not None and not 0 <= option.maturity <= scheme.horizon:
        raise ConfigError(f"[option].maturity must lie in [0, {scheme.horizon:g}]")

    an_kw = _take(data.get("analysis"), AnalysisSettings, "analysis")
    if "levels" in an_kw:
        an_kw["levels"] = tuple(int(x) for x in an_kw["levels"])
    analysis = _build(AnalysisSettings, an_kw, "analysis")
    valid = {lv.label for lv in TABLE5_LEVELS}
    if not set(analysis.levels) <= valid or len(analysis.levels) < 2:
        raise ConfigError("[analysis].levels must list at least two of 1..5")
    if analysis.cfl not in CFL_POLICIES:
        raise ConfigError(f"[analysis].cfl must be one of {CFL_POLICIES}")

    return Config(stack, demand, scheme, two, grid, mc, option, analysis, source)


def load(path=None) -> Config:
    """Read a ``.toml`` or ``.json`` file; ``None`` loads the bundled reference setup."""
    if path is None:
        text = resources.files("carbonstack").joinpath("data/reference.toml").read_text("utf-8")
        return from_mapping(_parse_toml(text, "reference.toml"), "reference.toml")
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
    if p.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: {exc}") from None
    else:
        data = _parse_toml(text, str(p))
    return from_mapping(data, str(p))


def _parse_toml(text, name):
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def default() -> Config:
    return load(None)


__all__ = [
    "AnalysisSettings", "Config", "GridSettings", "McSettings", "OptionSettings", "default",
    "from_mapping", "load",
]

