"""Scenario definition, validation, and loading.

A scenario is a single JSON document describing the whole grid: sources,
converters, optional battery, loads, the DC bus, named time profiles, and
solver settings. Units are fixed SI throughout (V, A, Ohm, H, F, W, s,
W/m^2, m/s); the file carries bare numbers. See docs/scenario_format.md
for the schema reference and complete examples.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import DanglingReference, ParseError, ValidationError

_REQUIRED = object()

SOURCE_KINDS = ("pv", "wind_mg")
CONVERTER_KINDS = ("buck", "boost", "bidirectional")
LOAD_KINDS = ("resistive", "constant_power")
CONTROLLER_TYPES = ("pi", "mppt")
INTERPOLATIONS = ("step", "linear")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Profile:
    """Piecewise time series; evaluation clamps at both ends."""

    points: tuple[tuple[float, float], ...]
    interpolation: str = "step"


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_end: float
    log_every: int = 1

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class PvSourceSpec:
    name: str
    i_ph_stc: float
    i_0: float
    n_vt: float
    r_s: float
    r_sh: float
    g_stc: float = 1000.0
    irradiance_profile: Optional[str] = None
    irradiance: float = 1000.0  # used when no profile is bound

    kind = "pv"


@dataclass(frozen=True)
class WindSourceSpec:
    name: str
    k_e: float
    r_a: float
    k_w: float
    tau: float = 0.0
    wind_profile: Optional[str] = None
    wind: float = 0.0  # m/s, used when no profile is bound

    kind = "wind_mg"


@dataclass(frozen=True)
class PiControllerSpec:
    k_p: float
    k_i: float
    duty_min: float = 0.0
    duty_max: float = 1.0

    type = "pi"


@dataclass(frozen=True)
class MpptControllerSpec:
    delta_d: float = 0.01
    period: float = 2.0
    initial_duty: float = 0.5
    duty_min: float = 0.05
    duty_max: float = 0.95
    deadband_w: float = 1e-4

    type = "mppt"


@dataclass(frozen=True)
class ConverterSpec:
    name: str
    kind: str  # buck | boost | bidirectional
    source: str  # source name, or "battery" for the bidirectional converter
    l: float
    c: float
    r_nom: float
    r_loss: float = 0.0  # series loss resistance, 0 = lossless
    rating_w: Optional[float] = None
    diode_rating_a: float = 30.0
    i_l0: float = 0.0
    v_c0: float = 0.0
    controller: Optional[PiControllerSpec | MpptControllerSpec] = None


@dataclass(frozen=True)
class ManagementSpec:
    """Bidirectional-converter management: hysteresis FSM plus bus-voltage PI."""

    band: float  # hysteresis half-width around bus v_ref, V
    i_charge_max: float
    i_discharge_max: float
    k_p: float = 2.0
    k_i: float = 50.0
    reentry_margin: float = 0.02
    current_loop_steps: float = 10.0  # inner current-loop time constant, in dt units


@dataclass(frozen=True)
class BatterySpec:
    capacity_ah: float
    soc: float
    v_full: float
    v_empty: float
    r_int: float = 0.0
    soc_min: float = 0.2
    soc_max: float = 0.95
    management: Optional[ManagementSpec] = None


@dataclass(frozen=True)
class LoadSpec:
    name: str
    kind: str  # resistive | constant_power
    resistance: Optional[float] = None
    power: Optional[float] = None
    v_min: Optional[float] = None  # CPL low-voltage current guard
    profile: Optional[str] = None  # overrides resistance (Ohm) or power (W)


@dataclass(frozen=True)
class BusSpec:
    v_ref: float
    capacitance: float
    v_initial: Optional[float] = None
    diode_drop_v: float = 0.0


@dataclass(frozen=True)
class Scenario:
    sources: tuple[PvSourceSpec | WindSourceSpec, ...]
    converters: tuple[ConverterSpec, ...]
    battery: Optional[BatterySpec]
    loads: tuple[LoadSpec, ...]
    bus: BusSpec
    profiles: dict[str, Profile] = field(default_factory=dict)
    sim: SimConfig = field(default_factory=lambda: SimConfig(dt=5e-5, t_end=1.0))

    def source_by_name(self, name: str):
        for s in self.sources:
            if s.name == name:
                return s
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Profile evaluation
# ---------------------------------------------------------------------------


def eval_profile(p: Profile, t: float) -> float:
    """Value of the profile at time t; clamped to the first/last point outside."""
    pts = p.points
    if t <= pts[0][0]:
        return pts[0][1]
    if t >= pts[-1][0]:
        return pts[-1][1]
    # rightmost point with time <= t
    idx = bisect_right([q[0] for q in pts], t) - 1
    t0, v0 = pts[idx]
    if p.interpolation == "step":
        return v0
    t1, v1 = pts[idx + 1]
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0)


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------


def _expect_obj(value: Any, ctx: str) -> dict:
    if not isinstance(value, dict):
        raise ValidationError(ctx, "expected a JSON object")
    return value


def _take(obj: dict, ctx: str, key: str, default: Any = _REQUIRED) -> Any:
    if key in obj:
        return obj.pop(key)
    if default is _REQUIRED:
        raise ValidationError(f"{ctx}.{key}", "missing required field")
    return default


def _num(obj: dict, ctx: str, key: str, default: Any = _REQUIRED, *,
         positive: bool = False, nonneg: bool = False) -> Any:
    raw = _take(obj, ctx, key, default)
    if raw is None and default is None:
        return None
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ValidationError(f"{ctx}.{key}", "expected a number")
    val = float(raw)
    if positive and not val > 0:
        raise ValidationError(f"{ctx}.{key}", f"must be > 0, got {val}")
    if nonneg and not val >= 0:
        raise ValidationError(f"{ctx}.{key}", f"must be >= 0, got {val}")
    return val


def _string(obj: dict, ctx: str, key: str, default: Any = _REQUIRED,
            choices: Optional[tuple] = None) -> Any:
    raw = _take(obj, ctx, key, default)
    if raw is None and default is None:
        return None
    if not isinstance(raw, str):
        raise ValidationError(f"{ctx}.{key}", "expected a string")
    if choices and raw not in choices:
        raise ValidationError(f"{ctx}.{key}", f"must be one of {choices}, got {raw!r}")
    return raw


def _reject_unknown(obj: dict, ctx: str) -> None:
    if obj:
        key = sorted(obj)[0]
        raise ValidationError(f"{ctx}.{key}", "unknown field")


# ---------------------------------------------------------------------------
# Section parsers
# ---------------------------------------------------------------------------


def _parse_profile(name: str, raw: Any) -> Profile:
    ctx = f"profiles.{name}"
    obj = dict(_expect_obj(raw, ctx))
    pts_raw = _take(obj, ctx, "points")
    interp = _string(obj, ctx, "interpolation", "step", INTERPOLATIONS)
    _reject_unknown(obj, ctx)
    if not isinstance(pts_raw, list) or not pts_raw:
        raise ValidationError(f"{ctx}.points", "expected a non-empty list of [t, value] pairs")
    points = []
    for i, pair in enumerate(pts_raw):
        if (not isinstance(pair, list) or len(pair) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)):
            raise ValidationError(f"{ctx}.points[{i}]", "expected a [t, value] number pair")
        points.append((float(pair[0]), float(pair[1])))
    for i in range(1, len(points)):
        if points[i][0] <= points[i - 1][0]:
            raise ValidationError(f"{ctx}.points[{i}]", "times must be strictly increasing")
    return Profile(points=tuple(points), interpolation=interp)


def _parse_source(i: int, raw: Any):
    ctx = f"sources[{i}]"
    obj = dict(_expect_obj(raw, ctx))
    name = _string(obj, ctx, "name")
    kind = _string(obj, ctx, "kind", choices=SOURCE_KINDS)
    if kind == "pv":
        spec = PvSourceSpec(
            name=name,
            i_ph_stc=_num(obj, ctx, "i_ph_stc", positive=True),
            i_0=_num(obj, ctx, "i_0", positive=True),
            n_vt=_num(obj, ctx, "n_vt", positive=True),
            r_s=_num(obj, ctx, "r_s", positive=True),
            r_sh=_num(obj, ctx, "r_sh", positive=True),
            g_stc=_num(obj, ctx, "g_stc", 1000.0, positive=True),
            irradiance_profile=_string(obj, ctx, "irradiance_profile", None),
            irradiance=_num(obj, ctx, "irradiance", 1000.0, nonneg=True),
        )
    else:
        spec = WindSourceSpec(
            name=name,
            k_e=_num(obj, ctx, "k_e", positive=True),
            r_a=_num(obj, ctx, "r_a", positive=True),
            k_w=_num(obj, ctx, "k_w", positive=True),
            tau=_num(obj, ctx, "tau", 0.0, nonneg=True),
            wind_profile=_string(obj, ctx, "wind_profile", None),
            wind=_num(obj, ctx, "wind", 0.0, nonneg=True),
        )
    _reject_unknown(obj, ctx)
    return spec


def _parse_controller(ctx: str, raw: Any):
    obj = dict(_expect_obj(raw, ctx))
    ctype = _string(obj, ctx, "type", choices=CONTROLLER_TYPES)
    if ctype == "pi":
        spec = PiControllerSpec(
            k_p=_num(obj, ctx, "k_p"),
            k_i=_num(obj, ctx, "k_i"),
            duty_min=_num(obj, ctx, "duty_min", 0.0, nonneg=True),
            duty_max=_num(obj, ctx, "duty_max", 1.0, positive=True),
        )
    else:
        spec = MpptControllerSpec(
            delta_d=_num(obj, ctx, "delta_d", 0.01, positive=True),
            period=_num(obj, ctx, "period", 2.0, positive=True),
            initial_duty=_num(obj, ctx, "initial_duty", 0.5),
            duty_min=_num(obj, ctx, "duty_min", 0.05, nonneg=True),
            duty_max=_num(obj, ctx, "duty_max", 0.95, positive=True),
            deadband_w=_num(obj, ctx, "deadband_w", 1e-4, nonneg=True),
        )
    _reject_unknown(obj, ctx)
    if not spec.duty_min < spec.duty_max:
        raise ValidationError(f"{ctx}.duty_min", "duty_min must be < duty_max")
    return spec


def _parse_converter(i: int, raw: Any) -> ConverterSpec:
    ctx = f"converters[{i}]"
    obj = dict(_expect_obj(raw, ctx))
    controller_raw = _take(obj, ctx, "controller", None)
    spec = ConverterSpec(
        name=_string(obj, ctx, "name"),
        kind=_string(obj, ctx, "kind", choices=CONVERTER_KINDS),
        source=_string(obj, ctx, "source"),
        l=_num(obj, ctx, "l", positive=True),
        c=_num(obj, ctx, "c", positive=True),
        r_nom=_num(obj, ctx, "r_nom", positive=True),
        r_loss=_num(obj, ctx, "r_loss", 0.0, nonneg=True),
        rating_w=_num(obj, ctx, "rating_w", None),
        diode_rating_a=_num(obj, ctx, "diode_rating_a", 30.0, positive=True),
        i_l0=_num(obj, ctx, "i_l0", 0.0),
        v_c0=_num(obj, ctx, "v_c0", 0.0, nonneg=True),
        controller=_parse_controller(f"{ctx}.controller", controller_raw)
        if controller_raw is not None else None,
    )
    _reject_unknown(obj, ctx)
    return spec


def _parse_battery(raw: Any, v_ref: float) -> BatterySpec:
    ctx = "battery"
    obj = dict(_expect_obj(raw, ctx))
    mgmt_raw = _take(obj, ctx, "management", None)
    mgmt = None
    if mgmt_raw is not None:
        mctx = "battery.management"
        mobj = dict(_expect_obj(mgmt_raw, mctx))
        mgmt = ManagementSpec(
            band=_num(mobj, mctx, "band", 0.01 * v_ref, positive=True),
            i_charge_max=_num(mobj, mctx, "i_charge_max", positive=True),
            i_discharge_max=_num(mobj, mctx, "i_discharge_max", positive=True),
            k_p=_num(mobj, mctx, "k_p", 2.0, positive=True),
            k_i=_num(mobj, mctx, "k_i", 50.0, nonneg=True),
            reentry_margin=_num(mobj, mctx, "reentry_margin", 0.02, nonneg=True),
            current_loop_steps=_num(mobj, mctx, "current_loop_steps", 10.0, positive=True),
        )
        _reject_unknown(mobj, mctx)
    spec = BatterySpec(
        capacity_ah=_num(obj, ctx, "capacity_ah", positive=True),
        soc=_num(obj, ctx, "soc", nonneg=True),
        v_full=_num(obj, ctx, "v_full", positive=True),
        v_empty=_num(obj, ctx, "v_empty", positive=True),
        r_int=_num(obj, ctx, "r_int", 0.0, nonneg=True),
        soc_min=_num(obj, ctx, "soc_min", 0.2, nonneg=True),
        soc_max=_num(obj, ctx, "soc_max", 0.95, positive=True),
        management=mgmt,
    )
    _reject_unknown(obj, ctx)
    if not spec.v_empty < spec.v_full:
        raise ValidationError("battery.v_empty", "must be < v_full")
    if not spec.soc_min < spec.soc_max <= 1.0:
        raise ValidationError("battery.soc_min", "need 0 <= soc_min < soc_max <= 1")
    if not 0.0 <= spec.soc <= 1.0:
        raise ValidationError("battery.soc", "initial soc must lie in [0, 1]")
    return spec


def _parse_load(i: int, raw: Any) -> LoadSpec:
    ctx = f"loads[{i}]"
    obj = dict(_expect_obj(raw, ctx))
    name = _string(obj, ctx, "name")
    kind = _string(obj, ctx, "kind", choices=LOAD_KINDS)
    if kind == "resistive":
        spec = LoadSpec(
            name=name, kind=kind,
            resistance=_num(obj, ctx, "resistance", positive=True),
            profile=_string(obj, ctx, "profile", None),
        )
    else:
        spec = LoadSpec(
            name=name, kind=kind,
            power=_num(obj, ctx, "power", nonneg=True),
            v_min=_num(obj, ctx, "v_min", positive=True),
            profile=_string(obj, ctx, "profile", None),
        )
    _reject_unknown(obj, ctx)
    return spec


def _parse_bus(raw: Any) -> BusSpec:
    ctx = "bus"
    obj = dict(_expect_obj(raw, ctx))
    spec = BusSpec(
        v_ref=_num(obj, ctx, "v_ref", positive=True),
        capacitance=_num(obj, ctx, "capacitance", positive=True),
        v_initial=_num(obj, ctx, "v_initial", None),
        diode_drop_v=_num(obj, ctx, "diode_drop_v", 0.0, nonneg=True),
    )
    _reject_unknown(obj, ctx)
    return spec


def _parse_sim(raw: Any) -> SimConfig:
    ctx = "sim"
    obj = dict(_expect_obj(raw, ctx))
    dt = _num(obj, ctx, "dt", positive=True)
    t_end = _num(obj, ctx, "t_end", positive=True)
    log_every_raw = _take(obj, ctx, "log_every", 1)
    _reject_unknown(obj, ctx)
    if dt > 1e-3:
        raise ValidationError("sim.dt", f"must be <= 1e-3 s, got {dt}")
    if t_end < dt:
        raise ValidationError("sim.t_end", "must be >= dt")
    if not isinstance(log_every_raw, int) or isinstance(log_every_raw, bool) or log_every_raw < 1:
        raise ValidationError("sim.log_every", "expected an integer >= 1")
    n = round(t_end / dt)
    if n < 1 or abs(n * dt - t_end) > 1e-9 * max(t_end, 1.0):
        raise ValidationError("sim.t_end", f"t_end/dt = {t_end / dt} is not an integer step count")
    return SimConfig(dt=dt, t_end=t_end, log_every=log_every_raw)


# ---------------------------------------------------------------------------
# Cross-component checks
# ---------------------------------------------------------------------------


def _check_references(sc: Scenario) -> None:
    source_names = {s.name for s in sc.sources}
    names_seen: set[str] = set()
    for kind, items in (("sources", sc.sources), ("converters", sc.converters),
                        ("loads", sc.loads)):
        for item in items:
            if item.name in names_seen:
                raise ValidationError(f"{kind}", f"duplicate component name {item.name!r}")
            names_seen.add(item.name)

    def check_profile(pname: Optional[str], referrer: str) -> None:
        if pname is not None and pname not in sc.profiles:
            raise DanglingReference(pname, referrer)

    n_bidir = 0
    for i, conv in enumerate(sc.converters):
        ctx = f"converters[{i}] ({conv.name})"
        if conv.kind == "bidirectional":
            n_bidir += 1
            if conv.source != "battery":
                raise ValidationError(f"converters[{i}].source",
                                      "bidirectional converter must be bound to 'battery'")
            if sc.battery is None:
                raise DanglingReference("battery", ctx)
            if conv.controller is not None:
                raise ValidationError(f"converters[{i}].controller",
                                      "bidirectional converter is driven by battery.management")
        else:
            if conv.source not in source_names:
                raise DanglingReference(conv.source, ctx)
            if conv.controller is None:
                raise ValidationError(f"converters[{i}].controller",
                                      "buck/boost converter needs a 'pi' or 'mppt' controller")
            if conv.kind == "buck" and conv.controller.type == "mppt":
                raise ValidationError(f"converters[{i}].controller",
                                      "mppt tracking is supported on boost converters only")
    if n_bidir > 1:
        raise ValidationError("converters", "at most one bidirectional converter is allowed")

    bound = {c.source for c in sc.converters}
    for s in sc.sources:
        if s.name not in bound:
            raise ValidationError("sources", f"source {s.name!r} is not bound to any converter")

    for s in sc.sources:
        if s.kind == "pv":
            check_profile(s.irradiance_profile, f"source {s.name}")
        else:
            check_profile(s.wind_profile, f"source {s.name}")
    for load in sc.loads:
        check_profile(load.profile, f"load {load.name}")

    if sc.battery is not None and sc.battery.management is None:
        for conv in sc.converters:
            if conv.kind == "bidirectional":
                raise ValidationError("battery.management",
                                      "required when a bidirectional converter is present")


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def scenario_from_dict(doc: dict) -> Scenario:
    """Build and validate a Scenario from a parsed JSON document."""
    obj = dict(_expect_obj(doc, "scenario"))
    profiles_raw = _take(obj, "scenario", "profiles", {})
    sources_raw = _take(obj, "scenario", "sources", [])
    converters_raw = _take(obj, "scenario", "converters", [])
    battery_raw = _take(obj, "scenario", "battery", None)
    loads_raw = _take(obj, "scenario", "loads", [])
    bus_raw = _take(obj, "scenario", "bus")
    sim_raw = _take(obj, "scenario", "sim")
    _reject_unknown(obj, "scenario")

    for key, raw in (("sources", sources_raw), ("converters", converters_raw),
                     ("loads", loads_raw)):
        if not isinstance(raw, list):
            raise ValidationError(key, "expected a list")
    profiles_obj = _expect_obj(profiles_raw, "profiles")

    bus = _parse_bus(bus_raw)
    sc = Scenario(
        sources=tuple(_parse_source(i, s) for i, s in enumerate(sources_raw)),
        converters=tuple(_parse_converter(i, c) for i, c in enumerate(converters_raw)),
        battery=_parse_battery(battery_raw, bus.v_ref) if battery_raw is not None else None,
        loads=tuple(_parse_load(i, ld) for i, ld in enumerate(loads_raw)),
        bus=bus,
        profiles={name: _parse_profile(name, p) for name, p in profiles_obj.items()},
        sim=_parse_sim(sim_raw),
    )
    _check_references(sc)
    return sc


def load_scenario(path: str) -> Scenario:
    """Load and validate a scenario file. Pure function of the file bytes."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    return scenario_from_dict(doc)
