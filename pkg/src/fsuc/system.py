"""Static network and resource data model.

A system is stored as one JSON document plus a CSV side file holding all
time profiles (loads, renewable forecasts, DSFR base points), keyed by
bus/plant id.  All fields are kept in physical units (MW, MVA, s, h);
per-unit values are derived on demand against ``s_base``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import FsucError


class SystemParseError(FsucError):
    """Raised when a system file cannot be parsed."""


class SystemValidationError(FsucError):
    """Raised when a parsed system violates invariants.

    Attributes:
        violations: list of human-readable violation descriptions.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(
            "system validation failed:\n  " + "\n  ".join(self.violations)
        )


@dataclass
class Bus:
    id: str
    load_profile: np.ndarray  # MW per period
    angle_ref: bool = False


@dataclass
class TransmissionLine:
    from_bus: str
    to_bus: str
    susceptance: float  # per-unit
    capacity: float  # MW


@dataclass
class ThermalGenerator:
    id: str
    bus: str
    p_max: float  # MW
    p_min: float  # MW
    capacity: float  # MVA
    inertia: float  # s, on own capacity
    damping_share: float  # per-unit; carried but unused by the aggregate model
    droop_factor: float  # per-unit R
    droop_gain_bounds: tuple[float, float]
    governor_tc: float  # s
    turbine_tc: float  # s
    reheater_tc: float  # s (0 = no reheater)
    hp_fraction: float  # per-unit (0 = no reheater)
    ramp_rate: float  # MW/min
    min_on: int  # h
    min_off: int  # h
    startup_cost: float  # $
    reserve_cost_spin: float  # $/MWh
    reserve_cost_sfc: float  # $/MWh
    cost_segments: list[tuple[float, float]]  # (slope $/MWh, intercept $/h)


@dataclass
class DemandSideResource:
    id: str
    bus: str
    capacity: float  # MW
    base_point_profile: np.ndarray  # MW per period
    droop_factor: float  # per-unit R
    droop_gain_bounds: tuple[float, float]
    converter_tc: float  # s
    reserve_cost: float  # $/MWh


@dataclass
class RenewablePlant:
    id: str
    bus: str
    kind: str  # "wind" | "solar"
    installed_capacity: float  # MW
    forecast_profile: np.ndarray  # MW per period


@dataclass
class PowerSystem:
    name: str
    buses: list[Bus]
    lines: list[TransmissionLine]
    generators: list[ThermalGenerator]
    dsfrs: list[DemandSideResource]
    renewables: list[RenewablePlant]
    s_base: float  # MVA
    f0: float = 50.0  # Hz
    horizon: int = 24
    period_hours: float = 1.0
    _bus_index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._bus_index = {b.id: i for i, b in enumerate(self.buses)}

    # -- lookups ---------------------------------------------------------
    def bus(self, bus_id: str) -> Bus:
        return self.buses[self._bus_index[bus_id]]

    def generator(self, gen_id: str) -> ThermalGenerator:
        for g in self.generators:
            if g.id == gen_id:
                return g
        raise KeyError(gen_id)

    def dsfr(self, dsfr_id: str) -> DemandSideResource:
        for d in self.dsfrs:
            if d.id == dsfr_id:
                return d
        raise KeyError(dsfr_id)

    # -- derived quantities ------------------------------------------------
    def total_load(self) -> np.ndarray:
        """System load per period, MW."""
        out = np.zeros(self.horizon)
        for b in self.buses:
            out += b.load_profile
        return out

    def total_renewable(self) -> np.ndarray:
        out = np.zeros(self.horizon)
        for r in self.renewables:
            out += r.forecast_profile
        return out

    def net_load(self) -> np.ndarray:
        return self.total_load() - self.total_renewable()

    def to_pu(self, mw) -> np.ndarray:
        """Convert MW quantities to per-unit on s_base."""
        return np.asarray(mw, dtype=float) / self.s_base

    def from_pu(self, pu) -> np.ndarray:
        return np.asarray(pu, dtype=float) * self.s_base

    def gain_pu(self, resource_id: str, droop_gain: float) -> float:
        """Per-unit response gain (S/S_base)*(K/R) of one resource."""
        try:
            g = self.generator(resource_id)
            return g.capacity / self.s_base * droop_gain / g.droop_factor
        except KeyError:
            d = self.dsfr(resource_id)
            return d.capacity / self.s_base * droop_gain / d.droop_factor


def validate(system: PowerSystem) -> list[str]:
    """Return a list of invariant violations (empty when the system is valid).

    Each entry names the offending entity and field; violations are data,
    not exceptions.
    """
    v: list[str] = []
    horizon = system.horizon

    if system.s_base <= 0:
        v.append("system: s_base must be positive")
    if system.horizon < 1:
        v.append("system: horizon must be at least one period")
    if system.period_hours <= 0:
        v.append("system: period_hours must be positive")

    seen_bus = set()
    n_ref = 0
    for b in system.buses:
        if b.id in seen_bus:
            v.append(f"bus {b.id}: duplicate id")
        seen_bus.add(b.id)
        if len(b.load_profile) != horizon:
            v.append(f"bus {b.id}: load_profile length {len(b.load_profile)} != horizon {horizon}")
        if np.any(np.asarray(b.load_profile) < 0):
            v.append(f"bus {b.id}: load_profile has negative entries")
        n_ref += bool(b.angle_ref)
    if n_ref != 1:
        v.append(f"system: expected exactly one reference bus, found {n_ref}")

    for i, ln in enumerate(system.lines):
        tag = f"line {ln.from_bus}-{ln.to_bus}"
        if ln.from_bus == ln.to_bus:
            v.append(f"{tag}: self-loop")
        if ln.from_bus not in seen_bus or ln.to_bus not in seen_bus:
            v.append(f"{tag}: endpoint references unknown bus")
        if ln.capacity <= 0:
            v.append(f"{tag}: capacity must be positive")
        if ln.susceptance <= 0:
            v.append(f"{tag}: susceptance must be positive")

    seen_res = set()
    for g in system.generators:
        tag = f"generator {g.id}"
        if g.id in seen_res:
            v.append(f"{tag}: duplicate resource id")
        seen_res.add(g.id)
        if g.bus not in seen_bus:
            v.append(f"{tag}: unknown bus {g.bus}")
        if not (0 <= g.p_min <= g.p_max <= g.capacity):
            v.append(f"{tag}: requires 0 <= p_min <= p_max <= capacity")
        if g.inertia <= 0:
            v.append(f"{tag}: inertia must be positive")
        if g.droop_factor <= 0:
            v.append(f"{tag}: droop_factor must be positive")
        lo, hi = g.droop_gain_bounds
        if not (0 <= lo <= hi):
            v.append(f"{tag}: droop_gain_bounds must satisfy 0 <= lo <= hi")
        if g.governor_tc <= 0 or g.turbine_tc <= 0:
            v.append(f"{tag}: governor_tc and turbine_tc must be positive")
        # No reheater is encoded as T_re = 0 and F_re = 0.
        if g.reheater_tc < 0 or not (0 <= g.hp_fraction <= 1):
            v.append(f"{tag}: reheater_tc >= 0 and 0 <= hp_fraction <= 1 required")
        if (g.reheater_tc == 0) != (g.hp_fraction == 0):
            v.append(f"{tag}: reheater_tc and hp_fraction must be zero together")
        if g.ramp_rate <= 0:
            v.append(f"{tag}: ramp_rate must be positive")
        if g.min_on < 0 or g.min_off < 0:
            v.append(f"{tag}: min_on/min_off must be nonnegative")
        if not g.cost_segments:
            v.append(f"{tag}: cost_segments empty")
        else:
            slopes = [s for s, _ in g.cost_segments]
            if any(b < a for a, b in zip(slopes, slopes[1:])):
                v.append(f"{tag}: cost_segments slopes must be nondecreasing (convex)")

    for d in system.dsfrs:
        tag = f"dsfr {d.id}"
        if d.id in seen_res:
            v.append(f"{tag}: duplicate resource id")
        seen_res.add(d.id)
        if d.bus not in seen_bus:
            v.append(f"{tag}: unknown bus {d.bus}")
        if d.capacity <= 0:
            v.append(f"{tag}: capacity must be positive")
        if len(d.base_point_profile) != horizon:
            v.append(f"{tag}: base_point_profile length != horizon")
        prof = np.asarray(d.base_point_profile)
        if np.any(prof < 0) or np.any(prof > d.capacity):
            v.append(f"{tag}: base points must lie in [0, capacity]")
        if d.converter_tc <= 0:
            v.append(f"{tag}: converter_tc must be positive")
        if d.droop_factor <= 0:
            v.append(f"{tag}: droop_factor must be positive")
        lo, hi = d.droop_gain_bounds
        if not (0 <= lo <= hi):
            v.append(f"{tag}: droop_gain_bounds must satisfy 0 <= lo <= hi")

    for r in system.renewables:
        tag = f"renewable {r.id}"
        if r.id in seen_res:
            v.append(f"{tag}: duplicate resource id")
        seen_res.add(r.id)
        if r.bus not in seen_bus:
            v.append(f"{tag}: unknown bus {r.bus}")
        if r.kind not in ("wind", "solar"):
            v.append(f"{tag}: kind must be wind or solar")
        if len(r.forecast_profile) != horizon:
            v.append(f"{tag}: forecast_profile length != horizon")
        prof = np.asarray(r.forecast_profile)
        if np.any(prof < 0) or np.any(prof > r.installed_capacity):
            v.append(f"{tag}: forecast must lie in [0, installed_capacity]")

    # Connectivity: every bus reachable from the reference bus.
    if system.buses and n_ref == 1:
        adj: dict[str, set[str]] = {b.id: set() for b in system.buses}
        for ln in system.lines:
            if ln.from_bus in adj and ln.to_bus in adj:
                adj[ln.from_bus].add(ln.to_bus)
                adj[ln.to_bus].add(ln.from_bus)
        ref = next(b.id for b in system.buses if b.angle_ref)
        reached = {ref}
        stack = [ref]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in reached:
                    reached.add(nb)
                    stack.append(nb)
        for b in system.buses:
            if b.id not in reached:
                v.append(f"bus {b.id}: bus not connected to the reference bus")

    # Adequacy flag: committable capacity vs peak net load.
    if system.generators and system.horizon >= 1:
        p_max_total = sum(g.p_max for g in system.generators)
        peak = float(np.max(system.net_load())) if system.buses else 0.0
        if p_max_total < peak:
            v.append(
                f"system: total p_max {p_max_total:.1f} MW below peak net load {peak:.1f} MW"
            )
    return v


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

_PROFILE_KINDS = ("load", "renewable", "dsfr_base")


def _fmt(x: float) -> str:
    """Shortest exact decimal for a float (repr round-trips float64)."""
    return repr(float(x))


def save_system(system: PowerSystem, path) -> None:
    """Write a system as ``<path>`` JSON plus a profiles CSV next to it."""
    path = Path(path)
    profiles_name = path.stem + "_profiles.csv"
    doc = {
        "name": system.name,
        "s_base_mva": system.s_base,
        "f0_hz": system.f0,
        "horizon": system.horizon,
        "period_hours": system.period_hours,
        "profiles": profiles_name,
        "buses": [{"id": b.id, "reference": bool(b.angle_ref)} for b in system.buses],
        "lines": [
            {
                "from": ln.from_bus,
                "to": ln.to_bus,
                "susceptance_pu": ln.susceptance,
                "capacity_mw": ln.capacity,
            }
            for ln in system.lines
        ],
        "generators": [
            {
                "id": g.id,
                "bus": g.bus,
                "p_max_mw": g.p_max,
                "p_min_mw": g.p_min,
                "capacity_mva": g.capacity,
                "inertia_s": g.inertia,
                "damping_share_pu": g.damping_share,
                "droop_factor_pu": g.droop_factor,
                "droop_gain_bounds": list(g.droop_gain_bounds),
                "governor_tc_s": g.governor_tc,
                "turbine_tc_s": g.turbine_tc,
                "reheater_tc_s": g.reheater_tc,
                "hp_fraction_pu": g.hp_fraction,
                "ramp_rate_mw_per_min": g.ramp_rate,
                "min_on_h": g.min_on,
                "min_off_h": g.min_off,
                "startup_cost": g.startup_cost,
                "reserve_cost_spin": g.reserve_cost_spin,
                "reserve_cost_sfc": g.reserve_cost_sfc,
                "cost_segments": [list(seg) for seg in g.cost_segments],
            }
            for g in system.generators
        ],
        "dsfrs": [
            {
                "id": d.id,
                "bus": d.bus,
                "capacity_mw": d.capacity,
                "droop_factor_pu": d.droop_factor,
                "droop_gain_bounds": list(d.droop_gain_bounds),
                "converter_tc_s": d.converter_tc,
                "reserve_cost": d.reserve_cost,
            }
            for d in system.dsfrs
        ],
        "renewables": [
            {
                "id": r.id,
                "bus": r.bus,
                "kind": r.kind,
                "installed_capacity_mw": r.installed_capacity,
            }
            for r in system.renewables
        ],
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")

    header = ["id", "kind"] + [f"p{t}" for t in range(system.horizon)]
    with open(path.parent / profiles_name, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for b in system.buses:
            w.writerow([b.id, "load"] + [_fmt(x) for x in b.load_profile])
        for r in system.renewables:
            w.writerow([r.id, "renewable"] + [_fmt(x) for x in r.forecast_profile])
        for d in system.dsfrs:
            w.writerow([d.id, "dsfr_base"] + [_fmt(x) for x in d.base_point_profile])


def load_system(path) -> PowerSystem:
    """Load and validate a system JSON (+ profiles CSV).

    Raises SystemParseError on malformed files and SystemValidationError
    (carrying the violation list) when invariants fail.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemParseError(f"cannot parse system file {path}: {exc}") from exc

    try:
        horizon = int(doc["horizon"])
        profiles: dict[tuple[str, str], np.ndarray] = {}
        prof_path = path.parent / doc["profiles"]
        with open(prof_path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            if header[:2] != ["id", "kind"]:
                raise SystemParseError(f"{prof_path}: bad profile header {header[:2]}")
            for row in rd:
                if not row:
                    continue
                rid, kind = row[0], row[1]
                if kind not in _PROFILE_KINDS:
                    raise SystemParseError(f"{prof_path}: unknown profile kind {kind!r}")
                profiles[(rid, kind)] = np.array([float(x) for x in row[2:]])

        def profile(rid, kind, owner):
            try:
                return profiles[(rid, kind)]
            except KeyError:
                raise SystemParseError(f"missing {kind} profile for {owner} {rid}")

        buses = [
            Bus(
                id=str(b["id"]),
                load_profile=profile(str(b["id"]), "load", "bus"),
                angle_ref=bool(b.get("reference", False)),
            )
            for b in doc["buses"]
        ]
        lines = [
            TransmissionLine(
                from_bus=str(ln["from"]),
                to_bus=str(ln["to"]),
                susceptance=float(ln["susceptance_pu"]),
                capacity=float(ln["capacity_mw"]),
            )
            for ln in doc["lines"]
        ]
        gens = [
            ThermalGenerator(
                id=str(g["id"]),
                bus=str(g["bus"]),
                p_max=float(g["p_max_mw"]),
                p_min=float(g["p_min_mw"]),
                capacity=float(g["capacity_mva"]),
                inertia=float(g["inertia_s"]),
                damping_share=float(g.get("damping_share_pu", 0.0)),
                droop_factor=float(g["droop_factor_pu"]),
                droop_gain_bounds=(
                    float(g["droop_gain_bounds"][0]),
                    float(g["droop_gain_bounds"][1]),
                ),
                governor_tc=float(g["governor_tc_s"]),
                turbine_tc=float(g["turbine_tc_s"]),
                reheater_tc=float(g["reheater_tc_s"]),
                hp_fraction=float(g["hp_fraction_pu"]),
                ramp_rate=float(g["ramp_rate_mw_per_min"]),
                min_on=int(g["min_on_h"]),
                min_off=int(g["min_off_h"]),
                startup_cost=float(g["startup_cost"]),
                reserve_cost_spin=float(g["reserve_cost_spin"]),
                reserve_cost_sfc=float(g["reserve_cost_sfc"]),
                cost_segments=[(float(a), float(b)) for a, b in g["cost_segments"]],
            )
            for g in doc["generators"]
        ]
        dsfrs = [
            DemandSideResource(
                id=str(d["id"]),
                bus=str(d["bus"]),
                capacity=float(d["capacity_mw"]),
                base_point_profile=profile(str(d["id"]), "dsfr_base", "dsfr"),
                droop_factor=float(d["droop_factor_pu"]),
                droop_gain_bounds=(
                    float(d["droop_gain_bounds"][0]),
                    float(d["droop_gain_bounds"][1]),
                ),
                converter_tc=float(d["converter_tc_s"]),
                reserve_cost=float(d["reserve_cost"]),
            )
            for d in doc["dsfrs"]
        ]
        renewables = [
            RenewablePlant(
                id=str(r["id"]),
                bus=str(r["bus"]),
                kind=str(r["kind"]),
                installed_capacity=float(r["installed_capacity_mw"]),
                forecast_profile=profile(str(r["id"]), "renewable", "renewable"),
            )
            for r in doc["renewables"]
        ]
        system = PowerSystem(
            name=str(doc.get("name", path.stem)),
            buses=buses,
            lines=lines,
            generators=gens,
            dsfrs=dsfrs,
            renewables=renewables,
            s_base=float(doc["s_base_mva"]),
            f0=float(doc.get("f0_hz", 50.0)),
            horizon=horizon,
            period_hours=float(doc.get("period_hours", 1.0)),
        )
    except SystemParseError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise SystemParseError(f"cannot parse system file {path}: {exc!r}") from exc

    violations = validate(system)
    if violations:
        raise SystemValidationError(violations)
    return system
