"""Day-ahead unit commitment with frequency-security constraints.

Objective: startup + piecewise-linear generation cost + spinning-reserve cost
(the nomenclature's SFC reserve price is carried in the data model but the
printed objective prices spinning reserve only).  Constraint families: DC
power flow and line limits, commitment logic with minimum on/off times,
operating ranges shared with reserve, ramping, reserve composition and
system requirements, and the primary-frequency-control block (droop-gain
bounds tied to participation, the piecewise-affine nadir constraint per
tripped generator, cleared-denominator RoCoF and QSS rows, and PFC reserve
coverage).

All nonlinearities are resolved exactly: max-of-affine generation cost by
epigraph rows, RoCoF/QSS by clearing constant-limit denominators, and the
nadir constraint by the fitted min-affine surrogate evaluated on aggregates
that exclude the tripped unit and stay linear in (commitment, gains).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import FsucError
from . import solver
from .fnc import PiecewiseAffineModel
from .system import PowerSystem


class BuildError(FsucError):
    """Instance cannot be turned into a well-posed model."""


@dataclass
class UcLimits:
    """Frequency security limits, per-unit quantities on f0/s_base."""

    rocof_max: float  # pu/s
    qss_max: float  # pu
    nadir_max: float  # pu

    def __post_init__(self):
        if min(self.rocof_max, self.qss_max, self.nadir_max) <= 0:
            raise FsucError("frequency limits must be positive")


@dataclass
class InitialConditions:
    """Prior state: commitment flags, dispatch MW, and how long each unit has
    been in its current state (hours).  Units absent from the maps are off,
    long enough that no residual minimum-time constraint binds."""

    commitment: dict = field(default_factory=dict)
    power: dict = field(default_factory=dict)
    hours_in_state: dict = field(default_factory=dict)


@dataclass
class UcInstance:
    system: PowerSystem
    fnc_model: PiecewiseAffineModel
    sfc_up: np.ndarray  # MW per period
    sfc_dn: np.ndarray
    limits: UcLimits
    op_reserve_fraction: float = 0.03
    damping: float = 1.0
    initial: InitialConditions = field(default_factory=InitialConditions)
    fixed_gains: float | None = None  # comparison mode: droop gains pinned

    def __post_init__(self):
        self.sfc_up = np.asarray(self.sfc_up, dtype=float)
        self.sfc_dn = np.asarray(self.sfc_dn, dtype=float)
        t = self.system.horizon
        if self.sfc_up.shape != (t,) or self.sfc_dn.shape != (t,):
            raise FsucError("SFC requirement vectors must have horizon length")
        if np.any(self.sfc_up < 0) or np.any(self.sfc_dn < 0):
            raise FsucError("SFC requirements must be nonnegative")


@dataclass
class DispatchPlan:
    tg_ids: list
    dsfr_ids: list
    bus_ids: list
    on: np.ndarray  # (I, T) {0,1}
    start: np.ndarray
    stop: np.ndarray
    p: np.ndarray  # (I, T) MW
    gain: np.ndarray  # (R, T), TGs then DSFRs
    pfc_on: np.ndarray  # (R, T) {0,1}
    r_spin_up: np.ndarray  # (R, T) MW
    r_spin_dn: np.ndarray
    r_pfc_up: np.ndarray
    r_pfc_dn: np.ndarray
    r_sfc_up: np.ndarray
    r_sfc_dn: np.ndarray
    r_op_up: np.ndarray
    r_op_dn: np.ndarray
    theta: np.ndarray  # (N, T) rad
    objective: float
    breakdown: dict
    status: str
    gap: float | None

    @property
    def resource_ids(self) -> list:
        return list(self.tg_ids) + list(self.dsfr_ids)

    def commitment_for_period(self, t: int) -> dict:
        return {gid: bool(self.on[i, t]) for i, gid in enumerate(self.tg_ids)}

    def gains_for_period(self, t: int) -> dict:
        return {rid: float(self.gain[i, t]) for i, rid in enumerate(self.resource_ids)}

    # -- persistence ------------------------------------------------------
    def to_dir(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

        def dump(name, ids, *arrays, labels):
            with open(out / name, "w", newline="") as fh:
                w = csv.writer(fh)
                t = arrays[0].shape[1]
                w.writerow(["id", "series"] + [f"t{j}" for j in range(t)])
                for label, arr in zip(labels, arrays):
                    for i, rid in enumerate(ids):
                        w.writerow([rid, label] + [repr(float(v)) for v in arr[i]])

        dump("commitment.csv", self.tg_ids, self.on.astype(float),
             self.start.astype(float), self.stop.astype(float),
             labels=["on", "start", "stop"])
        dump("power.csv", self.tg_ids, self.p, labels=["p_mw"])
        dump("gains.csv", self.resource_ids, self.gain,
             self.pfc_on.astype(float), labels=["gain", "pfc_on"])
        dump("reserves.csv", self.resource_ids,
             self.r_spin_up, self.r_spin_dn, self.r_pfc_up, self.r_pfc_dn,
             self.r_sfc_up, self.r_sfc_dn, self.r_op_up, self.r_op_dn,
             labels=["spin_up", "spin_dn", "pfc_up", "pfc_dn",
                     "sfc_up", "sfc_dn", "op_up", "op_dn"])
        dump("angles.csv", self.bus_ids, self.theta, labels=["theta_rad"])
        with open(out / "summary.json", "w") as fh:
            json.dump(
                {
                    "objective": self.objective,
                    "breakdown": self.breakdown,
                    "status": self.status,
                    "gap": self.gap,
                },
                fh,
                indent=2,
            )
            fh.write("\n")

    @classmethod
    def from_dir(cls, out_dir) -> "DispatchPlan":
        out = Path(out_dir)

        def read(name):
            table: dict[str, dict[str, list[float]]] = {}
            order: list[str] = []
            with open(out / name, newline="") as fh:
                rd = csv.reader(fh)
                next(rd)
                for row in rd:
                    rid, label = row[0], row[1]
                    table.setdefault(label, {})[rid] = [float(v) for v in row[2:]]
                    if rid not in order:
                        order.append(rid)
            return table, order

        com, tg_ids = read("commitment.csv")
        pw, _ = read("power.csv")
        gn, res_ids = read("gains.csv")
        rs, _ = read("reserves.csv")
        th, bus_ids = read("angles.csv")
        with open(out / "summary.json") as fh:
            summary = json.load(fh)

        def arr(tbl, label, ids):
            return np.array([tbl[label][i] for i in ids])

        dsfr_ids = [r for r in res_ids if r not in set(tg_ids)]
        return cls(
            tg_ids=tg_ids,
            dsfr_ids=dsfr_ids,
            bus_ids=bus_ids,
            on=arr(com, "on", tg_ids).astype(int),
            start=arr(com, "start", tg_ids).astype(int),
            stop=arr(com, "stop", tg_ids).astype(int),
            p=arr(pw, "p_mw", tg_ids),
            gain=arr(gn, "gain", res_ids),
            pfc_on=arr(gn, "pfc_on", res_ids).astype(int),
            r_spin_up=arr(rs, "spin_up", res_ids),
            r_spin_dn=arr(rs, "spin_dn", res_ids),
            r_pfc_up=arr(rs, "pfc_up", res_ids),
            r_pfc_dn=arr(rs, "pfc_dn", res_ids),
            r_sfc_up=arr(rs, "sfc_up", res_ids),
            r_sfc_dn=arr(rs, "sfc_dn", res_ids),
            r_op_up=arr(rs, "op_up", res_ids),
            r_op_dn=arr(rs, "op_dn", res_ids),
            theta=arr(th, "theta_rad", bus_ids),
            objective=float(summary["objective"]),
            breakdown=summary["breakdown"],
            status=summary["status"],
            gap=summary["gap"],
        )


# ---------------------------------------------------------------------------
# Builder
# ---------------------------------------------------------------------------


@dataclass
class UcModel:
    """A built instance: the linear model plus variable index maps."""

    model: solver.LinearModel
    instance: UcInstance
    var: dict  # (kind, id_or_(id), t) -> variable index


def _prior_state(instance, gid):
    on = bool(instance.initial.commitment.get(gid, False))
    hours = int(instance.initial.hours_in_state.get(gid, 10 ** 6))
    power = float(instance.initial.power.get(gid, 0.0))
    return on, hours, power


def census(instance: UcInstance) -> dict:
    """Closed-form variable/row counts of the built model.

    With T periods, I TGs, J DSFRs (R = I + J), N buses, E lines, L FNC
    segments, SK total cost segments, and extra the residual min-time rows
    from the initial state (plus the J*T pinned-participation rows in
    fixed-gain comparison mode):

    variables = T*(5I + 10R + N)
    rows      = T*(N + 2E + 11I + 6R + 2J + I*L + 4 + SK) + extra

    Per TG and period: start, stop, min-on, min-off, range up/lo, ramp
    up/down, PFC-commitment, RoCoF, QSS (11 rows).  Per resource and period:
    reserve mix up/down, gain bounds up/lo, PFC reserve up/down (6 rows).
    Per DSFR and period: range up/lo (2 rows).
    """
    sys_ = instance.system
    t = sys_.horizon
    i = len(sys_.generators)
    j = len(sys_.dsfrs)
    r = i + j
    n = len(sys_.buses)
    e = len(sys_.lines)
    l = instance.fnc_model.n_segments
    sk = sum(len(g.cost_segments) for g in sys_.generators)
    extra = j * t if instance.fixed_gains is not None else 0
    for g in sys_.generators:
        on, hours, _ = _prior_state(instance, g.id)
        if on and hours < g.min_on:
            extra += min(g.min_on - hours, t)
        if not on and hours < g.min_off:
            extra += min(g.min_off - hours, t)
    return {
        "variables": t * (5 * i + 10 * r + n),
        "rows": t * (n + 2 * e + 11 * i + 6 * r + 2 * j + i * l + 4 + sk) + extra,
    }


def build(instance: UcInstance) -> UcModel:
    """Assemble the MILP.  Raises BuildError on schema mismatch or bounds
    that are already infeasible (requirements beyond the whole fleet)."""
    sys_ = instance.system
    fnc = instance.fnc_model
    if tuple(fnc.feature_names) != (
        "r_g", "r_b", "gain_weighted_hp", "gain_weighted_reheat", "inertia",
    ):
        raise BuildError(f"FNC model feature schema {fnc.feature_names} not supported")
    if abs(fnc.nadir_limit - instance.limits.nadir_max) > 1e-12:
        raise BuildError(
            f"FNC model trained for nadir limit {fnc.nadir_limit}, instance "
            f"uses {instance.limits.nadir_max}"
        )
    t_len = sys_.horizon
    gens = sys_.generators
    dsfrs = sys_.dsfrs
    resources = [(g.id, "tg", g) for g in gens] + [(d.id, "dsfr", d) for d in dsfrs]

    total_cap = sum(g.p_max for g in gens) + sum(d.capacity for d in dsfrs)
    if float(np.max(instance.sfc_up)) > total_cap or float(np.max(instance.sfc_dn)) > total_cap:
        raise BuildError("SFC requirement exceeds total fleet capability")
    load = sys_.total_load()
    net = sys_.net_load()
    dsfr_base_total = sum(d.base_point_profile for d in dsfrs) if dsfrs else np.zeros(t_len)
    if float(np.max(net - dsfr_base_total)) > sum(g.p_max for g in gens):
        raise BuildError("net load exceeds committable generation capacity")

    m = solver.LinearModel(name="uc")
    var: dict = {}

    def v(tag, rid, t, **kw):
        idx = m.add_variable(f"{tag}_{rid}_{t}", **kw)
        var[(tag, rid, t)] = idx
        return idx

    hours = float(sys_.period_hours)
    for g in gens:
        for t in range(t_len):
            v("x", g.id, t, kind=solver.BINARY, lb=0, ub=1)
            v("y", g.id, t, kind=solver.BINARY, lb=0, ub=1, obj=g.startup_cost)
            v("z", g.id, t, kind=solver.BINARY, lb=0, ub=1)
            v("p", g.id, t, lb=0, ub=g.p_max)
            v("g", g.id, t, lb=0, obj=hours)
    for rid, rkind, res in resources:
        lo_k, hi_k = res.droop_gain_bounds
        if instance.fixed_gains is not None:
            fixed = instance.fixed_gains
            if not (lo_k - 1e-9 <= fixed <= hi_k + 1e-9):
                raise BuildError(
                    f"fixed gain {fixed} outside bounds of {rid} [{lo_k}, {hi_k}]"
                )
        cost = res.reserve_cost_spin if rkind == "tg" else res.reserve_cost
        for t in range(t_len):
            v("xpfc", rid, t, kind=solver.BINARY, lb=0, ub=1)
            v("k", rid, t, lb=0, ub=hi_k if instance.fixed_gains is None else instance.fixed_gains)
            v("rsp", rid, t, lb=0, obj=cost * hours)
            v("rsm", rid, t, lb=0, obj=cost * hours)
            for kind in ("rpp", "rpm", "rfp", "rfm", "rop", "rom"):
                v(kind, rid, t, lb=0)
    ref_bus = next(b.id for b in sys_.buses if b.angle_ref)
    for b in sys_.buses:
        for t in range(t_len):
            if b.id == ref_bus:
                v("theta", b.id, t, lb=0.0, ub=0.0)
            else:
                v("theta", b.id, t, lb=-np.inf, ub=np.inf)

    # -- power balance and line limits ------------------------------------
    gens_at = {b.id: [] for b in sys_.buses}
    for g in gens:
        gens_at[g.bus].append(g)
    injection_const = {b.id: -b.load_profile.astype(float).copy() for b in sys_.buses}
    for d in dsfrs:
        injection_const[d.bus] = injection_const[d.bus] + d.base_point_profile
    for r in sys_.renewables:
        injection_const[r.bus] = injection_const[r.bus] + r.forecast_profile

    s_base = sys_.s_base
    for t in range(t_len):
        incident: dict[str, list] = {b.id: [] for b in sys_.buses}
        for ln in sys_.lines:
            coef = ln.susceptance * s_base
            incident[ln.from_bus].append((var[("theta", ln.from_bus, t)], coef))
            incident[ln.from_bus].append((var[("theta", ln.to_bus, t)], -coef))
            incident[ln.to_bus].append((var[("theta", ln.to_bus, t)], coef))
            incident[ln.to_bus].append((var[("theta", ln.from_bus, t)], -coef))
        for b in sys_.buses:
            coeffs = [(var[("p", g.id, t)], 1.0) for g in gens_at[b.id]]
            coeffs += [(j, -c) for j, c in incident[b.id]]
            m.add_row(f"bal_{b.id}_{t}", coeffs, "==", -injection_const[b.id][t])
        for li, ln in enumerate(sys_.lines):
            coef = ln.susceptance * s_base
            flow = [
                (var[("theta", ln.from_bus, t)], coef),
                (var[("theta", ln.to_bus, t)], -coef),
            ]
            m.add_row(f"cap_{li}_{t}", flow, "<=", ln.capacity)
            m.add_row(f"capn_{li}_{t}", [(j, -c) for j, c in flow], "<=", ln.capacity)

    # -- commitment logic, ranges, ramps, generation cost ------------------
    for g in gens:
        prior_on, prior_hours, prior_p = _prior_state(instance, g.id)
        ramp = g.ramp_rate * 60.0 * hours  # MW per period
        if prior_on and prior_hours < g.min_on:
            for t in range(min(g.min_on - prior_hours, t_len)):
                m.add_row(f"resid_on_{g.id}_{t}", [(var[("x", g.id, t)], 1.0)], ">=", 1.0)
        if not prior_on and prior_hours < g.min_off:
            for t in range(min(g.min_off - prior_hours, t_len)):
                m.add_row(f"resid_off_{g.id}_{t}", [(var[("x", g.id, t)], 1.0)], "<=", 0.0)
        for t in range(t_len):
            x_t = var[("x", g.id, t)]
            y_t = var[("y", g.id, t)]
            z_t = var[("z", g.id, t)]
            p_t = var[("p", g.id, t)]
            if t == 0:
                m.add_row(f"su_{g.id}_{t}", [(x_t, 1.0), (y_t, -1.0)], "<=", float(prior_on))
                m.add_row(f"sd_{g.id}_{t}", [(x_t, -1.0), (z_t, -1.0)], "<=", -float(prior_on))
            else:
                x_p = var[("x", g.id, t - 1)]
                m.add_row(f"su_{g.id}_{t}", [(x_t, 1.0), (x_p, -1.0), (y_t, -1.0)], "<=", 0.0)
                m.add_row(f"sd_{g.id}_{t}", [(x_p, 1.0), (x_t, -1.0), (z_t, -1.0)], "<=", 0.0)

            # min online: sum_{tau=t-Ton}^{t-1} x_tau >= z_t * Ton
            coeffs = [(z_t, -float(g.min_on))]
            const = 0.0
            for tau in range(t - g.min_on, t):
                if tau >= 0:
                    coeffs.append((var[("x", g.id, tau)], 1.0))
                else:
                    const += float(prior_on)
            m.add_row(f"mon_{g.id}_{t}", coeffs, ">=", -const)
            # min offline: sum (1 - x_tau) >= y_t * Toff
            coeffs = [(y_t, -float(g.min_off))]
            const = 0.0
            for tau in range(t - g.min_off, t):
                if tau >= 0:
                    coeffs.append((var[("x", g.id, tau)], -1.0))
                    const += 1.0
                else:
                    const += 1.0 - float(prior_on)
            m.add_row(f"moff_{g.id}_{t}", coeffs, ">=", -const)

            m.add_row(
                f"rngu_{g.id}_{t}",
                [(p_t, 1.0), (var[("rsp", g.id, t)], 1.0), (x_t, -g.p_max)],
                "<=",
                0.0,
            )
            m.add_row(
                f"rngl_{g.id}_{t}",
                [(p_t, 1.0), (var[("rsm", g.id, t)], -1.0), (x_t, -g.p_min)],
                ">=",
                0.0,
            )

            if t == 0:
                m.add_row(
                    f"rmpu_{g.id}_{t}",
                    [(p_t, 1.0), (y_t, -g.p_min)],
                    "<=",
                    prior_p + float(prior_on) * ramp,
                )
                m.add_row(
                    f"rmpd_{g.id}_{t}",
                    [(p_t, -1.0), (z_t, -g.p_min)],
                    "<=",
                    -prior_p + float(prior_on) * ramp,
                )
            else:
                p_p = var[("p", g.id, t - 1)]
                x_p = var[("x", g.id, t - 1)]
                m.add_row(
                    f"rmpu_{g.id}_{t}",
                    [(p_t, 1.0), (p_p, -1.0), (x_p, -ramp), (y_t, -g.p_min)],
                    "<=",
                    0.0,
                )
                m.add_row(
                    f"rmpd_{g.id}_{t}",
                    [(p_p, 1.0), (p_t, -1.0), (x_p, -ramp), (z_t, -g.p_min)],
                    "<=",
                    0.0,
                )

            for si, (slope, icept) in enumerate(g.cost_segments):
                m.add_row(
                    f"cost_{g.id}_{t}_{si}",
                    [(var[("g", g.id, t)], 1.0), (p_t, -slope), (x_t, -icept)],
                    ">=",
                    0.0,
                )

    # -- DSFR operating ranges ---------------------------------------------
    for d in dsfrs:
        for t in range(t_len):
            base = float(d.base_point_profile[t])
            m.add_row(
                f"rngu_{d.id}_{t}", [(var[("rsp", d.id, t)], 1.0)], "<=", d.capacity - base
            )
            m.add_row(
                f"rngl_{d.id}_{t}", [(var[("rsm", d.id, t)], 1.0)], "<=", base
            )

    # -- reserve composition and system requirements -----------------------
    for rid, _, _res in resources:
        for t in range(t_len):
            for up, (pfc, sfc, op) in (("rsp", ("rpp", "rfp", "rop")),
                                       ("rsm", ("rpm", "rfm", "rom"))):
                m.add_row(
                    f"mix_{up}_{rid}_{t}",
                    [
                        (var[(pfc, rid, t)], 1.0),
                        (var[(sfc, rid, t)], 1.0),
                        (var[(op, rid, t)], 1.0),
                        (var[(up, rid, t)], -1.0),
                    ],
                    "<=",
                    0.0,
                )
    for t in range(t_len):
        m.add_row(
            f"sfcu_{t}", [(var[("rfp", rid, t)], 1.0) for rid, _, _ in resources],
            ">=", float(instance.sfc_up[t]),
        )
        m.add_row(
            f"sfcd_{t}", [(var[("rfm", rid, t)], 1.0) for rid, _, _ in resources],
            ">=", float(instance.sfc_dn[t]),
        )
        op_req = instance.op_reserve_fraction * float(load[t])
        m.add_row(
            f"opu_{t}", [(var[("rop", rid, t)], 1.0) for rid, _, _ in resources],
            ">=", op_req,
        )
        m.add_row(
            f"opd_{t}", [(var[("rom", rid, t)], 1.0) for rid, _, _ in resources],
            ">=", op_req,
        )

    # -- PFC block ----------------------------------------------------------
    limits = instance.limits
    for rid, rkind, res in resources:
        lo_k, hi_k = res.droop_gain_bounds
        if instance.fixed_gains is not None:
            lo_k = hi_k = instance.fixed_gains
        cap = res.p_max if rkind == "tg" else res.capacity
        pfc_coef = cap * limits.nadir_max / res.droop_factor
        for t in range(t_len):
            k_t = var[("k", rid, t)]
            xp_t = var[("xpfc", rid, t)]
            m.add_row(f"kup_{rid}_{t}", [(k_t, 1.0), (xp_t, -hi_k)], "<=", 0.0)
            m.add_row(f"klo_{rid}_{t}", [(xp_t, lo_k), (k_t, -1.0)], "<=", 0.0)
            if rkind == "tg":
                m.add_row(
                    f"pfcx_{rid}_{t}",
                    [(xp_t, 1.0), (var[("x", rid, t)], -1.0)],
                    "<=" if instance.fixed_gains is None else "==",
                    0.0,
                )
            elif instance.fixed_gains is not None:
                m.add_row(f"pfcx_{rid}_{t}", [(xp_t, 1.0)], "==", 1.0)
            m.add_row(
                f"pfru_{rid}_{t}",
                [(k_t, pfc_coef), (var[("rpp", rid, t)], -1.0)], "<=", 0.0,
            )
            m.add_row(
                f"pfrd_{rid}_{t}",
                [(k_t, pfc_coef), (var[("rpm", rid, t)], -1.0)], "<=", 0.0,
            )

    # contingency rows per tripped TG
    for g in gens:
        for t in range(t_len):
            p_t = var[("p", g.id, t)]
            # RoCoF: P_it <= 2 RoCoF_max sum_{j != i} H_j S_j x_jt
            coeffs = [(p_t, 1.0)]
            for og in gens:
                if og.id == g.id:
                    continue
                coeffs.append(
                    (var[("x", og.id, t)], -2.0 * limits.rocof_max * og.inertia * og.capacity)
                )
            m.add_row(f"rocof_{g.id}_{t}", coeffs, "<=", 0.0)

            # QSS: P_it <= qss_max (sum_{j != i} S_j K_j / R_j + D L_t)
            coeffs = [(p_t, 1.0)]
            for rid, rkind, res in resources:
                if rid == g.id:
                    continue
                coeffs.append(
                    (var[("k", rid, t)], -limits.qss_max * res.capacity / res.droop_factor)
                )
            m.add_row(
                f"qss_{g.id}_{t}", coeffs, "<=",
                limits.qss_max * instance.damping * float(load[t]),
            )

            # FNC: c_l . [features excluding i] + h_l >= P_it / S_base
            for li in range(fnc.n_segments):
                c_rg, c_rb, c_hp, c_rt, c_h = fnc.coeffs[li]
                coeffs = [(p_t, -1.0 / s_base)]
                for og in gens:
                    if og.id == g.id:
                        continue
                    gain_coef = og.capacity / s_base / og.droop_factor
                    coeffs.append((
                        var[("k", og.id, t)],
                        c_rg * gain_coef + c_hp * gain_coef * og.hp_fraction
                        + c_rt * gain_coef * og.reheater_tc,
                    ))
                    coeffs.append(
                        (var[("x", og.id, t)], c_h * og.inertia * og.capacity / s_base)
                    )
                for d in dsfrs:
                    coeffs.append(
                        (var[("k", d.id, t)], c_rb * d.capacity / s_base / d.droop_factor)
                    )
                m.add_row(f"fnc_{g.id}_{t}_{li}", coeffs, ">=", -fnc.intercepts[li])

    return UcModel(model=m, instance=instance, var=var)


# ---------------------------------------------------------------------------
# Solve and extract
# ---------------------------------------------------------------------------


def solve(built: UcModel, options: solver.SolveOptions | None = None) -> DispatchPlan:
    """Solve the MILP and extract a plan; raises on infeasible/unbounded."""
    options = options or solver.SolveOptions()
    res = solver.solve_milp(built.model, options)
    if not res.ok:
        raise FsucError(f"unit commitment solve ended {res.status}: {res.message}")
    return extract_plan(built, res)


def extract_plan(built: UcModel, res: solver.SolveResult) -> DispatchPlan:
    inst = built.instance
    sys_ = inst.system
    t_len = sys_.horizon
    tg_ids = [g.id for g in sys_.generators]
    dsfr_ids = [d.id for d in sys_.dsfrs]
    res_ids = tg_ids + dsfr_ids
    bus_ids = [b.id for b in sys_.buses]
    vals = res.values

    def grid(kind, ids):
        return np.array(
            [[vals[built.var[(kind, rid, t)]] for t in range(t_len)] for rid in ids]
        )

    def bgrid(kind, ids):
        return np.rint(grid(kind, ids)).astype(int)

    on = bgrid("x", tg_ids)
    start = bgrid("y", tg_ids)
    stop = bgrid("z", tg_ids)
    p = grid("p", tg_ids)
    gain = grid("k", res_ids)
    pfc_on = bgrid("xpfc", res_ids)

    hours = sys_.period_hours
    startup_cost = float(sum(
        g.startup_cost * start[i].sum() for i, g in enumerate(sys_.generators)
    ))
    gen_cost = float(sum(
        hours * max((s * p[i, t] + c * on[i, t] for s, c in g.cost_segments))
        for i, g in enumerate(sys_.generators) for t in range(t_len)
    ))
    r_spin_up = grid("rsp", res_ids)
    r_spin_dn = grid("rsm", res_ids)
    costs = np.array(
        [g.reserve_cost_spin for g in sys_.generators]
        + [d.reserve_cost for d in sys_.dsfrs]
    )
    reserve_cost = float((costs[:, None] * (r_spin_up + r_spin_dn)).sum() * hours)

    return DispatchPlan(
        tg_ids=tg_ids,
        dsfr_ids=dsfr_ids,
        bus_ids=bus_ids,
        on=on,
        start=start,
        stop=stop,
        p=p,
        gain=gain,
        pfc_on=pfc_on,
        r_spin_up=r_spin_up,
        r_spin_dn=r_spin_dn,
        r_pfc_up=grid("rpp", res_ids),
        r_pfc_dn=grid("rpm", res_ids),
        r_sfc_up=grid("rfp", res_ids),
        r_sfc_dn=grid("rfm", res_ids),
        r_op_up=grid("rop", res_ids),
        r_op_dn=grid("rom", res_ids),
        theta=grid("theta", bus_ids),
        objective=float(res.objective),
        breakdown={
            "startup": startup_cost,
            "generation": gen_cost,
            "reserve": reserve_cost,
            "total": startup_cost + gen_cost + reserve_cost,
        },
        status=res.status,
        gap=res.gap,
    )


# ---------------------------------------------------------------------------
# Independent audit
# ---------------------------------------------------------------------------


@dataclass
class AuditFinding:
    family: str
    worst: float  # scaled violation magnitude
    location: str
    count: int


@dataclass
class AuditReport:
    findings: list

    @property
    def max_violation(self) -> float:
        return max((f.worst for f in self.findings), default=0.0)

    def ok(self, tol: float = 1e-6) -> bool:
        return self.max_violation <= tol

    def violations(self, tol: float = 1e-6) -> list:
        return [f for f in self.findings if f.worst > tol]


def audit(plan: DispatchPlan, instance: UcInstance, tol: float = 1e-6) -> AuditReport:
    """Re-evaluate every constraint family arithmetically from the plan.

    Independent of the solver and of the model builder: each family is
    recomputed from instance data and plan values alone.
    """
    sys_ = instance.system
    t_len = sys_.horizon
    gens = sys_.generators
    dsfrs = sys_.dsfrs
    s_base = sys_.s_base
    limits = instance.limits
    fnc = instance.fnc_model
    res_list = [(g.id, "tg", g) for g in gens] + [(d.id, "dsfr", d) for d in dsfrs]
    i_of = {rid: i for i, (rid, _, _) in enumerate(res_list)}
    bus_of = {b.id: i for i, b in enumerate(sys_.buses)}
    load = sys_.total_load()

    families: dict[str, tuple[float, str, int]] = {}

    def check(family, violation, where):
        worst, loc, count = families.get(family, (0.0, "", 0))
        if violation > tol:
            count += 1
        if violation > worst:
            worst, loc = violation, where
        families[family] = (worst, loc, count)

    def scaled(lhs, rhs):
        return (lhs - rhs) / max(1.0, abs(rhs))

    # power balance and line flows
    inj = np.zeros((len(sys_.buses), t_len))
    for b in sys_.buses:
        inj[bus_of[b.id]] -= b.load_profile
    for d in dsfrs:
        inj[bus_of[d.bus]] += d.base_point_profile
    for r in sys_.renewables:
        inj[bus_of[r.bus]] += r.forecast_profile
    for i, g in enumerate(gens):
        inj[bus_of[g.bus]] += plan.p[i]
    flow_out = np.zeros((len(sys_.buses), t_len))
    for li, ln in enumerate(sys_.lines):
        a, b = bus_of[ln.from_bus], bus_of[ln.to_bus]
        flow = ln.susceptance * s_base * (plan.theta[a] - plan.theta[b])
        flow_out[a] += flow
        flow_out[b] -= flow
        for t in range(t_len):
            check("line_capacity", scaled(abs(flow[t]), ln.capacity),
                  f"line {ln.from_bus}-{ln.to_bus} t={t}")
    for b in sys_.buses:
        for t in range(t_len):
            mismatch = abs(inj[bus_of[b.id], t] - flow_out[bus_of[b.id], t])
            check("power_balance", mismatch / max(1.0, abs(load[t])),
                  f"bus {b.id} t={t}")

    for i, g in enumerate(gens):
        prior_on, prior_hours, prior_p = _prior_state(instance, g.id)
        ramp = g.ramp_rate * 60.0 * sys_.period_hours
        for t in range(t_len):
            x_t = plan.on[i, t]
            x_p = plan.on[i, t - 1] if t > 0 else int(prior_on)
            p_t = plan.p[i, t]
            p_p = plan.p[i, t - 1] if t > 0 else prior_p
            check("startup_logic", float(x_t - x_p - plan.start[i, t]), f"{g.id} t={t}")
            check("shutdown_logic", float(x_p - x_t - plan.stop[i, t]), f"{g.id} t={t}")
            on_window = sum(
                (plan.on[i, tau] if tau >= 0 else int(prior_on))
                for tau in range(t - g.min_on, t)
            )
            check("min_on", float(plan.stop[i, t] * g.min_on - on_window), f"{g.id} t={t}")
            off_window = sum(
                (1 - plan.on[i, tau] if tau >= 0 else 1 - int(prior_on))
                for tau in range(t - g.min_off, t)
            )
            check("min_off", float(plan.start[i, t] * g.min_off - off_window), f"{g.id} t={t}")
            ri = i_of[g.id]
            check("range_upper",
                  scaled(p_t + plan.r_spin_up[ri, t], g.p_max * x_t), f"{g.id} t={t}")
            check("range_lower",
                  scaled(g.p_min * x_t, p_t - plan.r_spin_dn[ri, t]), f"{g.id} t={t}")
            check("ramp_up",
                  scaled(p_t - p_p, x_p * ramp + plan.start[i, t] * g.p_min),
                  f"{g.id} t={t}")
            check("ramp_down",
                  scaled(p_p - p_t, x_p * ramp + plan.stop[i, t] * g.p_min),
                  f"{g.id} t={t}")

    for d in dsfrs:
        ri = i_of[d.id]
        for t in range(t_len):
            base = float(d.base_point_profile[t])
            check("range_upper", scaled(base + plan.r_spin_up[ri, t], d.capacity),
                  f"{d.id} t={t}")
            check("range_lower", scaled(0.0, base - plan.r_spin_dn[ri, t]),
                  f"{d.id} t={t}")

    for rid, rkind, res in res_list:
        ri = i_of[rid]
        lo_k, hi_k = res.droop_gain_bounds
        if instance.fixed_gains is not None:
            lo_k = hi_k = instance.fixed_gains
        cap = res.p_max if rkind == "tg" else res.capacity
        for t in range(t_len):
            k_t = plan.gain[ri, t]
            xp = plan.pfc_on[ri, t]
            check("gain_bounds", scaled(k_t, xp * hi_k), f"{rid} t={t}")
            check("gain_bounds", scaled(xp * lo_k, k_t), f"{rid} t={t}")
            if rkind == "tg":
                check("pfc_commitment", float(xp - plan.on[i_of[rid], t]), f"{rid} t={t}")
            for up, dn in ((plan.r_pfc_up, plan.r_pfc_dn),):
                need = k_t / res.droop_factor * cap * limits.nadir_max
                check("pfc_reserve", scaled(need, up[ri, t]), f"{rid} t={t} up")
                check("pfc_reserve", scaled(need, dn[ri, t]), f"{rid} t={t} dn")
            check("reserve_mix", scaled(
                plan.r_pfc_up[ri, t] + plan.r_sfc_up[ri, t] + plan.r_op_up[ri, t],
                plan.r_spin_up[ri, t]), f"{rid} t={t} up")
            check("reserve_mix", scaled(
                plan.r_pfc_dn[ri, t] + plan.r_sfc_dn[ri, t] + plan.r_op_dn[ri, t],
                plan.r_spin_dn[ri, t]), f"{rid} t={t} dn")
            for arr, name in (
                (plan.r_spin_up, "spin_up"), (plan.r_spin_dn, "spin_dn"),
                (plan.r_pfc_up, "pfc_up"), (plan.r_pfc_dn, "pfc_dn"),
                (plan.r_sfc_up, "sfc_up"), (plan.r_sfc_dn, "sfc_dn"),
                (plan.r_op_up, "op_up"), (plan.r_op_dn, "op_dn"),
            ):
                check("reserve_nonneg", -float(arr[ri, t]), f"{rid} t={t} {name}")

    for t in range(t_len):
        check("sfc_requirement",
              scaled(instance.sfc_up[t], plan.r_sfc_up[:, t].sum()), f"t={t} up")
        check("sfc_requirement",
              scaled(instance.sfc_dn[t], plan.r_sfc_dn[:, t].sum()), f"t={t} dn")
        op_req = instance.op_reserve_fraction * float(load[t])
        check("op_requirement",
              scaled(op_req, plan.r_op_up[:, t].sum()), f"t={t} up")
        check("op_requirement",
              scaled(op_req, plan.r_op_dn[:, t].sum()), f"t={t} dn")

    # contingency rows (9), (10), (8)
    for i, g in enumerate(gens):
        for t in range(t_len):
            p_t = plan.p[i, t]
            h_rest = sum(
                og.inertia * og.capacity * plan.on[i_of[og.id], t]
                for og in gens if og.id != g.id
            )
            check("rocof", scaled(p_t, 2.0 * limits.rocof_max * h_rest),
                  f"{g.id} t={t}")
            droop_rest = sum(
                res.capacity / res.droop_factor * plan.gain[i_of[rid], t]
                for rid, _, res in res_list if rid != g.id
            )
            check("qss", scaled(
                p_t, limits.qss_max * (droop_rest + instance.damping * float(load[t]))),
                f"{g.id} t={t}")
            feats = _excluded_features(plan, sys_, i_of, g.id, t)
            pred = fnc.predict(feats)
            check("fnc", scaled(p_t / s_base, pred), f"{g.id} t={t}")

    return AuditReport(
        findings=[
            AuditFinding(family=k, worst=v[0], location=v[1], count=v[2])
            for k, v in sorted(families.items())
        ]
    )


def _excluded_features(plan, sys_, i_of, trip_id, t):
    """FNC feature vector of the fleet with one TG excluded (MW plan data)."""
    r_g = r_b = hp = rt = h = 0.0
    for g in sys_.generators:
        if g.id == trip_id:
            continue
        gain = g.capacity / sys_.s_base / g.droop_factor * plan.gain[i_of[g.id], t]
        r_g += gain
        hp += gain * g.hp_fraction
        rt += gain * g.reheater_tc
        h += g.inertia * g.capacity / sys_.s_base * plan.on[i_of[g.id], t]
    for d in sys_.dsfrs:
        r_b += d.capacity / sys_.s_base / d.droop_factor * plan.gain[i_of[d.id], t]
    return np.array([r_g, r_b, hp, rt, h])
