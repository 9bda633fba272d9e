"""Aggregated system frequency response model.

One synchronous-area block model: swing equation with constant damping,
per-generator governor/turbine/reheater chains, first-order converter blocks
for demand-side resources.  A reduced second-order model (single equivalent
reheat block, instantaneous converters) backs the closed-form metrics; the
full model backs time-domain simulation and N-1 verification.

Sign convention: a disturbance delta_p > 0 is a generation loss, driving the
frequency deviation negative.  All frequency deviations are per-unit of f0;
powers are per-unit on the system base.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import FsucError
from .kernels import propagate_affine


class SimulationError(FsucError):
    """Raised when integrator configuration cannot resolve the dynamics."""


@dataclass
class UnitBlock:
    """One thermal generator in the response model (gains in system pu)."""

    resource_id: str
    gain: float  # (S/S_base) * (K/R)
    t_gov: float
    t_turb: float
    t_reheat: float  # 0 = no reheater
    hp_fraction: float


@dataclass
class ConverterBlock:
    """One converter-interfaced demand-side resource."""

    resource_id: str
    gain: float  # (S/S_base) * (K/R)
    t_conv: float


@dataclass
class FrequencyResponseModel:
    """Aggregate response parameters for one commitment/droop/contingency state.

    h is the aggregate inertia constant (s, on s_base), d the constant system
    damping (pu).  r_g/r_b (integrated droop factors), f_bar and t_bar (the
    reduced model's equivalent high-pressure fraction and reheat time
    constant) are derived from the block lists.
    """

    h: float
    d: float
    units: list[UnitBlock] = field(default_factory=list)
    dsfr_units: list[ConverterBlock] = field(default_factory=list)

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("aggregate inertia must be positive")
        if self.d < 0:
            raise ValueError("damping must be nonnegative")
        if any(u.gain < 0 for u in self.units) or any(u.gain < 0 for u in self.dsfr_units):
            raise ValueError("response gains must be nonnegative")

    @property
    def r_g(self) -> float:
        return sum(u.gain for u in self.units)

    @property
    def r_b(self) -> float:
        return sum(u.gain for u in self.dsfr_units)

    @property
    def f_bar(self) -> float:
        """Gain-weighted mean HP fraction over online reheat units."""
        w = sum(u.gain for u in self.units if u.t_reheat > 0)
        if w == 0:
            return 0.0
        return sum(u.gain * u.hp_fraction for u in self.units if u.t_reheat > 0) / w

    @property
    def t_bar(self) -> float:
        """Gain-weighted mean reheater time constant over online reheat units."""
        w = sum(u.gain for u in self.units if u.t_reheat > 0)
        if w == 0:
            return 0.0
        return sum(u.gain * u.t_reheat for u in self.units if u.t_reheat > 0) / w

    @classmethod
    def reduced(cls, h, d, r_g, r_b, f_bar, t_bar) -> "FrequencyResponseModel":
        """Build a model directly from reduced aggregates (testing/metrics)."""
        units = []
        if r_g > 0:
            units.append(UnitBlock("agg_tg", r_g, 0.0, 0.0, t_bar, f_bar))
        dsfr = [ConverterBlock("agg_dsfr", r_b, 0.0)] if r_b > 0 else []
        return cls(h=h, d=d, units=units, dsfr_units=dsfr)


@dataclass
class FrequencyTrajectory:
    times: np.ndarray  # s
    delta_f: np.ndarray  # pu of f0
    p_tg: np.ndarray  # total TG mechanical response, pu
    p_dsfr: np.ndarray  # total DSFR response, pu

    def to_csv(self, path) -> None:
        data = np.column_stack([self.times, self.delta_f, self.p_tg, self.p_dsfr])
        np.savetxt(
            path,
            data,
            delimiter=",",
            header="time_s,delta_f_pu,p_tg_pu,p_dsfr_pu",
            comments="",
        )


@dataclass
class FrequencyMetrics:
    rocof_max: float  # pu/s, magnitude
    nadir: float  # pu, signed extremum of delta_f
    qss: float  # pu, signed settled deviation


def aggregate_response(
    system,
    commitment,
    droop_gains,
    contingency: str | None = None,
    d: float = 1.0,
) -> FrequencyResponseModel:
    """Aggregate one commitment/gain state into a response model.

    commitment maps TG id -> online flag; droop_gains maps resource id -> K
    (missing ids are treated as K = 0, i.e. not participating in PFC).  The
    contingency unit, which must be online, is excluded from inertia and from
    the TG blocks.
    """
    online = {g.id for g in system.generators if commitment.get(g.id, False)}
    if contingency is not None:
        if contingency not in {g.id for g in system.generators}:
            raise FsucError(f"contingency unit {contingency!r} unknown")
        if contingency not in online:
            raise FsucError(f"contingency unit {contingency!r} is offline")

    h = 0.0
    units = []
    for g in system.generators:
        if g.id not in online or g.id == contingency:
            continue
        k = float(droop_gains.get(g.id, 0.0))
        lo, hi = g.droop_gain_bounds
        if k != 0.0 and not (lo - 1e-9 <= k <= hi + 1e-9):
            raise FsucError(f"droop gain {k} of {g.id} outside bounds [{lo}, {hi}]")
        h += g.inertia * g.capacity / system.s_base
        units.append(
            UnitBlock(
                resource_id=g.id,
                gain=g.capacity / system.s_base * k / g.droop_factor,
                t_gov=g.governor_tc,
                t_turb=g.turbine_tc,
                t_reheat=g.reheater_tc,
                hp_fraction=g.hp_fraction,
            )
        )
    if h <= 0:
        raise FsucError("no online generation remains; aggregate model undefined")

    dsfr_units = []
    for ds in system.dsfrs:
        k = float(droop_gains.get(ds.id, 0.0))
        lo, hi = ds.droop_gain_bounds
        if k != 0.0 and not (lo - 1e-9 <= k <= hi + 1e-9):
            raise FsucError(f"droop gain {k} of {ds.id} outside bounds [{lo}, {hi}]")
        dsfr_units.append(
            ConverterBlock(
                resource_id=ds.id,
                gain=ds.capacity / system.s_base * k / ds.droop_factor,
                t_conv=ds.converter_tc,
            )
        )
    return FrequencyResponseModel(h=h, d=d, units=units, dsfr_units=dsfr_units)


# ---------------------------------------------------------------------------
# Time-domain simulation
# ---------------------------------------------------------------------------


def _build_lti(model: FrequencyResponseModel, reduced: bool):
    """State matrices (A, b, C) of the closed loop.

    State 0 is delta_f.  Each TG contributes governor -> turbine -> optional
    reheater states (full model) or one equivalent reheat state (reduced).
    The input column b scales a unit step disturbance.  C maps the state to
    (delta_f, total TG response, total DSFR response).
    """
    if reduced:
        units = []
        r_g, f_bar, t_bar = model.r_g, model.f_bar, model.t_bar
        if r_g > 0 and t_bar > 0:
            units.append(UnitBlock("agg", r_g, 0.0, 0.0, t_bar, f_bar))
        static_tg = r_g if (r_g > 0 and t_bar == 0) else 0.0
        dsfrs = []
        static_dsfr = model.r_b
    else:
        units = list(model.units)
        static_tg = 0.0
        dsfrs = list(model.dsfr_units)
        static_dsfr = 0.0

    n = 1
    spans = []  # (unit, first_state_index)
    for u in units:
        spans.append((u, n))
        if reduced:
            n += 1  # single reheat lag state
        else:
            n += 3 if u.t_reheat > 0 else 2
    dsfr_idx = []
    for _ in dsfrs:
        dsfr_idx.append(n)
        n += 1

    a = np.zeros((n, n))
    b = np.zeros(n)
    c_f = np.zeros(n)
    c_f[0] = 1.0
    c_tg = np.zeros(n)
    c_dsfr = np.zeros(n)

    two_h = 2.0 * model.h
    # swing: d(delta_f)/dt = (p_tg + p_dsfr - D*delta_f - delta_p) / 2H
    a[0, 0] = -(model.d + static_tg + static_dsfr) / two_h
    c_tg[0] -= static_tg
    c_dsfr[0] -= static_dsfr
    b[0] = -1.0 / two_h

    for u, i0 in spans:
        if reduced:
            # transfer r_g(1+FTs)/(1+Ts): static path F*gain, lag state (1-F)
            a[i0, 0] = -u.gain * (1 - u.hp_fraction) / u.t_reheat
            a[i0, i0] = -1.0 / u.t_reheat
            a[0, 0] += -u.gain * u.hp_fraction / two_h
            a[0, i0] += 1.0 / two_h
            c_tg[0] += -u.gain * u.hp_fraction
            c_tg[i0] += 1.0
        else:
            gov, tur = i0, i0 + 1
            a[gov, 0] = -u.gain / u.t_gov
            a[gov, gov] = -1.0 / u.t_gov
            a[tur, gov] = 1.0 / u.t_turb
            a[tur, tur] = -1.0 / u.t_turb
            if u.t_reheat > 0:
                reh = i0 + 2
                a[reh, tur] = 1.0 / u.t_reheat
                a[reh, reh] = -1.0 / u.t_reheat
                # mech power = F*turbine + (1-F)*reheater
                a[0, tur] += u.hp_fraction / two_h
                a[0, reh] += (1 - u.hp_fraction) / two_h
                c_tg[tur] += u.hp_fraction
                c_tg[reh] += 1 - u.hp_fraction
            else:
                a[0, tur] += 1.0 / two_h
                c_tg[tur] += 1.0

    for ds, i in zip(dsfrs, dsfr_idx):
        a[i, 0] = -ds.gain / ds.t_conv
        a[i, i] = -1.0 / ds.t_conv
        a[0, i] += 1.0 / two_h
        c_dsfr[i] = 1.0

    tcs = [u.t_gov for u, _ in spans if not reduced] + \
          [u.t_turb for u, _ in spans if not reduced] + \
          [u.t_reheat for u, _ in spans if u.t_reheat > 0] + \
          [ds.t_conv for ds in dsfrs]
    return a, b, np.vstack([c_f, c_tg, c_dsfr]), min(tcs, default=math.inf)


def simulate_response(
    model: FrequencyResponseModel,
    delta_p: float,
    dt: float = 1e-3,
    horizon: float = 30.0,
    reduced: bool = False,
) -> FrequencyTrajectory:
    """Integrate the closed loop for a step disturbance of delta_p pu.

    Fixed-step RK4 (exact affine one-step propagator for this linear system).
    dt must not exceed one tenth of the smallest block time constant.
    """
    if not math.isfinite(delta_p):
        raise SimulationError("disturbance must be finite")
    if dt <= 0 or horizon <= 0:
        raise SimulationError("step size and horizon must be positive")
    a, b, c, min_tc = _build_lti(model, reduced)
    if dt > min_tc / 10.0:
        raise SimulationError(
            f"step {dt} s too large for smallest time constant {min_tc} s"
        )
    n_steps = int(round(horizon / dt))
    g = b * delta_p

    # RK4 one-step propagator: x' = M x + r with M = sum (dt A)^j / j!, j<=4.
    ha = dt * a
    m = np.eye(a.shape[0]) + ha @ (
        np.eye(a.shape[0]) + ha @ (np.eye(a.shape[0]) / 2 + ha @ (np.eye(a.shape[0]) / 6 + ha / 24))
    )
    r = dt * (g + ha @ (g / 2 + ha @ (g / 6 + ha @ g / 24)))

    y = propagate_affine(
        np.ascontiguousarray(m),
        np.ascontiguousarray(r),
        np.ascontiguousarray(c),
        np.zeros(a.shape[0]),
        n_steps,
    )
    times = np.arange(n_steps + 1) * dt
    return FrequencyTrajectory(times=times, delta_f=y[:, 0], p_tg=y[:, 1], p_dsfr=y[:, 2])


def trajectory_metrics(traj: FrequencyTrajectory) -> FrequencyMetrics:
    """Metrics read off a simulated trajectory."""
    df = traj.delta_f
    if len(df) < 2:
        raise SimulationError("trajectory too short for metrics")
    dt = traj.times[1] - traj.times[0]
    slopes = np.diff(df) / dt
    nadir = float(df[np.argmax(np.abs(df))])
    return FrequencyMetrics(
        rocof_max=float(np.max(np.abs(slopes))),
        nadir=nadir,
        qss=float(df[-1]),
    )


# ---------------------------------------------------------------------------
# Closed-form metrics on the reduced model
# ---------------------------------------------------------------------------


def analytic_metrics(model: FrequencyResponseModel, delta_p: float) -> FrequencyMetrics:
    """RoCoF, nadir and QSS of the reduced model in closed form.

    The nadir comes from the exact modal solution of the second-order closed
    loop 2HT s^2 + (2H + T(D + r_b + F r_g)) s + (D + r_g + r_b), not from a
    transcribed overshoot formula, so no square-root domain issues arise.
    """
    h, d = model.h, model.d
    r_g, r_b = model.r_g, model.r_b
    f_bar, t_bar = model.f_bar, model.t_bar
    k_s = d + r_g + r_b
    if k_s <= 0:
        raise FsucError("undamped system: D + r_g + r_b must be positive")
    if delta_p == 0:
        return FrequencyMetrics(rocof_max=0.0, nadir=0.0, qss=0.0)

    rocof = abs(delta_p) / (2.0 * h)
    qss = -delta_p / k_s

    if r_g <= 0 or t_bar <= 0:
        # First-order loop: monotone approach, extremum at infinity.
        return FrequencyMetrics(rocof_max=rocof, nadir=qss, qss=qss)

    a = 2.0 * h * t_bar
    b = 2.0 * h + t_bar * (d + r_b + f_bar * r_g)
    disc = complex(b * b - 4.0 * a * k_s)
    if abs(disc) < 1e-12 * (b * b + 1.0):
        # repeated-root hairline: nudge within fp accuracy to keep residues finite
        disc = complex(1e-12 * (b * b + 1.0))
    sq = np.sqrt(disc)
    s1 = (-b + sq) / (2.0 * a)
    s2 = (-b - sq) / (2.0 * a)

    r0 = -delta_p / k_s
    r1 = -delta_p * (1.0 + t_bar * s1) / (a * s1 * (s1 - s2))
    r2 = -delta_p * (1.0 + t_bar * s2) / (a * s2 * (s2 - s1))

    t_m = None
    if abs(disc.imag) == 0 and disc.real >= 0:
        # real roots: R1 s1 e^{s1 t} + R2 s2 e^{s2 t} = 0
        num = -(r2 * s2)
        den = r1 * s1
        if den != 0 and (num / den).real > 0:
            t = (np.log(num / den) / (s1 - s2)).real
            if t > 0:
                t_m = t
    else:
        # complex pair: delta_f'(t) = 2 rho e^{-sigma t} cos(omega t + psi)
        omega = abs(s1.imag)
        sp = s1 if s1.imag > 0 else s2
        rp = r1 if s1.imag > 0 else r2
        psi = np.angle(rp * sp)
        k = math.ceil((psi - math.pi / 2.0) / math.pi + 1e-12)
        t_m = (math.pi / 2.0 - psi + k * math.pi) / omega
        while t_m <= 1e-12:
            t_m += math.pi / omega

    if t_m is None:
        nadir = qss
    else:
        nadir = (r0 + r1 * np.exp(s1 * t_m) + r2 * np.exp(s2 * t_m)).real
        if abs(nadir) < abs(qss):
            nadir = qss
    return FrequencyMetrics(rocof_max=rocof, nadir=float(nadir), qss=float(qss))


# ---------------------------------------------------------------------------
# Maximum toleratable disturbance power
# ---------------------------------------------------------------------------

_ORACLES = ("analytic", "sim-reduced", "sim-full")


def mtdp(
    model: FrequencyResponseModel,
    nadir_limit: float,
    oracle: str = "analytic",
    tol: float = 1e-4,
    dt: float = 1e-3,
    horizon: float = 30.0,
) -> float:
    """Largest step disturbance (pu) whose |nadir| stays within nadir_limit.

    Found by bisection against the chosen nadir oracle; the returned value
    satisfies ||nadir| - nadir_limit| <= tol.
    """
    if nadir_limit <= 0:
        raise FsucError("nadir_limit must be positive")
    if oracle not in _ORACLES:
        raise FsucError(f"unknown oracle {oracle!r}; choose from {_ORACLES}")

    if oracle == "analytic":
        def nadir_of(dp):
            return abs(analytic_metrics(model, dp).nadir)
    else:
        reduced = oracle == "sim-reduced"

        def nadir_of(dp):
            traj = simulate_response(model, dp, dt=dt, horizon=horizon, reduced=reduced)
            return abs(trajectory_metrics(traj).nadir)

    lo, hi = 0.0, max(nadir_limit, 1e-3)
    g_hi = nadir_of(hi)
    n_expand = 0
    while g_hi < nadir_limit:
        hi *= 2.0
        g_hi = nadir_of(hi)
        n_expand += 1
        if n_expand > 60:
            raise FsucError("nadir does not reach the limit; system undamped?")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g_mid = nadir_of(mid)
        if abs(g_mid - nadir_limit) <= tol:
            return mid
        if g_mid < nadir_limit:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
