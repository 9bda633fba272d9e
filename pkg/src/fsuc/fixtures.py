"""Deterministic benchmark systems.

make_toy6: a 6-bus system (3 thermal units, one demand-side resource, one
wind plant) sized so every frequency-security constraint family is active
but the MILP stays small.

make_grid118: a 118-bus-scale system.  Thermal-unit commercial parameters
(reserve/startup costs, ramp rates, minimum on/off times), demand-side
converter parameters (capacity, 0.01 s time constant, reserve cost, 0.15
droop factor), renewable siting/capacities and droop-gain ranges (thermal
0.5..1, demand-side 0..2) follow the published 118-bus study; the grid
topology and turbine dynamic constants are synthesized deterministically.
"""

from __future__ import annotations

import numpy as np

from .system import (
    Bus,
    DemandSideResource,
    PowerSystem,
    RenewablePlant,
    ThermalGenerator,
    TransmissionLine,
)
from .uc import InitialConditions, UcLimits


def warm_start(system: PowerSystem) -> InitialConditions:
    """Prior state with every unit online sharing the first-period net load.

    Day-ahead instances roll over from the previous day; an all-off prior
    combined with the startup ramp rows would pin period-0 output at p_min.
    """
    residual = float(system.net_load()[0])
    residual -= sum(float(d.base_point_profile[0]) for d in system.dsfrs)
    p_max_total = sum(g.p_max for g in system.generators)
    share = max(residual, 0.0) / p_max_total if p_max_total > 0 else 0.0
    commitment = {g.id: True for g in system.generators}
    power = {
        g.id: float(np.clip(share * g.p_max, g.p_min, g.p_max))
        for g in system.generators
    }
    hours = {g.id: 10 ** 6 for g in system.generators}
    return InitialConditions(commitment=commitment, power=power, hours_in_state=hours)

_DAY_SHAPE = np.array([
    0.78, 0.75, 0.73, 0.72, 0.73, 0.76, 0.81, 0.86, 0.92, 0.96, 0.98, 1.00,
    0.99, 0.97, 0.95, 0.94, 0.95, 0.97, 1.00, 0.98, 0.94, 0.89, 0.84, 0.80,
])

_SOLAR_SHAPE = np.array([
    0.0, 0.0, 0.0, 0.0, 0.0, 0.02, 0.10, 0.25, 0.45, 0.62, 0.75, 0.82,
    0.85, 0.82, 0.74, 0.60, 0.42, 0.22, 0.08, 0.01, 0.0, 0.0, 0.0, 0.0,
])


def _resample(shape: np.ndarray, n: int) -> np.ndarray:
    if n == len(shape):
        return shape.copy()
    x_old = np.linspace(0.0, 1.0, len(shape))
    return np.interp(np.linspace(0.0, 1.0, n), x_old, shape)


def toy_limits() -> UcLimits:
    """Security limits matched to the toy system's disturbance scale."""
    return UcLimits(rocof_max=0.05, qss_max=0.015, nadir_max=0.02)


def make_toy6(n_periods: int = 24, load_scale: float = 1.0, seed: int = 0,
              name: str = "toy6") -> PowerSystem:
    rng = np.random.default_rng(seed)
    shape = _resample(_DAY_SHAPE, n_periods)
    jitter = 1.0 + 0.05 * rng.standard_normal(n_periods)
    load_total = 230.0 * load_scale * shape * np.clip(jitter, 0.85, 1.15)
    weights = np.array([0.30, 0.25, 0.20, 0.15, 0.10])  # buses 1..5 carry load

    buses = [Bus(id="b1", load_profile=load_total * weights[0], angle_ref=True)]
    for i, w in enumerate(weights[1:], start=2):
        buses.append(Bus(id=f"b{i}", load_profile=load_total * w))
    buses.append(Bus(id="b6", load_profile=np.zeros(n_periods)))

    ring = [("b1", "b2"), ("b2", "b3"), ("b3", "b4"), ("b4", "b5"),
            ("b5", "b6"), ("b6", "b1")]
    chords = [("b1", "b4"), ("b2", "b5")]
    lines = [
        TransmissionLine(a, b, susceptance=12.0, capacity=220.0)
        for a, b in ring
    ] + [
        TransmissionLine(a, b, susceptance=8.0, capacity=150.0)
        for a, b in chords
    ]

    def seg(base, mid, top):
        # convex 3-piece cost: slopes rise, intercepts fall
        return [(base, 20.0), (mid, 20.0 - (mid - base) * 60.0),
                (top, 20.0 - (mid - base) * 60.0 - (top - mid) * 120.0)]

    gens = [
        ThermalGenerator(
            id="g1", bus="b1", p_max=180.0, p_min=25.0, capacity=200.0,
            inertia=5.0, damping_share=0.0, droop_factor=0.2,
            droop_gain_bounds=(0.5, 1.0), governor_tc=0.15, turbine_tc=0.4,
            reheater_tc=8.0, hp_fraction=0.3, ramp_rate=2.0, min_on=3,
            min_off=3, startup_cost=300.0, reserve_cost_spin=8.0,
            reserve_cost_sfc=5.0, cost_segments=seg(18.0, 22.0, 27.0),
        ),
        ThermalGenerator(
            id="g2", bus="b2", p_max=130.0, p_min=15.0, capacity=150.0,
            inertia=4.5, damping_share=0.0, droop_factor=0.2,
            droop_gain_bounds=(0.5, 1.0), governor_tc=0.2, turbine_tc=0.35,
            reheater_tc=7.0, hp_fraction=0.32, ramp_rate=1.8, min_on=2,
            min_off=2, startup_cost=200.0, reserve_cost_spin=7.0,
            reserve_cost_sfc=5.0, cost_segments=seg(24.0, 28.0, 33.0),
        ),
        ThermalGenerator(
            id="g3", bus="b4", p_max=100.0, p_min=10.0, capacity=120.0,
            inertia=4.0, damping_share=0.0, droop_factor=0.2,
            droop_gain_bounds=(0.5, 1.0), governor_tc=0.18, turbine_tc=0.3,
            reheater_tc=0.0, hp_fraction=0.0, ramp_rate=1.5, min_on=2,
            min_off=2, startup_cost=120.0, reserve_cost_spin=6.0,
            reserve_cost_sfc=4.0, cost_segments=seg(30.0, 34.0, 40.0),
        ),
    ]
    dsfrs = [
        DemandSideResource(
            id="d1", bus="b5", capacity=120.0,
            base_point_profile=np.full(n_periods, 40.0),
            droop_factor=0.08, droop_gain_bounds=(0.0, 2.0),
            converter_tc=0.01, reserve_cost=4.0,
        ),
        DemandSideResource(
            id="d2", bus="b3", capacity=100.0,
            base_point_profile=np.full(n_periods, 34.0),
            droop_factor=0.08, droop_gain_bounds=(0.0, 2.0),
            converter_tc=0.01, reserve_cost=4.5,
        ),
    ]
    wind_shape = 0.45 + 0.2 * np.sin(np.linspace(0.0, 2.2 * np.pi, n_periods))
    wind_shape = np.clip(wind_shape + 0.06 * rng.standard_normal(n_periods), 0.05, 0.8)
    renewables = [
        RenewablePlant(
            id="w1", bus="b6", kind="wind", installed_capacity=60.0,
            forecast_profile=60.0 * wind_shape,
        )
    ]
    return PowerSystem(
        name=name, buses=buses, lines=lines, generators=gens, dsfrs=dsfrs,
        renewables=renewables, s_base=500.0, f0=50.0, horizon=n_periods,
        period_hours=1.0,
    )


# ---------------------------------------------------------------------------
# 118-bus-scale system
# ---------------------------------------------------------------------------

# thermal fleet: (bus, reserve $/MWh, startup $, ramp MW/min, min on/off h)
_TG_GROUPS = [
    ((12,), 7.2, 120.0, 2.0, 2),
    ((26,), 9.0, 400.0, 7.0, 6),
    ((89,), 9.6, 800.0, 13.0, 8),
    ((59, 61), 7.8, 240.0, 4.0, 4),
    ((65, 66), 9.6, 500.0, 8.0, 8),
    ((10, 69, 25, 49, 31, 46, 54, 103, 80), 9.0, 600.0, 10.0, 6),
    ((100,), 7.8, 300.0, 5.0, 4),
    ((87,), 6.0, 80.0, 1.5, 2),
    ((111,), 7.2, 100.0, 1.8, 2),
]
# per-group (capacity MVA, p_max MW, p_min MW, inertia s, marginal $/MWh)
_TG_SIZING = [
    (350.0, 300.0, 80.0, 4.2, 19.0),
    (450.0, 400.0, 100.0, 4.8, 17.5),
    (550.0, 500.0, 140.0, 5.5, 16.0),
    (300.0, 260.0, 60.0, 4.0, 21.0),
    (400.0, 350.0, 90.0, 5.0, 18.5),
    (250.0, 220.0, 50.0, 4.5, 23.0),
    (300.0, 260.0, 60.0, 4.6, 20.0),
    (150.0, 130.0, 30.0, 3.5, 26.0),
    (180.0, 150.0, 35.0, 3.8, 24.0),
]
_WIND = [(1, 400.0), (44, 300.0), (68, 300.0), (17, 330.0), (76, 400.0), (89, 300.0)]
_SOLAR = [(18, 400.0), (24, 400.0), (32, 330.0), (38, 300.0)]
_DSFR = [  # (bus, capacity MW, reserve cost $/MWh)
    (19, 40.0, 4.0), (34, 30.0, 4.0), (49, 30.0, 4.0),
    (62, 33.0, 5.0), (75, 40.0, 5.0), (77, 30.0, 5.0),
]


def grid118_limits() -> UcLimits:
    return UcLimits(rocof_max=0.012, qss_max=0.004, nadir_max=0.01)


def make_grid118(n_periods: int = 24, load_scale: float = 1.0,
                 name: str = "grid118") -> PowerSystem:
    rng = np.random.default_rng(118)
    n_bus = 118
    shape = _resample(_DAY_SHAPE, n_periods)
    peak = 3400.0 * load_scale
    weights = rng.dirichlet(np.full(n_bus, 2.0))
    load_total = peak * shape

    buses = [
        Bus(id=f"b{i}", load_profile=load_total * weights[i - 1], angle_ref=(i == 69))
        for i in range(1, n_bus + 1)
    ]
    lines = [
        TransmissionLine(f"b{i}", f"b{i % n_bus + 1}", susceptance=18.0, capacity=900.0)
        for i in range(1, n_bus + 1)
    ]
    seen = {(i, i % n_bus + 1) for i in range(1, n_bus + 1)}
    while len(lines) < 186:
        a, b = sorted(rng.integers(1, n_bus + 1, size=2))
        if a == b or (a, b) in seen:
            continue
        seen.add((a, b))
        lines.append(
            TransmissionLine(f"b{a}", f"b{b}", susceptance=10.0, capacity=650.0)
        )

    gens = []
    idx = 0
    for (grp, (buses_of, cost_r, cost_su, ramp, on_off)) in zip(_TG_SIZING, _TG_GROUPS):
        cap, p_max, p_min, inertia, marg = grp
        for bus in buses_of:
            idx += 1
            gens.append(
                ThermalGenerator(
                    id=f"tg{idx:02d}", bus=f"b{bus}", p_max=p_max, p_min=p_min,
                    capacity=cap, inertia=inertia, damping_share=0.0,
                    droop_factor=0.05, droop_gain_bounds=(0.5, 1.0),
                    governor_tc=0.2, turbine_tc=0.4,
                    reheater_tc=float(rng.uniform(7.0, 10.0)),
                    hp_fraction=0.3, ramp_rate=ramp, min_on=on_off,
                    min_off=on_off, startup_cost=cost_su,
                    reserve_cost_spin=cost_r, reserve_cost_sfc=cost_r * 0.6,
                    cost_segments=[
                        (marg, 35.0),
                        (marg + 4.0, 35.0 - 4.0 * 0.45 * p_max),
                        (marg + 9.0, 35.0 - 4.0 * 0.45 * p_max - 5.0 * 0.75 * p_max),
                    ],
                )
            )

    dsfrs = [
        DemandSideResource(
            id=f"ds{j + 1}", bus=f"b{bus}", capacity=cap,
            base_point_profile=np.full(n_periods, 0.4 * cap),
            droop_factor=0.15, droop_gain_bounds=(0.0, 2.0),
            converter_tc=0.01, reserve_cost=cost,
        )
        for j, (bus, cap, cost) in enumerate(_DSFR)
    ]

    renewables = []
    for j, (bus, cap) in enumerate(_WIND):
        prof = 0.45 + 0.18 * np.sin(np.linspace(0, 2 * np.pi, n_periods) + j)
        prof = np.clip(prof + 0.05 * rng.standard_normal(n_periods), 0.05, 0.85)
        renewables.append(
            RenewablePlant(
                id=f"w{j + 1}", bus=f"b{bus}", kind="wind",
                installed_capacity=cap, forecast_profile=cap * prof,
            )
        )
    solar_shape = _resample(_SOLAR_SHAPE, n_periods)
    for j, (bus, cap) in enumerate(_SOLAR):
        renewables.append(
            RenewablePlant(
                id=f"s{j + 1}", bus=f"b{bus}", kind="solar",
                installed_capacity=cap, forecast_profile=cap * solar_shape,
            )
        )
    return PowerSystem(
        name=name, buses=buses, lines=lines, generators=gens, dsfrs=dsfrs,
        renewables=renewables, s_base=float(sum(g.capacity for g in gens)),
        f0=50.0, horizon=n_periods, period_hours=1.0,
    )
