"""Reserve-requirement search: scan candidate capacities, certify each one.

For every candidate r the empirical set mixes same-hour history records whose
(d, r) fall in the conditioning window with samples drawn from the fitted
conditional distribution, then the DRCC certificate decides sufficiency.  The
scan walks strictly upward from r_min in r_step increments and returns the
first certified candidate (certificate feasibility need not be monotone in r
because the conditioning window moves with r).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import FsucError
from .conditional import (
    ConditioningWindow,
    EmptyWindowError,
    JointModel,
    conditional_density,
    sample_conditional,
)
from .copulas import select_copula
from .drcc import AmbiguityConfig, drcc_certify, select_epsilon
from .stats import fit_marginal, records_matrix


@dataclass
class CandidateOutcome:
    r: float
    feasible: bool
    optimum: float
    n_history: int
    n_conditional: int
    note: str = ""


@dataclass
class RequirementResult:
    hour: int
    direction: str
    requirement: float  # MW
    capped: bool
    epsilon: float
    copula_family: str
    candidates: list = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return not self.capped


def fit_joint(records, hour: int, direction: str) -> JointModel:
    """Hour/direction joint model: minimum-BIC copula plus smoothed marginals."""
    hour_records = [r for r in records if r.hour == hour]
    copula = select_copula(records, direction, hour)
    data = records_matrix(hour_records, direction)
    marginals = [fit_marginal(data[:, j]) for j in range(5)]
    return JointModel(copula=copula, marginals=marginals)


def compute_requirement(
    records,
    hour: int,
    d_intervals,
    direction: str,
    config: AmbiguityConfig,
    seed: int = 0,
    joint: JointModel | None = None,
) -> RequirementResult:
    """Smallest certified SFC reserve capacity for one hour and direction.

    d_intervals is the forecast (d_lower, d_upper) box; r_min/r_max default to
    the hour's historical reserve range.  Returns r_max with capped=True when
    no candidate certifies.
    """
    hour_records = [r for r in records if r.hour == hour]
    if not hour_records:
        raise FsucError(f"no history for hour {hour}")
    d_lower, d_upper = (np.asarray(v, dtype=float) for v in d_intervals)
    joint = joint if joint is not None else fit_joint(records, hour, direction)

    reserves = np.array([r.reserve(direction) for r in hour_records])
    r_min = config.r_min if config.r_min is not None else float(reserves.min())
    r_max = config.r_max if config.r_max is not None else float(reserves.max())
    if r_max < r_min:
        raise FsucError("r_max below r_min")
    half = config.window_half_width
    rng = np.random.default_rng(seed)

    n_hist_target = int(round(config.n_samples * config.mix_ratio))
    epsilon = config.epsilon
    candidates: list[CandidateOutcome] = []
    found = None

    r = r_min
    while r <= r_max + 1e-9:
        window = ConditioningWindow(d_lower, d_upper, r - half, r + half)
        in_window = [
            rec.a2 for rec in hour_records
            if window.contains(rec.d, rec.reserve(direction))
        ]
        if len(in_window) > n_hist_target:
            idx = rng.choice(len(in_window), size=n_hist_target, replace=False)
            hist = np.asarray(in_window, dtype=float)[np.sort(idx)]
        else:
            hist = np.asarray(in_window, dtype=float)
        n_cond = config.n_samples - len(hist)
        note = ""
        try:
            cond = conditional_density(joint, window) if n_cond > 0 else None
            sampled = (
                sample_conditional(cond, n_cond, rng) if n_cond > 0 else np.empty(0)
            )
        except EmptyWindowError:
            # window beyond the fitted support: certify on history alone if any
            cond, sampled = None, np.empty(0)
            note = "empty-window"
            if len(hist) == 0:
                candidates.append(
                    CandidateOutcome(r, False, np.inf, 0, 0, "empty-window,no-history")
                )
                r += config.r_step
                continue
        mixed = np.concatenate([hist, sampled])
        if epsilon is None:
            epsilon = select_epsilon(mixed, config, seed=seed)
        cert = drcc_certify(mixed, config, epsilon=epsilon)
        candidates.append(
            CandidateOutcome(r, cert.feasible, cert.optimum, len(hist),
                             len(sampled), note)
        )
        if cert.feasible:
            found = r
            break
        r += config.r_step

    if found is None:
        return RequirementResult(
            hour=hour, direction=direction, requirement=r_max, capped=True,
            epsilon=epsilon if epsilon is not None else float("nan"),
            copula_family=joint.copula.family, candidates=candidates,
        )
    return RequirementResult(
        hour=hour, direction=direction, requirement=found, capped=False,
        epsilon=float(epsilon), copula_family=joint.copula.family,
        candidates=candidates,
    )
