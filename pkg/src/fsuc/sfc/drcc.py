"""Wasserstein distributionally robust chance-constraint certificate.

Certifies P(|A2| <= A2*) >= alpha for every distribution within Wasserstein
radius epsilon of the empirical distribution, through the CVaR surrogate:
the worst-case expectation of max((|A2|-A2*-eta)/(1-alpha)+eta, eta) is
minimized over eta and the support-constrained dual variables; the reserve
level is certified when the optimum is nonpositive.

The scalar-support specialization is used: Xi = {xi : B xi <= H} with
B = (1, -1), H = (upper, -lower).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import FsucError
from .. import solver

CERT_TOL = 1e-9


@dataclass
class AmbiguityConfig:
    """Parameters of the reserve-requirement certification.

    epsilon=None selects the radius per (hour, direction) by the 5-fold
    decision-stability rule; a number is used as-is.  support_box=None derives
    the box from the sample set as [min - 3 std, max + 3 std].
    """

    alpha: float = 0.9
    a2_star: float = 40.0  # MW
    epsilon: float | None = None
    delta_r: float | None = None  # MW; default r_step / 2
    r_step: float = 10.0  # MW
    r_min: float | None = None  # MW; default min historical reserve
    r_max: float | None = None  # MW; default max historical reserve
    mix_ratio: float = 0.5  # share of empirical points taken from history
    n_samples: int = 200  # U, total mixed-set size
    support_box: tuple | None = None  # (lower, upper) for A2
    epsilon_grid: tuple = (0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0)

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise FsucError("alpha must be in (0, 1)")
        if self.epsilon is not None and self.epsilon < 0:
            raise FsucError("epsilon must be nonnegative")
        if self.r_step <= 0:
            raise FsucError("r_step must be positive")
        if not (0.0 <= self.mix_ratio <= 1.0):
            raise FsucError("mix_ratio must be in [0, 1]")
        if self.n_samples < 1:
            raise FsucError("need at least one sample")

    @property
    def window_half_width(self) -> float:
        return self.r_step / 2.0 if self.delta_r is None else self.delta_r


@dataclass
class DrccCertificate:
    feasible: bool
    optimum: float
    epsilon: float
    lambda_: float
    delta0: float
    sigma: np.ndarray = field(repr=False, default=None)
    status: str = ""


def _support_box(samples, config: AmbiguityConfig):
    if config.support_box is not None:
        lo, hi = config.support_box
    else:
        std = float(np.std(samples))
        lo = float(np.min(samples)) - 3.0 * std
        hi = float(np.max(samples)) + 3.0 * std
        if hi <= lo:  # all samples equal
            lo, hi = lo - 1.0, hi + 1.0
    if np.any(samples < lo) or np.any(samples > hi):
        raise FsucError("support box must contain every sample")
    return lo, hi


def drcc_certify(a2_samples, config: AmbiguityConfig,
                 epsilon: float | None = None) -> DrccCertificate:
    """Solve the certificate LP for one sample set.

    Returns feasible=True iff the optimum of
    min lambda*eps + mean(sigma) subject to the dual CVaR rows is <= 1e-9.
    """
    xi = np.asarray(a2_samples, dtype=float)
    if xi.ndim != 1 or xi.size < 1:
        raise FsucError("need a one-dimensional, nonempty sample array")
    eps = config.epsilon if epsilon is None else epsilon
    if eps is None:
        raise FsucError("epsilon unresolved; pass a value or use select_epsilon")
    lo, hi = _support_box(xi, config)
    u = xi.size
    alpha = config.alpha
    a_star = config.a2_star
    inv = 1.0 / (1.0 - alpha)

    m = solver.LinearModel(name="drcc_certificate")
    lam = m.add_variable("lam", lb=0.0, obj=eps)
    delta0 = m.add_variable("delta0", lb=-np.inf)
    sig = [m.add_variable(f"sigma_{i}", lb=-np.inf, obj=1.0 / u) for i in range(u)]
    g = {}
    for p in (1, 2, 3):
        for i in range(u):
            g[(p, i, 0)] = m.add_variable(f"g{p}_{i}_a", lb=0.0)
            g[(p, i, 1)] = m.add_variable(f"g{p}_{i}_b", lb=0.0)

    for i in range(u):
        # slack of the support rows at the sample: H - B xi = (hi - xi, xi - lo)
        sa = hi - xi[i]
        sb = xi[i] - lo
        # piece 1: (xi - A2* - alpha*delta0)/(1-alpha) + gamma1.(H - B xi) <= sigma
        m.add_row(
            f"p1_{i}",
            [(delta0, -alpha * inv), (g[(1, i, 0)], sa), (g[(1, i, 1)], sb), (sig[i], -1.0)],
            "<=",
            -(xi[i] - a_star) * inv,
        )
        # piece 2: (-xi - A2* - alpha*delta0)/(1-alpha) + gamma2.(H - B xi) <= sigma
        m.add_row(
            f"p2_{i}",
            [(delta0, -alpha * inv), (g[(2, i, 0)], sa), (g[(2, i, 1)], sb), (sig[i], -1.0)],
            "<=",
            -(-xi[i] - a_star) * inv,
        )
        # piece 3: delta0 + gamma3.(H - B xi) <= sigma
        m.add_row(
            f"p3_{i}",
            [(delta0, 1.0), (g[(3, i, 0)], sa), (g[(3, i, 1)], sb), (sig[i], -1.0)],
            "<=",
            0.0,
        )
        # dual-norm rows |B^T gamma_p - a_p| <= lambda, a = (1/(1-a), -1/(1-a), 0)
        for p, a_k in ((1, inv), (2, -inv), (3, 0.0)):
            bg = [(g[(p, i, 0)], 1.0), (g[(p, i, 1)], -1.0)]
            m.add_row(f"n{p}p_{i}", bg + [(lam, -1.0)], "<=", a_k)
            m.add_row(f"n{p}m_{i}", [(j, -c) for j, c in bg] + [(lam, -1.0)], "<=", -a_k)

    res = solver.solve_lp(m)
    if res.status != solver.OPTIMAL:
        raise FsucError(f"certificate LP ended with status {res.status}")
    opt = float(res.objective)
    return DrccCertificate(
        feasible=opt <= CERT_TOL,
        optimum=opt,
        epsilon=float(eps),
        lambda_=float(res.values[lam]),
        delta0=float(res.values[delta0]),
        sigma=res.values[sig[0]:sig[-1] + 1].copy(),
        status=res.status,
    )


def empirical_cvar(samples, alpha: float) -> float:
    """Exact empirical CVaR_alpha of |samples| (oracle for epsilon = 0).

    CVaR_alpha(X) = min_eta eta + E[(X - eta)+]/(1 - alpha); for an empirical
    distribution the minimum is attained at a sample point.
    """
    x = np.abs(np.asarray(samples, dtype=float))
    best = np.inf
    for eta in np.unique(x):
        best = min(best, eta + np.maximum(x - eta, 0.0).mean() / (1.0 - alpha))
    return float(best)


def select_epsilon(a2_samples, config: AmbiguityConfig, folds: int = 5,
                   seed: int = 0) -> float:
    """Smallest grid epsilon whose certificate decision is stable across folds.

    Each fold's decision is computed on the complement of the fold; epsilon is
    stable when all fold decisions agree.  Falls back to the largest grid
    value when nothing is stable.
    """
    xi = np.asarray(a2_samples, dtype=float)
    rng = np.random.default_rng(seed)
    order = rng.permutation(xi.size)
    parts = np.array_split(order, folds)
    box = _support_box(xi, config)
    sub = AmbiguityConfig(
        alpha=config.alpha, a2_star=config.a2_star, epsilon=0.0,
        r_step=config.r_step, support_box=box,
        n_samples=config.n_samples,
    )
    for eps in sorted(config.epsilon_grid):
        decisions = []
        for k in range(folds):
            keep = np.concatenate([parts[j] for j in range(folds) if j != k])
            decisions.append(drcc_certify(xi[keep], sub, epsilon=eps).feasible)
        if len(set(decisions)) == 1:
            return float(eps)
    return float(max(config.epsilon_grid))
