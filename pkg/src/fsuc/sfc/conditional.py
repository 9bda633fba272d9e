"""Conditional distribution of the control-performance index given a window.

Given a fitted joint (copula over (A2, d1, d2, d3, r) plus marginals) and a
conditioning window (d-box and reserve interval), the conditional density of
A2 follows by integrating the copula density over the window image in u-space
and renormalizing: f(a | win) = f_a(a) * g(F_a(a)) / Z with
g(u0) = integral of c(u0, v) over the window box and Z = integral of g.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .. import FsucError
from .copulas import FittedCopula
from .stats import MarginalModel


class EmptyWindowError(FsucError):
    """Conditioning window has (numerically) zero probability."""


@dataclass
class ConditioningWindow:
    d_lower: np.ndarray  # (3,) MW
    d_upper: np.ndarray  # (3,) MW
    r_lower: float  # MW
    r_upper: float  # MW

    def __post_init__(self):
        self.d_lower = np.asarray(self.d_lower, dtype=float)
        self.d_upper = np.asarray(self.d_upper, dtype=float)
        if np.any(self.d_lower > self.d_upper) or self.r_lower > self.r_upper:
            raise FsucError("window bounds out of order")

    def contains(self, d, r) -> bool:
        d = np.asarray(d, dtype=float)
        return bool(
            np.all(d >= self.d_lower)
            and np.all(d <= self.d_upper)
            and self.r_lower <= r <= self.r_upper
        )


@dataclass
class JointModel:
    """Copula plus marginals in column order (a2, d_load, d_wind, d_solar, r)."""

    copula: FittedCopula
    marginals: list  # 5 MarginalModel

    def __post_init__(self):
        if len(self.marginals) != self.copula.dim:
            raise FsucError("marginal count must match copula dimension")

    def to_json(self, path) -> None:
        doc = {
            "schema": "fsuc-joint-v1",
            "copula": self.copula.to_dict(),
            "marginals": [m.to_dict() for m in self.marginals],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "JointModel":
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("schema") != "fsuc-joint-v1":
            raise FsucError(f"unknown joint model schema in {path}")
        return cls(
            copula=FittedCopula.from_dict(doc["copula"]),
            marginals=[MarginalModel.from_dict(m) for m in doc["marginals"]],
        )


class ConditionalModel:
    """Distribution of A2 given the conditioning window."""

    def __init__(self, joint: JointModel, window: ConditioningWindow,
                 u0_grid, g_values, mass):
        self.joint = joint
        self.window = window
        self.u0_grid = np.asarray(u0_grid)
        self.g_values = np.asarray(g_values)
        self.mass = float(mass)
        cumulative = np.concatenate(
            [[0.0], np.cumsum((self.g_values[1:] + self.g_values[:-1]) / 2.0
                              * np.diff(self.u0_grid))]
        )
        self._cdf_u0 = cumulative / cumulative[-1]

    @property
    def marginal_a2(self) -> MarginalModel:
        return self.joint.marginals[0]

    def pdf(self, a):
        a = np.asarray(a, dtype=float)
        u0 = np.clip(self.marginal_a2.cdf(a), self.u0_grid[0], self.u0_grid[-1])
        g = np.interp(u0, self.u0_grid, self.g_values)
        return self.marginal_a2.pdf(a) * g / self.mass

    def cdf(self, a):
        a = np.asarray(a, dtype=float)
        u0 = np.clip(self.marginal_a2.cdf(a), self.u0_grid[0], self.u0_grid[-1])
        return np.interp(u0, self.u0_grid, self._cdf_u0)

    def ppf(self, q):
        q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
        u0 = np.interp(q, self._cdf_u0, self.u0_grid)
        return self.marginal_a2.ppf(u0)

    def sample(self, n: int, seed) -> np.ndarray:
        """Inverse-CDF samples; deterministic per seed (int or Generator)."""
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return np.asarray(self.ppf(rng.random(n)))


def _gauss_legendre_box(lows, highs, n_nodes):
    """Tensor-product GL nodes/weights over a 4-dim box."""
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    axes_nodes = []
    axes_weights = []
    for lo, hi in zip(lows, highs):
        half = (hi - lo) / 2.0
        axes_nodes.append((x + 1.0) * half + lo)
        axes_weights.append(w * half)
    grids = np.meshgrid(*axes_nodes, indexing="ij")
    nodes = np.column_stack([g.ravel() for g in grids])
    wgrids = np.meshgrid(*axes_weights, indexing="ij")
    weights = np.prod(np.column_stack([g.ravel() for g in wgrids]), axis=1)
    return nodes, weights


def conditional_density(
    joint: JointModel,
    window: ConditioningWindow,
    grid_size: int = 513,
    quad_nodes: int = 12,
    mass_floor: float = 1e-12,
) -> ConditionalModel:
    """Build the conditional A2 model by quadrature over the window box."""
    eps = 1e-9
    lows, highs = [], []
    for k in range(3):
        lows.append(float(joint.marginals[k + 1].cdf(window.d_lower[k])))
        highs.append(float(joint.marginals[k + 1].cdf(window.d_upper[k])))
    lows.append(float(joint.marginals[4].cdf(window.r_lower)))
    highs.append(float(joint.marginals[4].cdf(window.r_upper)))
    lows = np.clip(lows, eps, 1 - eps)
    highs = np.clip(highs, eps, 1 - eps)
    if np.any(highs - lows <= 0):
        raise EmptyWindowError("window maps to an empty box in u-space")

    nodes, weights = _gauss_legendre_box(lows, highs, quad_nodes)
    u0 = np.linspace(eps, 1 - eps, grid_size)
    g = np.empty(grid_size)
    chunk = max(1, int(2e6 // max(len(nodes), 1)))
    for start in range(0, grid_size, chunk):
        block = u0[start:start + chunk]
        logc = joint.copula.slice_log_density(block, nodes)
        g[start:start + chunk] = np.exp(logc) @ weights
    mass = float(np.trapezoid(g, u0))
    if mass < mass_floor:
        raise EmptyWindowError(
            f"window probability {mass:.3e} below floor {mass_floor:.0e}"
        )
    return ConditionalModel(joint, window, u0, g, mass)


def sample_conditional(model: ConditionalModel, n: int, seed) -> np.ndarray:
    if n < 1:
        raise FsucError("need n >= 1 samples")
    return model.sample(n, seed)
