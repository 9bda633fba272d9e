"""Piecewise-affine surrogate of the maximum toleratable disturbance power.

The surrogate maps response-model aggregates that are linear in the droop
gains (for a fixed commitment) to an MTDP estimate, evaluated as a min over
affine segments so the nadir constraint stays linear inside the MILP.  Fitted
models are shifted down until no training point is over-approximated, plus a
safety margin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import FsucError
from .dynamics import FrequencyResponseModel, aggregate_response, mtdp

FEATURE_NAMES = ("r_g", "r_b", "gain_weighted_hp", "gain_weighted_reheat", "inertia")


class DegenerateFeaturesError(FsucError):
    """Training features are rank deficient; the affine fit is ill posed."""


@dataclass
class FeatureVector:
    """Aggregates that determine the reduced-model nadir.

    psi = (r_g, r_b); phi = (sum_i gain_i*F_i, sum_i gain_i*T_i); inertia = H.
    All five entries are linear in the droop gains for a fixed commitment.
    """

    psi: np.ndarray
    phi: np.ndarray
    inertia: float

    def as_array(self) -> np.ndarray:
        return np.array([*self.psi, *self.phi, self.inertia], dtype=float)


def features(model: FrequencyResponseModel) -> FeatureVector:
    phi_f = sum(u.gain * u.hp_fraction for u in model.units)
    phi_t = sum(u.gain * u.t_reheat for u in model.units)
    return FeatureVector(
        psi=np.array([model.r_g, model.r_b]),
        phi=np.array([phi_f, phi_t]),
        inertia=model.h,
    )


@dataclass
class PiecewiseAffineModel:
    """min over segments of c_l . x + h_l (concave piecewise-affine)."""

    coeffs: np.ndarray  # (L, n_features)
    intercepts: np.ndarray  # (L,)
    safety_margin: float
    nadir_limit: float  # per-unit label definition (schema)
    feature_names: tuple = FEATURE_NAMES
    train_rmse: float = float("nan")
    shift: float = 0.0

    def __post_init__(self):
        self.coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        self.intercepts = np.asarray(self.intercepts, dtype=float)
        if self.coeffs.shape[0] != self.intercepts.shape[0] or self.coeffs.shape[0] < 1:
            raise FsucError("segment coefficient/intercept shapes disagree")

    @property
    def n_segments(self) -> int:
        return self.coeffs.shape[0]

    def segment_values(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.coeffs.shape[1]:
            raise FsucError(
                f"feature dimension {x.shape[1]} != model dimension {self.coeffs.shape[1]}"
            )
        return x @ self.coeffs.T + self.intercepts

    def predict(self, x):
        """MTDP estimate (pu); scalar for a single feature vector."""
        if isinstance(x, FeatureVector):
            x = x.as_array()
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        vals = self.segment_values(x).min(axis=1)
        return float(vals[0]) if single else vals

    def to_json(self, path) -> None:
        doc = {
            "schema": "fsuc-fnc-v1",
            "feature_names": list(self.feature_names),
            "coefficients": self.coeffs.tolist(),
            "intercepts": self.intercepts.tolist(),
            "safety_margin": self.safety_margin,
            "nadir_limit": self.nadir_limit,
            "train_rmse": None if np.isnan(self.train_rmse) else self.train_rmse,
            "shift": self.shift,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "PiecewiseAffineModel":
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("schema") != "fsuc-fnc-v1":
            raise FsucError(f"unknown FNC model schema in {path}")
        return cls(
            coeffs=np.array(doc["coefficients"]),
            intercepts=np.array(doc["intercepts"]),
            safety_margin=float(doc["safety_margin"]),
            nadir_limit=float(doc["nadir_limit"]),
            feature_names=tuple(doc["feature_names"]),
            train_rmse=float(doc["train_rmse"]) if doc.get("train_rmse") is not None else float("nan"),
            shift=float(doc.get("shift", 0.0)),
        )


def predict(model: PiecewiseAffineModel, feats) -> float:
    return model.predict(feats)


# ---------------------------------------------------------------------------
# Training data
# ---------------------------------------------------------------------------


@dataclass
class TrainingConfig:
    nadir_limit: float  # pu
    seed: int = 0
    oracle: str = "sim-full"  # label source; see dynamics.mtdp
    damping: float = 1.0
    min_online: int = 1
    dt: float = 1e-3
    horizon: float = 30.0


def generate_training_set(system, n: int, config: TrainingConfig):
    """Sample (features, mtdp label) pairs over random commitments and gains.

    Each sample draws a random commitment (online probability itself drawn
    per sample for coverage of sparse and full fleets) and per-resource droop
    gains: either zero (PFC participation off, the K = 0 state of the gain
    bounds) or uniform within the resource's bounds.  Deterministic for a
    fixed seed.  Returns (X of shape (n, 5), y of shape (n,)).
    """
    rng = np.random.default_rng(config.seed)
    gens = system.generators
    xs = np.empty((n, len(FEATURE_NAMES)))
    ys = np.empty(n)
    for s in range(n):
        while True:
            p_on = rng.uniform(0.25, 1.0)
            commitment = {g.id: bool(rng.random() < p_on) for g in gens}
            if sum(commitment.values()) >= max(config.min_online, 1):
                break
        p_pfc = rng.uniform(0.3, 1.0)
        gains = {}
        for g in gens:
            lo, hi = g.droop_gain_bounds
            participates = commitment[g.id] and rng.random() < p_pfc
            gains[g.id] = float(rng.uniform(lo, hi)) if participates else 0.0
        for ds in system.dsfrs:
            lo, hi = ds.droop_gain_bounds
            gains[ds.id] = float(rng.uniform(lo, hi)) if rng.random() < p_pfc else 0.0
        model = aggregate_response(system, commitment, gains, d=config.damping)
        xs[s] = features(model).as_array()
        ys[s] = mtdp(
            model,
            config.nadir_limit,
            oracle=config.oracle,
            dt=config.dt,
            horizon=config.horizon,
        )
    return xs, ys


# ---------------------------------------------------------------------------
# Min-affine regression
# ---------------------------------------------------------------------------


def _lstsq_plane(x, y):
    a = np.column_stack([x, np.ones(len(x))])
    sol, *_ = np.linalg.lstsq(a, y, rcond=None)
    return sol[:-1], sol[-1]


def fit(
    x,
    y,
    segments: int = 6,
    safety_margin: float = 0.002,
    nadir_limit: float = float("nan"),
    restarts: int = 50,
    max_iter: int = 100,
    seed: int = 0,
) -> PiecewiseAffineModel:
    """Fit a min-affine model by alternating partition / least squares.

    Points are greedily reassigned to their argmin segment, each segment is
    refit by least squares, repeated to convergence; the best of `restarts`
    seeded initializations by RMSE wins.  The fitted surface is then shifted
    down by the largest positive training residual plus safety_margin so no
    training point is over-approximated.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, dim = x.shape
    if segments < 1:
        raise FsucError("need at least one segment")
    if n < 10 * segments:
        raise FsucError(f"need >= {10 * segments} samples for {segments} segments, got {n}")
    if np.linalg.matrix_rank(np.column_stack([x, np.ones(n)])) < dim + 1:
        raise DegenerateFeaturesError(
            "training features are rank deficient; drop constant features or "
            "enrich the sampling"
        )

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        assign = rng.integers(0, segments, size=n)
        coeffs = np.zeros((segments, dim))
        icepts = np.zeros(segments)
        prev = None
        for _ in range(max_iter):
            for l in range(segments):
                mask = assign == l
                if mask.sum() < dim + 1:
                    # reseed starved segment on the currently worst-fit points
                    preds = (x @ coeffs.T + icepts).min(axis=1)
                    worst = np.argsort(-np.abs(preds - y))[: dim + 1]
                    mask = np.zeros(n, dtype=bool)
                    mask[worst] = True
                coeffs[l], icepts[l] = _lstsq_plane(x[mask], y[mask])
            seg_vals = x @ coeffs.T + icepts
            assign = np.argmin(seg_vals, axis=1)
            key = assign.tobytes()
            if key == prev:
                break
            prev = key
        rmse = float(np.sqrt(np.mean((seg_vals.min(axis=1) - y) ** 2)))
        if best is None or rmse < best[0]:
            best = (rmse, coeffs.copy(), icepts.copy())

    rmse, coeffs, icepts = best
    residuals = (x @ coeffs.T + icepts).min(axis=1) - y
    shift = max(float(residuals.max()), 0.0) + safety_margin
    return PiecewiseAffineModel(
        coeffs=coeffs,
        intercepts=icepts - shift,
        safety_margin=safety_margin,
        nadir_limit=nadir_limit,
        train_rmse=rmse,
        shift=shift,
    )
