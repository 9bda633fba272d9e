"""ACE statistics, smoothed marginals and power-variation intervals."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .. import FsucError

UP = "up"
DOWN = "dn"
DIRECTIONS = (UP, DOWN)


@dataclass
class HistoryRecord:
    """One operating interval: control performance, variations, reserve."""

    hour: int  # 0..23
    a2: float  # MW, signed average ACE over the interval
    d: np.ndarray  # MW (load, wind, solar) start-to-end variation
    r_up: float  # MW, deployed upward SFC reserve
    r_dn: float  # MW, deployed downward SFC reserve

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        if self.d.shape != (3,):
            raise FsucError("d must hold (load, wind, solar) variations")
        if self.r_up < 0 or self.r_dn < 0:
            raise FsucError("reserve capacities must be nonnegative")

    def reserve(self, direction: str) -> float:
        if direction == UP:
            return self.r_up
        if direction == DOWN:
            return self.r_dn
        raise FsucError(f"unknown direction {direction!r}")


def compute_a2(ace_series, window: int | None = None) -> float:
    """Average ACE over a compliance window (arithmetic mean of the series)."""
    series = np.asarray(ace_series, dtype=float)
    if series.size == 0:
        raise FsucError("empty ACE series")
    if window is not None and series.size != window:
        raise FsucError(f"ACE series length {series.size} != window {window}")
    return float(series.mean())


def records_matrix(records, direction: str) -> np.ndarray:
    """(n, 5) matrix of (a2, d_load, d_wind, d_solar, r_direction)."""
    return np.array(
        [[r.a2, r.d[0], r.d[1], r.d[2], r.reserve(direction)] for r in records]
    )


# ---------------------------------------------------------------------------
# History CSV
# ---------------------------------------------------------------------------

_HISTORY_HEADER = ["day", "hour", "a2_mw", "d_load_mw", "d_wind_mw", "d_solar_mw",
                   "r_up_mw", "r_dn_mw"]


def save_history(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_HISTORY_HEADER)
        for i, r in enumerate(records):
            w.writerow(
                [i // 24, r.hour, repr(r.a2), repr(r.d[0]), repr(r.d[1]),
                 repr(r.d[2]), repr(r.r_up), repr(r.r_dn)]
            )


def load_history(path, ace_window: int = 10) -> list[HistoryRecord]:
    """Read history records from CSV.

    Accepts either an `a2_mw` column or a raw `ace_series_mw` column holding
    semicolon-separated 1-minute ACE samples, which are averaged through
    compute_a2 with the given window.
    """
    path = Path(path)
    records = []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames is None:
            raise FsucError(f"{path}: empty history file")
        has_a2 = "a2_mw" in rd.fieldnames
        has_series = "ace_series_mw" in rd.fieldnames
        if not has_a2 and not has_series:
            raise FsucError(f"{path}: need a2_mw or ace_series_mw column")
        for row in rd:
            if has_a2 and row["a2_mw"] not in (None, ""):
                a2 = float(row["a2_mw"])
            else:
                series = [float(v) for v in row["ace_series_mw"].split(";")]
                a2 = compute_a2(series, window=ace_window if len(series) == ace_window else None)
            records.append(
                HistoryRecord(
                    hour=int(row["hour"]),
                    a2=a2,
                    d=np.array([
                        float(row["d_load_mw"]),
                        float(row["d_wind_mw"]),
                        float(row["d_solar_mw"]),
                    ]),
                    r_up=float(row["r_up_mw"]),
                    r_dn=float(row["r_dn_mw"]),
                )
            )
    return records


# ---------------------------------------------------------------------------
# Smoothed marginals
# ---------------------------------------------------------------------------


@dataclass
class MarginalModel:
    """Gaussian-kernel smoothed empirical distribution on a support grid."""

    grid: np.ndarray
    cdf_values: np.ndarray
    bandwidth: float
    samples: np.ndarray

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        # exact KDE cdf: mean of normal cdfs centered at the samples
        z = (x[..., None] - self.samples[None, :]) / self.bandwidth
        return ndtr(z).mean(axis=-1)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self.samples[None, :]) / self.bandwidth
        phi = np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)
        return phi.mean(axis=-1) / self.bandwidth

    def ppf(self, q):
        q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
        return np.interp(q, self.cdf_values, self.grid)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "cdf_values": self.cdf_values.tolist(),
            "bandwidth": self.bandwidth,
            "samples": self.samples.tolist(),
        }

    @classmethod
    def from_dict(cls, doc) -> "MarginalModel":
        return cls(
            grid=np.array(doc["grid"]),
            cdf_values=np.array(doc["cdf_values"]),
            bandwidth=float(doc["bandwidth"]),
            samples=np.array(doc["samples"]),
        )


def fit_marginal(samples, grid_size: int = 513) -> MarginalModel:
    """Kernel-smoothed CDF/PDF with Silverman bandwidth.

    Needs at least 30 samples with nonzero dispersion.
    """
    samples = np.sort(np.asarray(samples, dtype=float))
    n = samples.size
    if n < 30:
        raise FsucError(f"need >= 30 samples to fit a marginal, got {n}")
    std = float(samples.std(ddof=1))
    iqr = float(np.subtract(*np.percentile(samples, [75, 25])))
    spread = min(std, iqr / 1.349) if iqr > 0 else std
    if spread <= 0:
        raise FsucError("degenerate sample (all values equal)")
    bw = 0.9 * spread * n ** (-0.2)
    lo = samples[0] - 6.0 * bw
    hi = samples[-1] + 6.0 * bw
    grid = np.linspace(lo, hi, grid_size)
    z = (grid[:, None] - samples[None, :]) / bw
    cdf = ndtr(z).mean(axis=1)
    return MarginalModel(grid=grid, cdf_values=cdf, bandwidth=bw, samples=samples)


# ---------------------------------------------------------------------------
# Power-variation intervals
# ---------------------------------------------------------------------------


def forecast_intervals(records, hour: int, beta: float = 0.9):
    """Empirical central-beta interval of same-hour variations per source.

    Returns (d_lower, d_upper) arrays of shape (3,).  Pass-through of
    externally supplied intervals is the caller's concern (they can be fed
    straight into compute_requirement).
    """
    if not (0 < beta <= 1):
        raise FsucError("beta must be in (0, 1]")
    rows = np.array([r.d for r in records if r.hour == hour])
    if rows.shape[0] < 100:
        raise FsucError(
            f"need >= 100 records for hour {hour}, got {rows.shape[0]}"
        )
    q_lo = (1.0 - beta) / 2.0
    q_hi = (1.0 + beta) / 2.0
    return (
        np.quantile(rows, q_lo, axis=0),
        np.quantile(rows, q_hi, axis=0),
    )
