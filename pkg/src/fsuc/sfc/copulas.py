"""Copula families, maximum-likelihood fitting and BIC model selection.

Five families: Gaussian, Student-t, and exchangeable one-parameter Clayton,
Gumbel and Frank.  Fitting runs on rank pseudo-observations.  Elliptical
correlation comes from transformed scores (normalized sample covariance,
positive-definite projected); the Student-t dof is profiled over {3..30};
Archimedean thetas come from a bounded 1-D likelihood search.

Archimedean d-dim densities need the d-th generator derivative; for Gumbel
and Frank these are produced symbolically (sympy, cached lambdify) rather
than transcribed by hand.  Clayton has a closed form.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, stats
from scipy.special import gammaln, ndtr, ndtri

from .. import FsucError
from .stats import records_matrix

FAMILIES = ("gaussian", "student_t", "clayton", "gumbel", "frank")

_THETA_DOMAIN = {
    # complete monotonicity in d >= 3 requires theta > 0 (Frank, Clayton)
    "clayton": (1e-3, 25.0),
    "gumbel": (1.0 + 1e-6, 25.0),
    "frank": (1e-3, 40.0),
}
_DOF_GRID = tuple(range(3, 31))


class CopulaFitError(FsucError):
    """All candidate families failed to fit."""


def pseudo_observations(data) -> np.ndarray:
    """Rank transform each column to (0,1): rank/(n+1)."""
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    ranks = np.empty_like(data)
    for j in range(data.shape[1]):
        ranks[:, j] = stats.rankdata(data[:, j], method="average")
    return ranks / (n + 1.0)


def _nearest_corr(mat: np.ndarray) -> np.ndarray:
    """Project a symmetric matrix onto PD correlation matrices."""
    mat = (mat + mat.T) / 2.0
    w, v = np.linalg.eigh(mat)
    w = np.maximum(w, 1e-6 * max(w.max(), 1e-12))
    fixed = (v * w) @ v.T
    scale = np.sqrt(np.diag(fixed))
    fixed = fixed / np.outer(scale, scale)
    np.fill_diagonal(fixed, 1.0)
    return fixed


# ---------------------------------------------------------------------------
# Archimedean generator machinery (symbolic d-th derivatives)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _generator_derivative(family: str, dim: int):
    """Vectorized f(theta, t) = (-1)^dim * psi^(dim)(t), positive by c.m."""
    import sympy as sy

    th, t = sy.symbols("theta t", positive=True)
    if family == "gumbel":
        psi = sy.exp(-(t ** (1 / th)))
    elif family == "frank":
        psi = -sy.log(1 - (1 - sy.exp(-th)) * sy.exp(-t)) / th
    else:
        raise FsucError(f"no symbolic generator for {family}")
    deriv = sy.diff(psi, t, dim) * (-1) ** dim
    return sy.lambdify((th, t), deriv, modules="numpy")


def _psi_inverse(family, theta, u):
    if family == "clayton":
        return u ** (-theta) - 1.0
    if family == "gumbel":
        return (-np.log(u)) ** theta
    if family == "frank":
        return -np.log(-np.expm1(-theta * u) / -np.expm1(-theta))
    raise FsucError(family)


def _log_neg_psi_inverse_prime(family, theta, u):
    """log(-d/du psi^{-1}(u)), elementwise."""
    if family == "clayton":
        return np.log(theta) - (theta + 1.0) * np.log(u)
    if family == "gumbel":
        return np.log(theta) + (theta - 1.0) * np.log(-np.log(u)) - np.log(u)
    if family == "frank":
        return np.log(theta) - theta * u - np.log(-np.expm1(-theta * u))
    raise FsucError(family)


def _psi(family, theta, s):
    if family == "clayton":
        return (1.0 + s) ** (-1.0 / theta)
    if family == "gumbel":
        return np.exp(-(s ** (1.0 / theta)))
    if family == "frank":
        return -np.log1p(-(-np.expm1(-theta)) * np.exp(-s)) / theta
    raise FsucError(family)


def _archimedean_log_density(family, theta, u):
    u = np.clip(np.asarray(u, dtype=float), 1e-12, 1 - 1e-12)
    d = u.shape[-1]
    t_sum = _psi_inverse(family, theta, u).sum(axis=-1)
    jac = _log_neg_psi_inverse_prime(family, theta, u).sum(axis=-1)
    if family == "clayton":
        k = np.arange(d)
        lead = np.log1p(k * theta).sum()
        # (-1)^d psi^(d)(s) = (1+s)^(-(1/th+d)) prod(1/th + k); jac carries th^d
        core = lead - d * np.log(theta) - (1.0 / theta + d) * np.log1p(t_sum)
        return core + jac
    fd = _generator_derivative(family, d)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        val = fd(theta, np.maximum(t_sum, 1e-300))
        core = np.where(val > 0, np.log(np.maximum(val, 1e-300)), -np.inf)
    return core + jac


# ---------------------------------------------------------------------------
# Elliptical log-densities
# ---------------------------------------------------------------------------


def _gaussian_log_density(corr, u):
    u = np.clip(np.asarray(u, dtype=float), 1e-12, 1 - 1e-12)
    z = ndtri(u)
    prec = np.linalg.inv(corr)
    sign, logdet = np.linalg.slogdet(corr)
    quad = np.einsum("...i,ij,...j->...", z, prec - np.eye(corr.shape[0]), z)
    return -0.5 * logdet - 0.5 * quad


def _student_log_density(corr, dof, u):
    u = np.clip(np.asarray(u, dtype=float), 1e-12, 1 - 1e-12)
    d = corr.shape[0]
    z = stats.t.ppf(u, dof)
    prec = np.linalg.inv(corr)
    sign, logdet = np.linalg.slogdet(corr)
    quad = np.einsum("...i,ij,...j->...", z, prec, z)
    log_joint = (
        gammaln((dof + d) / 2.0)
        - gammaln(dof / 2.0)
        - d / 2.0 * np.log(dof * np.pi)
        - 0.5 * logdet
        - (dof + d) / 2.0 * np.log1p(quad / dof)
    )
    log_marg = stats.t.logpdf(z, dof).sum(axis=-1)
    return log_joint - log_marg


# ---------------------------------------------------------------------------
# Fitted model
# ---------------------------------------------------------------------------


@dataclass
class FittedCopula:
    family: str
    dim: int
    corr: np.ndarray | None = None
    dof: float | None = None
    theta: float | None = None
    log_likelihood: float = float("nan")
    n_obs: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise FsucError(f"unknown copula family {self.family!r}")
        if self.family in ("gaussian", "student_t"):
            self.corr = np.asarray(self.corr, dtype=float)
            w = np.linalg.eigvalsh(self.corr)
            if w.min() <= 0 or not np.allclose(np.diag(self.corr), 1.0):
                raise FsucError("correlation matrix must be PD with unit diagonal")
            if self.family == "student_t" and not (self.dof and self.dof > 2):
                raise FsucError("student_t dof must exceed 2")
        else:
            lo, hi = _THETA_DOMAIN[self.family]
            if self.theta is None or not (lo <= self.theta <= hi):
                raise FsucError(f"{self.family} theta outside domain [{lo}, {hi}]")

    @property
    def n_params(self) -> int:
        if self.family == "gaussian":
            return self.dim * (self.dim - 1) // 2
        if self.family == "student_t":
            return self.dim * (self.dim - 1) // 2 + 1
        return 1

    @property
    def bic(self) -> float:
        """-2 ln(L_max) + q ln(n)."""
        return -2.0 * self.log_likelihood + self.n_params * math.log(self.n_obs)

    @classmethod
    def independent(cls, dim: int, n_obs: int = 1) -> "FittedCopula":
        return cls(family="gaussian", dim=dim, corr=np.eye(dim),
                   log_likelihood=0.0, n_obs=n_obs)

    # -- densities -------------------------------------------------------
    def log_density(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.dim:
            raise FsucError(f"points have dim {u.shape[-1]}, model dim {self.dim}")
        if self.family == "gaussian":
            return _gaussian_log_density(self.corr, u)
        if self.family == "student_t":
            return _student_log_density(self.corr, self.dof, u)
        return _archimedean_log_density(self.family, self.theta, u)

    def density(self, u) -> np.ndarray:
        return np.exp(self.log_density(u))

    def slice_log_density(self, u_first, u_rest) -> np.ndarray:
        """log c(u0, v) on the grid u_first (m,) x u_rest (p, dim-1) -> (m, p).

        Factorizes the per-coordinate transforms so the conditional-density
        quadrature does not re-evaluate ppf transforms per pair.
        """
        u0 = np.clip(np.asarray(u_first, dtype=float), 1e-12, 1 - 1e-12)
        ur = np.clip(np.asarray(u_rest, dtype=float), 1e-12, 1 - 1e-12)
        if ur.shape[1] != self.dim - 1:
            raise FsucError("u_rest must have dim-1 columns")
        if self.family in ("gaussian", "student_t"):
            if self.family == "gaussian":
                z0 = ndtri(u0)
                zr = ndtri(ur)
            else:
                z0 = stats.t.ppf(u0, self.dof)
                zr = stats.t.ppf(ur, self.dof)
            prec = np.linalg.inv(self.corr)
            _, logdet = np.linalg.slogdet(self.corr)
            q00 = prec[0, 0]
            q0r = prec[0, 1:]
            qrr = prec[1:, 1:]
            cross = zr @ q0r  # (p,)
            quad_r = np.einsum("pi,ij,pj->p", zr, qrr, zr)
            quad = (
                q00 * z0[:, None] ** 2
                + 2.0 * z0[:, None] * cross[None, :]
                + quad_r[None, :]
            )
            if self.family == "gaussian":
                plain = z0[:, None] ** 2 + (zr ** 2).sum(axis=1)[None, :]
                return -0.5 * logdet - 0.5 * (quad - plain)
            d = self.dim
            dof = self.dof
            log_joint = (
                gammaln((dof + d) / 2.0)
                - gammaln(dof / 2.0)
                - d / 2.0 * np.log(dof * np.pi)
                - 0.5 * logdet
                - (dof + d) / 2.0 * np.log1p(quad / dof)
            )
            lm0 = stats.t.logpdf(z0, dof)
            lmr = stats.t.logpdf(zr, dof).sum(axis=1)
            return log_joint - lm0[:, None] - lmr[None, :]

        th = self.theta
        t0 = _psi_inverse(self.family, th, u0)
        tr = _psi_inverse(self.family, th, ur).sum(axis=1)
        l0 = _log_neg_psi_inverse_prime(self.family, th, u0)
        lr = _log_neg_psi_inverse_prime(self.family, th, ur).sum(axis=1)
        t_sum = t0[:, None] + tr[None, :]
        d = self.dim
        if self.family == "clayton":
            k = np.arange(d)
            core = (
                np.log1p(k * th).sum()
                - d * np.log(th)
                - (1.0 / th + d) * np.log1p(t_sum)
            )
        else:
            fd = _generator_derivative(self.family, d)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
                val = fd(th, np.maximum(t_sum, 1e-300))
                core = np.where(val > 0, np.log(np.maximum(val, 1e-300)), -np.inf)
        return core + l0[:, None] + lr[None, :]

    # -- sampling --------------------------------------------------------
    def sample(self, n: int, rng) -> np.ndarray:
        """n copula samples in (0,1)^dim; rng is a numpy Generator."""
        d = self.dim
        if self.family == "gaussian":
            chol = np.linalg.cholesky(self.corr)
            z = rng.standard_normal((n, d)) @ chol.T
            return ndtr(z)
        if self.family == "student_t":
            chol = np.linalg.cholesky(self.corr)
            z = rng.standard_normal((n, d)) @ chol.T
            w = rng.chisquare(self.dof, size=n) / self.dof
            return stats.t.cdf(z / np.sqrt(w)[:, None], self.dof)
        th = self.theta
        e = rng.exponential(size=(n, d))
        if self.family == "clayton":
            v = rng.gamma(shape=1.0 / th, scale=1.0, size=n)
        elif self.family == "gumbel":
            alpha = 1.0 / th
            ang = rng.uniform(0.0, np.pi, size=n)
            w = rng.exponential(size=n)
            v = (
                np.sin(alpha * ang) / np.sin(ang) ** (1.0 / alpha)
            ) * (np.sin((1.0 - alpha) * ang) / w) ** ((1.0 - alpha) / alpha)
        else:  # frank
            p = -np.expm1(-th)
            v = stats.logser.rvs(p, size=n, random_state=rng).astype(float)
        return _psi(self.family, th, e / v[:, None])

    # -- persistence -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "dim": self.dim,
            "corr": None if self.corr is None else self.corr.tolist(),
            "dof": self.dof,
            "theta": self.theta,
            "log_likelihood": self.log_likelihood,
            "n_obs": self.n_obs,
        }

    @classmethod
    def from_dict(cls, doc) -> "FittedCopula":
        return cls(
            family=doc["family"],
            dim=int(doc["dim"]),
            corr=None if doc["corr"] is None else np.array(doc["corr"]),
            dof=doc["dof"],
            theta=doc["theta"],
            log_likelihood=float(doc["log_likelihood"]),
            n_obs=int(doc["n_obs"]),
        )

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "FittedCopula":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------


def fit_copula(u, family: str) -> FittedCopula:
    """Maximum-likelihood fit of one family on pseudo-observations."""
    u = np.asarray(u, dtype=float)
    n, d = u.shape
    if n < 50:
        raise FsucError(f"need >= 50 pseudo-observations, got {n}")
    if np.any(u <= 0) or np.any(u >= 1):
        raise FsucError("pseudo-observations must lie strictly inside (0,1)")
    if family == "gaussian":
        z = ndtri(u)
        corr = _nearest_corr(np.corrcoef(z, rowvar=False))
        ll = float(_gaussian_log_density(corr, u).sum())
        return FittedCopula("gaussian", d, corr=corr, log_likelihood=ll, n_obs=n)
    if family == "student_t":
        best = None
        for dof in _DOF_GRID:
            z = stats.t.ppf(u, dof)
            corr = _nearest_corr(np.corrcoef(z, rowvar=False))
            ll = float(_student_log_density(corr, dof, u).sum())
            if best is None or ll > best[0]:
                best = (ll, dof, corr)
        ll, dof, corr = best
        return FittedCopula("student_t", d, corr=corr, dof=float(dof),
                            log_likelihood=ll, n_obs=n)
    if family in _THETA_DOMAIN:
        lo, hi = _THETA_DOMAIN[family]

        def nll(theta):
            v = _archimedean_log_density(family, theta, u)
            if not np.all(np.isfinite(v)):
                return 1e12
            return -float(v.sum())

        res = optimize.minimize_scalar(
            nll, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6}
        )
        if not res.success or nll(res.x) >= 1e12:
            raise CopulaFitError(f"{family} likelihood optimization failed")
        return FittedCopula(family, d, theta=float(res.x),
                            log_likelihood=-float(res.fun), n_obs=n)
    raise FsucError(f"unknown copula family {family!r}")


def select_copula(records, direction: str, hour: int,
                  families=FAMILIES) -> FittedCopula:
    """Fit every family on one hour's (A2, d, r) pseudo-observations, return
    the minimum-BIC model.  Families that fail to fit are skipped with a
    warning; only an all-family failure raises.
    """
    hour_records = [r for r in records if r.hour == hour]
    if len(hour_records) < 50:
        raise FsucError(
            f"need >= 50 records for hour {hour}, got {len(hour_records)}"
        )
    u = pseudo_observations(records_matrix(hour_records, direction))
    fits = []
    for family in families:
        try:
            fits.append(fit_copula(u, family))
        except FsucError as exc:
            warnings.warn(f"copula family {family} skipped for hour {hour}: {exc}")
    if not fits:
        raise CopulaFitError(f"all copula families failed for hour {hour}")
    return min(fits, key=lambda f: f.bic)
