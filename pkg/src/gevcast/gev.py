"""Generalized extreme value (GEV) distribution and maximum-likelihood fitting.

The GEV family is parameterized by location ``mu``, scale ``sigma > 0`` and
shape ``xi``.  For ``xi != 0`` the density is supported where
``1 + xi * (x - mu) / sigma > 0``; the ``xi == 0`` (Gumbel) branch is used
whenever ``|xi| < XI_ZERO_TOL`` to avoid catastrophic cancellation near zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

# |xi| below this threshold routes to the Gumbel formulas.
XI_ZERO_TOL = 1e-8

# Search box for the shape parameter during MLE.  Fits with xi < -0.5 are
# allowed but flagged as non-converged (the MLE is irregular there).
XI_SEARCH_BOX = (-0.9, 5.0)

_EULER_MASCHERONI = 0.5772156649015329
_PENALTY = 1e10


class DegenerateDataError(ValueError):
    """Raised when a sample carries no information for a GEV fit."""


@dataclass(frozen=True)
class GevParams:
    """Scalar (mu, sigma, xi) triple defining one GEV distribution."""

    mu: float
    sigma: float
    xi: float

    def __post_init__(self):
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "xi", float(self.xi))
        if not math.isfinite(self.mu) or not math.isfinite(self.sigma) or not math.isfinite(self.xi):
            raise ValueError("GEV parameters must be finite")
        if self.sigma <= 0:
            raise ValueError(f"scale must be positive, got sigma={self.sigma}")

    def support_contains(self, x: float) -> bool:
        """True iff ``x`` lies in the distribution's support."""
        if abs(self.xi) < XI_ZERO_TOL:
            return True
        return 1.0 + self.xi * (x - self.mu) / self.sigma > 0.0


@dataclass(frozen=True)
class GevFitResult:
    """Outcome of a maximum-likelihood GEV fit."""

    params: GevParams
    log_likelihood: float
    converged: bool
    n_obs: int


def pdf(p: GevParams, x):
    """GEV density at ``x`` (scalar or array); 0 outside the support."""
    x_arr = np.asarray(x, dtype=float)
    z = (x_arr - p.mu) / p.sigma
    if abs(p.xi) < XI_ZERO_TOL:
        out = np.exp(-z - np.exp(-z)) / p.sigma
    else:
        w = 1.0 + p.xi * z
        out = np.zeros_like(z)
        ok = w > 0.0
        lw = np.log(w[ok])
        # log f = -log(sigma) - (1/xi + 1) log(w) - w^(-1/xi)
        log_f = -math.log(p.sigma) - (1.0 / p.xi + 1.0) * lw - np.exp(-lw / p.xi)
        out[ok] = np.exp(log_f)
    return float(out) if np.isscalar(x) or x_arr.ndim == 0 else out


def cdf(p: GevParams, x):
    """GEV distribution function at ``x`` (scalar or array)."""
    x_arr = np.asarray(x, dtype=float)
    z = (x_arr - p.mu) / p.sigma
    if abs(p.xi) < XI_ZERO_TOL:
        out = np.exp(-np.exp(-z))
    else:
        w = 1.0 + p.xi * z
        # Off support: 0 below the lower endpoint (xi > 0), 1 above the
        # upper endpoint (xi < 0).
        out = np.full_like(z, 0.0 if p.xi > 0 else 1.0)
        ok = w > 0.0
        out[ok] = np.exp(-np.exp(-np.log(w[ok]) / p.xi))
    return float(out) if np.isscalar(x) or x_arr.ndim == 0 else out


def quantile(p: GevParams, prob):
    """Inverse CDF.

    Valid probability ranges depend on the shape branch: ``(0, 1)`` for
    xi = 0, ``[0, 1)`` for xi > 0 and ``(0, 1]`` for xi < 0.
    """
    prob_arr = np.asarray(prob, dtype=float)
    if abs(p.xi) < XI_ZERO_TOL:
        if np.any(prob_arr <= 0.0) or np.any(prob_arr >= 1.0):
            raise ValueError("quantile with xi=0 requires prob in (0, 1)")
        out = p.mu - p.sigma * np.log(-np.log(prob_arr))
    elif p.xi > 0:
        if np.any(prob_arr < 0.0) or np.any(prob_arr >= 1.0):
            raise ValueError("quantile with xi>0 requires prob in [0, 1)")
        with np.errstate(divide="ignore"):
            y = -np.log(prob_arr)
        out = p.mu + p.sigma * (y ** -p.xi - 1.0) / p.xi
    else:
        if np.any(prob_arr <= 0.0) or np.any(prob_arr > 1.0):
            raise ValueError("quantile with xi<0 requires prob in (0, 1]")
        y = -np.log(prob_arr)
        out = p.mu + p.sigma * (y ** -p.xi - 1.0) / p.xi
    return float(out) if np.isscalar(prob) or prob_arr.ndim == 0 else out


def log_likelihood(p: GevParams, data) -> float:
    """Joint log-likelihood of an i.i.d. GEV sample.

    Returns ``-inf`` when any observation violates the support constraint.
    """
    x = np.asarray(data, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("log_likelihood requires a nonempty sample")
    z = (x - p.mu) / p.sigma
    if abs(p.xi) < XI_ZERO_TOL:
        return float(np.sum(-math.log(p.sigma) - z - np.exp(-z)))
    w = 1.0 + p.xi * z
    if np.any(w <= 0.0):
        return -math.inf
    lw = np.log(w)
    with np.errstate(over="ignore"):
        ll = -x.size * math.log(p.sigma) - (1.0 + 1.0 / p.xi) * np.sum(lw) - np.sum(
            np.exp(-lw / p.xi)
        )
    return float(ll) if np.isfinite(ll) else -math.inf


def _moment_init(x: np.ndarray) -> GevParams:
    """Gumbel moment-based starting point (xi pinned at 0.1)."""
    sd = float(np.std(x, ddof=1))
    sigma0 = math.sqrt(6.0) * sd / math.pi
    mu0 = float(np.mean(x)) - _EULER_MASCHERONI * sigma0
    return GevParams(mu0, sigma0, 0.1)


def _nll_search(theta: np.ndarray, x: np.ndarray) -> float:
    """Negative log-likelihood over (mu, log sigma, xi) with a finite penalty
    replacing the -inf sentinel so simplex steps can recover."""
    mu, log_sigma, xi = theta
    if abs(log_sigma) > 50.0:
        return _PENALTY * (1.0 + abs(log_sigma))
    lo, hi = XI_SEARCH_BOX
    if xi < lo or xi > hi:
        return _PENALTY * (1.0 + min(abs(xi - lo), abs(xi - hi)))
    sigma = math.exp(log_sigma)
    z = (x - mu) / sigma
    if abs(xi) < XI_ZERO_TOL:
        with np.errstate(over="ignore"):
            val = float(np.sum(log_sigma + z + np.exp(-z)))
        return val if math.isfinite(val) else _PENALTY
    w = 1.0 + xi * z
    wmin = float(np.min(w))
    if wmin <= 1e-12:
        return _PENALTY * (1.0 + (1e-12 - wmin))
    lw = np.log(w)
    with np.errstate(over="ignore"):
        val = float(np.sum(log_sigma + (1.0 + 1.0 / xi) * lw + np.exp(-lw / xi)))
    return val if math.isfinite(val) else _PENALTY


def fit_mle(data, init: GevParams | None = None) -> GevFitResult:
    """Constrained maximum-likelihood GEV fit.

    Optimizes over (mu, log sigma, xi) with a Nelder-Mead search started at
    ``init`` (or Gumbel moment estimates).  The returned likelihood never
    falls below the likelihood at the starting point.

    Raises
    ------
    ValueError
        On fewer than 10 observations.
    DegenerateDataError
        When all observations are identical.
    """
    x = np.asarray(data, dtype=float).ravel()
    if x.size < 10:
        raise ValueError(f"fit_mle requires at least 10 observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("fit_mle requires finite observations")
    if np.ptp(x) == 0.0:
        raise DegenerateDataError("all observations identical; GEV fit is degenerate")

    start = init if init is not None else _moment_init(x)
    theta0 = np.array([start.mu, math.log(start.sigma), start.xi])
    res = minimize(
        _nll_search,
        theta0,
        args=(x,),
        method="Nelder-Mead",
        options={"xatol": 1e-8, "fatol": 1e-8, "maxiter": 500, "maxfev": 1500},
    )
    mu_hat, log_sigma_hat, xi_hat = res.x
    params = GevParams(mu_hat, math.exp(log_sigma_hat), xi_hat)
    ll = log_likelihood(params, x)
    ll_start = log_likelihood(start, x)
    converged = bool(res.success) and math.isfinite(ll) and xi_hat >= -0.5
    if ll < ll_start:
        # Keep the monotone-improvement guarantee.
        params, ll, converged = start, ll_start, False
    return GevFitResult(params=params, log_likelihood=ll, converged=converged, n_obs=int(x.size))
