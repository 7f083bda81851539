"""Sieve-bootstrap prediction intervals for one-step quantile-curve forecasts.

The sieve operates on the fitted spline-coefficient series: resample centered
VAR residuals to regenerate coefficient paths, refit the VAR on each path,
and forecast one step from the observed history plus a fresh residual.  This
propagates both estimation and model-misspecification error into the band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from . import forecast as fc
from .gaev import GaevDims
from .series import FunctionalSeries

BURN_IN = 50
MIN_REPLICATES = 50


@dataclass(frozen=True, eq=False)
class IntervalBand:
    """Lower/upper envelope of a quantile-curve forecast."""

    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    kind: str
    B: int

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).ravel()
        lower = np.asarray(self.lower, dtype=float).ravel()
        upper = np.asarray(self.upper, dtype=float).ravel()
        if not (grid.size == lower.size == upper.size):
            raise ValueError("grid, lower and upper must share one length")
        if np.any(lower > upper):
            raise ValueError("lower band exceeds upper band")
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must be in (0, 1), got {self.level}")
        if self.kind not in ("pointwise", "simultaneous"):
            raise ValueError(f"unknown band kind {self.kind!r}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)


def _bootstrap_path(rng, model: fc.VarModel, centered_resid: np.ndarray,
                    start: np.ndarray, t_len: int) -> np.ndarray:
    """Simulate a coefficient path of length t_len after a burn-in."""
    p, k = model.order, centered_resid.shape[1]
    total = BURN_IN + t_len
    path = np.empty((total, k))
    path[:p] = start
    draws = rng.integers(0, centered_resid.shape[0], size=total - p)
    for t in range(p, total):
        y = model.intercept + centered_resid[draws[t - p]]
        for i in range(p):
            y = y + model.coeff_mats[i] @ path[t - 1 - i]
        path[t] = y
    if not np.all(np.isfinite(path)):
        raise fc.ForecastError("bootstrap coefficient path diverged")
    return path[-t_len:]


def _refit_like(model: fc.VarModel, values: np.ndarray) -> fc.VarModel:
    """Refit with the original structure (same order, same fallback rule)."""
    if model.fallback:
        return fc._ar1_fallback(values)
    return fc._ls_var(values, model.order)


def sieve_bootstrap_forecasts(
    series: FunctionalSeries,
    dims: GaevDims,
    prob: float,
    B: int,
    seed: int,
    max_order: int = fc.MAX_VAR_ORDER,
    n_jobs: int = 1,
) -> np.ndarray:
    """B one-step bootstrap quantile curves at probability ``prob``.

    Deterministic given ``seed``: per-replicate generators are derived from
    the master seed, so results do not depend on scheduling or ``n_jobs``.
    """
    if B < MIN_REPLICATES:
        raise ValueError(f"B must be at least {MIN_REPLICATES}, got {B}")
    state = fc.FgaevmState(series, dims, max_order=max_order)
    t_total = series.n_years
    beta = state.reduced_matrix(t_total)
    cs = fc.CoeffSeries(beta, state.reduced_labels, state.reduced_transforms)
    model = fc.fit_var(cs, max_order)
    centered = model.residuals - model.residuals.mean(axis=0)

    point = fc.quantile_curve(state.forecast(t_total, h=1), prob)
    scale = max(1.0, float(np.abs(beta).max()))
    if float(np.abs(centered).max()) < 1e-12 * scale:
        # Zero innovation variance: nothing to resample, the bootstrap
        # distribution collapses onto the point forecast.
        return np.tile(point, (B, 1))

    p = model.order
    start = np.tile(beta.mean(axis=0), (p, 1))
    history = beta[-p:][::-1]  # newest first
    rep_seeds = np.random.SeedSequence(seed).generate_state(B, dtype=np.uint64)

    def _one(b: int) -> np.ndarray:
        rng = np.random.default_rng(int(rep_seeds[b]))
        path = _bootstrap_path(rng, model, centered, start, t_total)
        refit = _refit_like(model, path)
        beta_next = refit.intercept + centered[rng.integers(0, centered.shape[0])]
        for i in range(p):
            beta_next = beta_next + refit.coeff_mats[i] @ history[i]
        return fc.quantile_curve(state.assemble(state.expand(beta_next), h=1), prob)

    if n_jobs == 1:
        curves = [_one(b) for b in range(B)]
    else:
        curves = Parallel(n_jobs=n_jobs)(delayed(_one)(b) for b in range(B))
    return np.vstack(curves)


def pointwise_interval(curves: np.ndarray, level: float,
                       grid=None) -> IntervalBand:
    """Per-grid-point empirical interval at the given coverage level."""
    curves = np.asarray(curves, dtype=float)
    if curves.shape[0] < MIN_REPLICATES:
        raise ValueError(f"need at least {MIN_REPLICATES} curves, got {curves.shape[0]}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    alpha = (1.0 - level) / 2.0
    lower = np.quantile(curves, alpha, axis=0)          # linear (type-7) rule
    upper = np.quantile(curves, 1.0 - alpha, axis=0)
    grid = np.arange(curves.shape[1], dtype=float) if grid is None else grid
    return IntervalBand(grid=grid, lower=lower, upper=upper, level=level,
                        kind="pointwise", B=curves.shape[0])


def simultaneous_band(curves: np.ndarray, level: float,
                      grid=None) -> IntervalBand:
    """Band m(tau) +/- c s(tau) containing at least ceil(level*B) full curves.

    c is the smallest scaled sup-deviation such that the required number of
    bootstrap curves lies entirely inside; where s(tau) = 0 the band
    collapses onto the mean curve.
    """
    curves = np.asarray(curves, dtype=float)
    b = curves.shape[0]
    if b < MIN_REPLICATES:
        raise ValueError(f"need at least {MIN_REPLICATES} curves, got {b}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    center = curves.mean(axis=0)
    spread = curves.std(axis=0, ddof=1)
    dev = np.abs(curves - center)
    ratios = np.divide(dev, spread, out=np.zeros_like(dev), where=spread > 0)
    sups = ratios.max(axis=1)
    needed = math.ceil(level * b)
    c = np.sort(sups)[needed - 1]
    grid = np.arange(curves.shape[1], dtype=float) if grid is None else grid
    return IntervalBand(grid=grid, lower=center - c * spread,
                        upper=center + c * spread, level=level,
                        kind="simultaneous", B=b)
