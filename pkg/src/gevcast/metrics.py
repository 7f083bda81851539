"""Discretized density divergences (Jensen-Shannon and symmetrized KL).

Densities are reduced to probability masses on a shared point grid
(pdf x spacing, renormalized) so that divergences are grid-robust; the JSD
mixture is delta = (f + g) / 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import rel_entr

from .gev import GevParams, pdf, quantile

DEFAULT_GRID_SIZE = 512
_MIN_GRID_SIZE = 64
_MASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Probability masses on a strictly increasing point set."""

    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float).ravel()
        masses = np.asarray(self.masses, dtype=float).ravel()
        if points.size != masses.size:
            raise ValueError("points and masses must have equal length")
        if np.any(np.diff(points) <= 0):
            raise ValueError("points must be strictly increasing")
        if np.any(masses < 0):
            raise ValueError("masses must be nonnegative")
        if abs(masses.sum() - 1.0) > _MASS_TOL:
            raise ValueError(f"masses must sum to 1, got {masses.sum()!r}")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "masses", masses)


def make_density_grid(p: GevParams, q: GevParams, k: int = DEFAULT_GRID_SIZE):
    """Discretize two GEV densities on a shared uniform grid.

    The grid spans the union of both distributions' [0.001, 0.999] quantile
    ranges.  Returns a ``(DensityGrid, DensityGrid)`` pair on the same points.
    """
    if k < _MIN_GRID_SIZE:
        raise ValueError(f"grid size must be at least {_MIN_GRID_SIZE}, got {k}")
    lo = min(quantile(p, 0.001), quantile(q, 0.001))
    hi = max(quantile(p, 0.999), quantile(q, 0.999))
    points = np.linspace(lo, hi, k)
    spacing = (hi - lo) / (k - 1)

    def _masses(params: GevParams) -> np.ndarray:
        raw = pdf(params, points) * spacing
        return raw / raw.sum()

    return DensityGrid(points, _masses(p)), DensityGrid(points, _masses(q))


def _require_same_points(f: DensityGrid, g: DensityGrid) -> None:
    if f.points.shape != g.points.shape or not np.array_equal(f.points, g.points):
        raise ValueError("density grids must share the same point set")


def jsd(f: DensityGrid, g: DensityGrid) -> float:
    """Jensen-Shannon divergence; symmetric, bounded by ln 2."""
    _require_same_points(f, g)
    m = 0.5 * (f.masses + g.masses)
    return float(0.5 * rel_entr(f.masses, m).sum() + 0.5 * rel_entr(g.masses, m).sum())


def kld(f: DensityGrid, g: DensityGrid) -> float:
    """Symmetrized Kullback-Leibler divergence; +inf on support mismatch."""
    _require_same_points(f, g)
    return float(rel_entr(f.masses, g.masses).sum() + rel_entr(g.masses, f.masses).sum())


def curve_divergence(
    truth: Sequence[GevParams], forecast: Sequence[GevParams], k: int = DEFAULT_GRID_SIZE
) -> tuple[float, float]:
    """Average per-grid-point (JSD, KLD) between two GEV parameter curves."""
    if len(truth) != len(forecast):
        raise ValueError(f"curve lengths differ: {len(truth)} vs {len(forecast)}")
    if len(truth) == 0:
        raise ValueError("curves must be nonempty")
    jsd_vals = np.empty(len(truth))
    kld_vals = np.empty(len(truth))
    for j, (pt, pf) in enumerate(zip(truth, forecast)):
        try:
            f, g = make_density_grid(pt, pf, k)
            jsd_vals[j] = jsd(f, g)
            kld_vals[j] = kld(f, g)
        except Exception as exc:
            raise RuntimeError(f"divergence failed at grid point {j}: {exc}") from exc
    return float(jsd_vals.mean()), float(kld_vals.mean())


def per_point_divergence(
    truth: Sequence[GevParams], forecast: Sequence[GevParams], k: int = DEFAULT_GRID_SIZE
) -> tuple[np.ndarray, np.ndarray]:
    """Per-grid-point JSD_j and KLD_j sequences (no averaging)."""
    jsd_vals = np.empty(len(truth))
    kld_vals = np.empty(len(truth))
    for j, (pt, pf) in enumerate(zip(truth, forecast)):
        f, g = make_density_grid(pt, pf, k)
        jsd_vals[j] = jsd(f, g)
        kld_vals[j] = kld(f, g)
    return jsd_vals, kld_vals


def curve_jsd(observed, predicted) -> float:
    """JSD between two raw curves, used as the cross-validation score.

    Both curves are shifted by the joint minimum (minus a small epsilon) and
    normalized to unit sum, which makes the score shift-invariant.
    """
    obs = np.asarray(observed, dtype=float).ravel()
    pred = np.asarray(predicted, dtype=float).ravel()
    if obs.size != pred.size:
        raise ValueError(f"curve lengths differ: {obs.size} vs {pred.size}")
    if obs.size < 3:
        raise ValueError("curve_jsd requires length >= 3")
    joint_min = min(obs.min(), pred.min())
    joint_max = max(obs.max(), pred.max())
    rng = joint_max - joint_min
    if rng == 0.0:
        return 0.0
    shift = joint_min - 1e-6 * rng
    a = obs - shift
    b = pred - shift
    a /= a.sum()
    b /= b.sum()
    idx = np.arange(obs.size, dtype=float)
    return jsd(DensityGrid(idx, a), DensityGrid(idx, b))


@dataclass(frozen=True, eq=False)
class DivergenceReport:
    """Per-sample and averaged divergences for one forecaster."""

    label: str
    per_point_jsd: tuple
    per_point_kld: tuple
    per_sample_jsd: np.ndarray
    per_sample_kld: np.ndarray
    mean_jsd: float
    mean_kld: float
    failed_windows: tuple = ()

    @classmethod
    def from_samples(cls, label, per_point_jsd, per_point_kld, failed_windows=()):
        per_sample_jsd = np.array([v.mean() for v in per_point_jsd])
        per_sample_kld = np.array([v.mean() for v in per_point_kld])
        return cls(
            label=label,
            per_point_jsd=tuple(np.asarray(v, dtype=float) for v in per_point_jsd),
            per_point_kld=tuple(np.asarray(v, dtype=float) for v in per_point_kld),
            per_sample_jsd=per_sample_jsd,
            per_sample_kld=per_sample_kld,
            mean_jsd=float(per_sample_jsd.mean()),
            mean_kld=float(per_sample_kld.mean()),
            failed_windows=tuple(failed_windows),
        )
