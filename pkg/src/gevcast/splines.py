"""Cubic regression spline bases for functional GEV parameters.

A basis of dimension ``d`` is the cardinal family of natural cubic splines on
``d`` equally spaced knots: basis function i is the natural cubic spline that
is 1 at knot i and 0 at the others.  The family is C2, forms an exact
partition of unity on the domain, and is centered (mean zero over the stored
evaluation grid) so that it is identifiable next to a separate intercept.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

DIM_BOUNDS = (3, 10)
_DEFAULT_CENTERING_POINTS = 30


@dataclass(frozen=True, eq=False)
class SplineBasis:
    """Centered cardinal natural-cubic-spline basis on an interval."""

    domain: tuple[float, float]
    dim: int
    knots: np.ndarray
    centering_grid: np.ndarray
    centering_offsets: np.ndarray
    _cardinal: CubicSpline = field(repr=False)
    _cardinal_deriv: CubicSpline = field(repr=False)


def make_basis(domain, d: int, centering_grid=None) -> SplineBasis:
    """Build a centered cubic spline basis of dimension ``d`` on ``domain``.

    ``centering_grid`` defaults to 30 uniform points; pass the observation
    grid at fit time so centering is reproducible against the data.
    """
    lo, hi = float(domain[0]), float(domain[1])
    if not lo < hi:
        raise ValueError(f"domain must be a nonempty interval, got [{lo}, {hi}]")
    if not DIM_BOUNDS[0] <= d <= DIM_BOUNDS[1]:
        raise ValueError(f"basis dimension must lie in {DIM_BOUNDS}, got {d}")
    knots = np.linspace(lo, hi, d)
    cardinal = CubicSpline(knots, np.eye(d), axis=0, bc_type="natural")
    if centering_grid is None:
        grid = np.linspace(lo, hi, _DEFAULT_CENTERING_POINTS)
    else:
        grid = np.asarray(centering_grid, dtype=float).ravel()
        if grid.size < 2 or np.min(grid) < lo or np.max(grid) > hi:
            raise ValueError("centering grid must contain >=2 points inside the domain")
    offsets = cardinal(grid).mean(axis=0)
    return SplineBasis(
        domain=(lo, hi),
        dim=int(d),
        knots=knots,
        centering_grid=grid,
        centering_offsets=offsets,
        _cardinal=cardinal,
        _cardinal_deriv=cardinal.derivative(),
    )


def _check_in_domain(b: SplineBasis, tau: np.ndarray) -> None:
    lo, hi = b.domain
    # Tolerate representation-level rounding at the endpoints only.
    eps = 1e-12 * max(1.0, abs(lo), abs(hi))
    if np.any(tau < lo - eps) or np.any(tau > hi + eps):
        bad = tau[(tau < lo - eps) | (tau > hi + eps)][0]
        raise ValueError(f"evaluation point {bad} outside basis domain [{lo}, {hi}]")


def eval_basis_uncentered(b: SplineBasis, tau) -> np.ndarray:
    """Raw cardinal basis matrix (rows sum to 1 on the domain)."""
    tau = np.asarray(tau, dtype=float).ravel()
    _check_in_domain(b, tau)
    return b._cardinal(np.clip(tau, *b.domain))


def eval_basis(b: SplineBasis, tau) -> np.ndarray:
    """Centered basis matrix with entry (j, i) = b_i(tau_j) - offset_i."""
    return eval_basis_uncentered(b, tau) - b.centering_offsets


def eval_basis_extrapolated(b: SplineBasis, tau) -> np.ndarray:
    """Centered basis matrix with natural linear extension outside the domain.

    This is the sanctioned extrapolation path for multi-step forecasting on a
    within-curve covariate; ordinary evaluation refuses out-of-domain points.
    """
    tau = np.asarray(tau, dtype=float).ravel()
    lo, hi = b.domain
    inside = np.clip(tau, lo, hi)
    vals = b._cardinal(inside)
    overhang = tau - inside
    out = overhang != 0.0
    if np.any(out):
        vals[out] += b._cardinal_deriv(inside[out]) * overhang[out, None]
    return vals - b.centering_offsets


@dataclass(frozen=True, eq=False)
class ParamCurve:
    """One GEV parameter function: intercept plus centered basis expansion.

    ``basis is None`` (with empty ``coeffs``) encodes an intercept-only,
    constant parameter.
    """

    intercept: float
    coeffs: np.ndarray
    basis: SplineBasis | None

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float).ravel()
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "intercept", float(self.intercept))
        if self.basis is None:
            if coeffs.size != 0:
                raise ValueError("coefficients without a basis")
        elif coeffs.size != self.basis.dim:
            raise ValueError(
                f"coefficient length {coeffs.size} does not match basis dimension {self.basis.dim}"
            )


def eval_curve(c: ParamCurve, tau, extrapolate: bool = False) -> np.ndarray:
    """Evaluate intercept + sum_i coeffs[i] * basis_i(tau) pointwise."""
    tau = np.asarray(tau, dtype=float).ravel()
    if c.basis is None:
        return np.full(tau.shape, c.intercept)
    mat = eval_basis_extrapolated(c.basis, tau) if extrapolate else eval_basis(c.basis, tau)
    return c.intercept + mat @ c.coeffs
