"""Latent-parameter forecasting: transforms, VAR with AICC order selection,
and the three density forecasters (scalar fGEV, functional fGAEVM, and the
single-curve multi-step tsGAEVM)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gev
from .gaev import GaevDims, expand_coeffs, fit_gaev, make_bases, reduce_coeffs
from .series import FunctionalSeries
from .splines import ParamCurve, eval_curve

MAX_VAR_ORDER = 5
_AR1_CLAMP = 0.995


class ForecastError(RuntimeError):
    """Raised when a forecasting pipeline cannot produce a usable result."""


@dataclass(frozen=True, eq=False)
class CoeffSeries:
    """Vector time series of latent parameters or spline coefficients."""

    values: np.ndarray
    labels: tuple
    transforms: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("coefficient series must be a T x k matrix")
        if not np.all(np.isfinite(values)):
            raise ValueError("coefficient series contains non-finite entries")
        labels = tuple(self.labels)
        transforms = tuple(self.transforms)
        if len(labels) != values.shape[1] or len(transforms) != values.shape[1]:
            raise ValueError("labels/transforms must match the number of columns")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "transforms", transforms)


@dataclass(frozen=True, eq=False)
class VarModel:
    """Least-squares VAR(p), or the per-column AR(1) fallback."""

    order: int
    intercept: np.ndarray
    coeff_mats: np.ndarray
    residuals: np.ndarray
    resid_cov: np.ndarray
    fallback: bool = False


def boxcox(y, lam: float):
    """Box-Cox transform: (y^lam - 1)/lam, or ln y at lam = 0."""
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr <= 0.0):
        raise ValueError("Box-Cox transform requires positive input")
    out = np.log(y_arr) if lam == 0.0 else (y_arr ** lam - 1.0) / lam
    return float(out) if np.isscalar(y) or y_arr.ndim == 0 else out


def inv_boxcox(x, lam: float):
    """Inverse of :func:`boxcox`."""
    x_arr = np.asarray(x, dtype=float)
    out = np.exp(x_arr) if lam == 0.0 else (lam * x_arr + 1.0) ** (1.0 / lam)
    return float(out) if np.isscalar(x) or x_arr.ndim == 0 else out


def _lagged_design(values: np.ndarray, p: int):
    t, k = values.shape
    n = t - p
    x = np.empty((n, 1 + k * p))
    x[:, 0] = 1.0
    for i in range(p):
        x[:, 1 + i * k:1 + (i + 1) * k] = values[p - 1 - i:t - 1 - i]
    return x, values[p:]


def _ls_var(values: np.ndarray, p: int) -> VarModel:
    x, y = _lagged_design(values, p)
    b, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ b
    k = values.shape[1]
    mats = np.stack([b[1 + i * k:1 + (i + 1) * k].T for i in range(p)])
    return VarModel(
        order=p,
        intercept=b[0].copy(),
        coeff_mats=mats,
        residuals=resid,
        resid_cov=resid.T @ resid / resid.shape[0],
        fallback=False,
    )


def _ar1_fallback(values: np.ndarray) -> VarModel:
    t, k = values.shape
    phi = np.empty(k)
    const = np.empty(k)
    for j in range(k):
        x = np.column_stack([np.ones(t - 1), values[:-1, j]])
        b, *_ = np.linalg.lstsq(x, values[1:, j], rcond=None)
        # Clamp to the stationary region so bootstrap path generation stays
        # bounded; the intercept is recentred so residuals keep mean zero.
        phi[j] = float(np.clip(b[1], -_AR1_CLAMP, _AR1_CLAMP))
        const[j] = float(np.mean(values[1:, j] - phi[j] * values[:-1, j]))
    resid = values[1:] - const - values[:-1] * phi
    return VarModel(
        order=1,
        intercept=const,
        coeff_mats=np.diag(phi)[None, :, :],
        residuals=resid,
        resid_cov=resid.T @ resid / resid.shape[0],
        fallback=True,
    )


def aicc(values: np.ndarray, p: int) -> float:
    """Corrected AIC for a least-squares VAR(p); +inf when infeasible."""
    t, k = values.shape
    n = t - p
    n_params = k * (k * p + 1)
    if n <= n_params + 1:
        return math.inf
    model = _ls_var(values, p)
    sign, logdet = np.linalg.slogdet(model.resid_cov)
    logdet = -math.inf if sign <= 0 else logdet
    return n * logdet + 2.0 * n_params * n / (n - n_params - 1)


def fit_var(series: CoeffSeries, max_order: int = MAX_VAR_ORDER) -> VarModel:
    """Fit a VAR with order chosen by AICC over 1..max_order.

    When even VAR(1) is infeasible for the joint system (short series, many
    coefficients) the model falls back to independent per-column AR(1) fits,
    flagged via ``fallback``.
    """
    values = series.values
    t, k = values.shape
    if t < 4:
        raise ValueError(f"VAR fitting requires at least 4 observations, got {t}")
    best_p, best_aicc = None, math.inf
    for p in range(1, max_order + 1):
        score = aicc(values, p)
        if score < best_aicc:
            best_p, best_aicc = p, score
    if best_p is None:
        return _ar1_fallback(values)
    return _ls_var(values, best_p)


def forecast_var(model: VarModel, series: CoeffSeries, h: int) -> np.ndarray:
    """Iterated conditional-mean forecasts, rows 1..h ahead."""
    if h < 1:
        raise ValueError(f"forecast horizon must be >= 1, got {h}")
    p = model.order
    history = [series.values[-i] for i in range(1, p + 1)]  # newest first
    out = np.empty((h, series.values.shape[1]))
    for step in range(h):
        y = model.intercept + sum(
            model.coeff_mats[i] @ history[i] for i in range(p)
        )
        out[step] = y
        history = [y] + history[:-1]
    return out


@dataclass(frozen=True, eq=False)
class ForecastDensity:
    """Forecast GEV parameters at each grid point for one horizon."""

    horizon: int
    grid: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    xi: np.ndarray
    method: str = ""

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).ravel()
        mu = np.asarray(self.mu, dtype=float).ravel()
        sigma = np.asarray(self.sigma, dtype=float).ravel()
        xi = np.asarray(self.xi, dtype=float).ravel()
        if not (grid.size == mu.size == sigma.size == xi.size):
            raise ValueError("grid and parameter arrays must share one length")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(sigma)) or not np.all(np.isfinite(xi)):
            raise ValueError("forecast parameters must be finite")
        if np.any(sigma <= 0.0):
            raise ValueError("forecast scale must be positive at every grid point")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "xi", xi)

    def params_at(self, j: int) -> gev.GevParams:
        return gev.GevParams(self.mu[j], self.sigma[j], self.xi[j])

    def param_list(self) -> list:
        return [self.params_at(j) for j in range(self.grid.size)]


def _var_step_forecast(values: np.ndarray, labels, transforms, h: int,
                       max_order: int, difference: bool) -> np.ndarray:
    """h-step-ahead forecast of a coefficient matrix, optionally on first
    differences (cumulated back afterwards)."""
    if difference:
        deltas = np.diff(values, axis=0)
        cs = CoeffSeries(deltas, labels, transforms)
        steps = forecast_var(fit_var(cs, max_order), cs, h)
        return values[-1] + steps.cumsum(axis=0)[h - 1]
    cs = CoeffSeries(values, labels, transforms)
    return forecast_var(fit_var(cs, max_order), cs, h)[h - 1]


class FgevState:
    """Per-year scalar GEV fits with reuse across expanding windows."""

    _LABELS = ("mu", "log_sigma", "xi")
    _TRANSFORMS = ("identity", "log", "identity")

    def __init__(self, series: FunctionalSeries,
                 max_order: int = MAX_VAR_ORDER, difference: bool = False):
        self.series = series
        self.max_order = max_order
        self.difference = difference
        self._rows: dict[int, np.ndarray | None] = {}

    def theta_row(self, t: int):
        """(mu, log sigma, xi) for year t, or None when the fit is degenerate."""
        if t not in self._rows:
            try:
                fit = gev.fit_mle(self.series.values[t])
            except gev.DegenerateDataError:
                fit = None
            if fit is None or not math.isfinite(fit.log_likelihood):
                self._rows[t] = None
            else:
                self._rows[t] = np.array(
                    [fit.params.mu, math.log(fit.params.sigma), fit.params.xi]
                )
        return self._rows[t]

    def theta_matrix(self, t_end: int) -> np.ndarray:
        rows = [self.theta_row(t) for t in range(t_end)]
        degenerate = [t for t, row in enumerate(rows) if row is None]
        if len(degenerate) > 0.2 * t_end:
            raise ForecastError(
                f"{len(degenerate)} of {t_end} yearly GEV fits degenerate: years {degenerate}"
            )
        # Carry forward the previous year's fit; leading failures borrow the
        # first successful year.
        good = [t for t, row in enumerate(rows) if row is not None]
        for t in degenerate:
            earlier = [g for g in good if g < t]
            rows[t] = rows[earlier[-1]] if earlier else rows[good[0]]
        return np.array(rows)

    def forecast(self, t_train: int, h: int = 1) -> ForecastDensity:
        theta = self.theta_matrix(t_train)
        theta_h = _var_step_forecast(
            theta, self._LABELS, self._TRANSFORMS, h, self.max_order, self.difference
        )
        j = self.series.n_points
        return ForecastDensity(
            horizon=h,
            grid=self.series.grid,
            mu=np.full(j, theta_h[0]),
            sigma=np.full(j, math.exp(theta_h[1])),
            xi=np.full(j, theta_h[2]),
            method="fgev",
        )


def forecast_fgev(
    series: FunctionalSeries,
    h: int = 1,
    max_order: int = MAX_VAR_ORDER,
    difference: bool = False,
) -> ForecastDensity:
    """Scalar-parameter GEV forecaster.

    Fits one GEV per year, log-transforms the scale path, forecasts the
    latent triple with a VAR and returns a density constant in tau.
    """
    if series.n_years < 10:
        raise ValueError(f"forecast_fgev requires at least 10 curves, got {series.n_years}")
    return FgevState(series, max_order=max_order, difference=difference).forecast(
        series.n_years, h
    )


class FgaevmState:
    """Per-year GAEV fits plus VAR forecasting with fit reuse.

    Per-year fits depend only on the year's curve and the shared bases, so an
    expanding-window evaluation can reuse them across windows.
    """

    def __init__(self, series: FunctionalSeries, dims: GaevDims,
                 max_order: int = MAX_VAR_ORDER, difference: bool = False,
                 scalar_cache: dict | None = None):
        self.series = series
        self.dims = dims
        self.max_order = max_order
        self.difference = difference
        self.bases = make_bases(series.grid, dims)
        self._fits: dict[int, object] = {}
        # Intercept-only fits can be shared across states with different
        # basis dimensions (e.g. during cross-validation).
        self._scalar_cache = {} if scalar_cache is None else scalar_cache
        names = ["mu", "log_sigma", "xi"]
        sizes = [dims.d_mu + 1, dims.d_sigma + 1, dims.d_xi + 1]
        self.labels = tuple(
            f"{name}_{i}" for name, size in zip(names, sizes) for i in range(size)
        )
        self.transforms = tuple(
            "log" if label.startswith("log_sigma") else "identity" for label in self.labels
        )
        # The centered spline blocks carry an exact sum-to-zero constraint, so
        # the VAR runs on gauge-free coordinates of the same dimension as the
        # information content.
        reduced_sizes = [1 if size == 1 else size - 1 for size in sizes]
        self.reduced_labels = tuple(
            f"{name}_q{i}" for name, size in zip(names, reduced_sizes) for i in range(size)
        )
        self.reduced_transforms = tuple(
            "log" if label.startswith("log_sigma") else "identity"
            for label in self.reduced_labels
        )

    def fit_year(self, t: int):
        if t not in self._fits:
            scalar = self._scalar_cache.get(t)
            if scalar is None:
                scalar = gev.fit_mle(self.series.values[t])
                self._scalar_cache[t] = scalar
            self._fits[t] = fit_gaev(
                self.series.values[t], self.series.grid, self.dims,
                bases=self.bases, scalar_fit=scalar,
            )
        return self._fits[t]

    def coeff_matrix(self, t_end: int) -> np.ndarray:
        return np.array([self.fit_year(t).coeff_vector() for t in range(t_end)])

    def reduced_matrix(self, t_end: int) -> np.ndarray:
        return np.array(
            [reduce_coeffs(self.fit_year(t).coeff_vector(), self.dims) for t in range(t_end)]
        )

    def expand(self, beta_reduced: np.ndarray) -> np.ndarray:
        return expand_coeffs(beta_reduced, self.dims)

    def assemble(self, beta: np.ndarray, h: int) -> ForecastDensity:
        grid = self.series.grid
        basis_mu, basis_sig, basis_xi = self.bases
        n_mu = self.dims.d_mu + 1
        n_sig = self.dims.d_sigma + 1
        mu_c = _curve_from_block(beta[:n_mu], basis_mu)
        sig_c = _curve_from_block(beta[n_mu:n_mu + n_sig], basis_sig)
        xi_c = _curve_from_block(beta[n_mu + n_sig:], basis_xi)
        return ForecastDensity(
            horizon=h,
            grid=grid,
            mu=eval_curve(mu_c, grid),
            sigma=np.exp(eval_curve(sig_c, grid)),
            xi=eval_curve(xi_c, grid),
            method="fgaevm",
        )

    def forecast(self, t_train: int, h: int = 1) -> ForecastDensity:
        beta_red = self.reduced_matrix(t_train)
        beta_h = _var_step_forecast(
            beta_red, self.reduced_labels, self.reduced_transforms, h,
            self.max_order, self.difference,
        )
        return self.assemble(self.expand(beta_h), h)


def _curve_from_block(block: np.ndarray, basis) -> ParamCurve:
    return ParamCurve(block[0], block[1:], basis)


def forecast_fgaevm(
    series: FunctionalSeries,
    dims: GaevDims,
    h: int = 1,
    max_order: int = MAX_VAR_ORDER,
    difference: bool = False,
) -> ForecastDensity:
    """Functional GAEV forecaster: shared bases per parameter, per-year fits,
    VAR on the stacked coefficient series, curves rebuilt from the forecast."""
    if series.n_years < 10:
        raise ValueError(f"forecast_fgaevm requires at least 10 curves, got {series.n_years}")
    state = FgaevmState(series, dims, max_order=max_order, difference=difference)
    return state.forecast(series.n_years, h)


def forecast_tsgaevm(last_curve, grid, dims: GaevDims, steps: int) -> ForecastDensity:
    """GAEV on the latest curve with the within-curve position as covariate.

    The fitted parameter functions are extended beyond the observed span by
    natural-spline linear extrapolation and evaluated ``steps`` positions
    ahead (step m sits at s = 1 + m/(J-1) on the unit-interval covariate).
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    x = np.asarray(last_curve, dtype=float).ravel()
    grid = np.asarray(grid, dtype=float).ravel()
    span = grid[-1] - grid[0]
    s = (grid - grid[0]) / span
    fit = fit_gaev(x, s, dims)
    j = grid.size
    s_future = 1.0 + np.arange(1, steps + 1) / (j - 1)
    mu = eval_curve(fit.mu_curve, s_future, extrapolate=True)
    sigma = np.exp(eval_curve(fit.log_sigma_curve, s_future, extrapolate=True))
    xi = eval_curve(fit.xi_curve, s_future, extrapolate=True)
    grid_out = grid[0] + np.arange(steps) * (span / (j - 1))
    return ForecastDensity(
        horizon=steps, grid=grid_out, mu=mu, sigma=sigma, xi=xi, method="tsgaevm"
    )


def quantile_curve(fd: ForecastDensity, prob: float) -> np.ndarray:
    """Pointwise GEV quantiles of a forecast density."""
    out = np.empty(fd.grid.size)
    for j in range(fd.grid.size):
        try:
            out[j] = gev.quantile(fd.params_at(j), prob)
        except ValueError as exc:
            raise ValueError(f"quantile failed at grid index {j}: {exc}") from exc
    return out
