"""gevcast: forecasting functional time series of extremes.

Fits GEV distributions with scalar or spline-valued parameters to annual
curves of daily maxima, forecasts the latent parameters with vector
autoregression, and wraps quantile-curve forecasts in sieve-bootstrap
prediction bands.
"""

__version__ = "0.1.0"

from .bootstrap import (
    IntervalBand,
    pointwise_interval,
    sieve_bootstrap_forecasts,
    simultaneous_band,
)
from .forecast import (
    CoeffSeries,
    ForecastDensity,
    ForecastError,
    VarModel,
    boxcox,
    fit_var,
    forecast_fgaevm,
    forecast_fgev,
    forecast_tsgaevm,
    forecast_var,
    inv_boxcox,
    quantile_curve,
)
from .gaev import GaevDims, GaevFit, fit_gaev, select_dims
from .gev import DegenerateDataError, GevFitResult, GevParams, cdf, fit_mle, log_likelihood, pdf, quantile
from .ingest import parse_csv, persist, load, slice_annual
from .metrics import (
    DensityGrid,
    DivergenceReport,
    curve_divergence,
    curve_jsd,
    jsd,
    kld,
    make_density_grid,
)
from .series import FunctionalSeries
from .simulate import DgpSpec, SimTruth, expanding_window_eval, generate, monte_carlo
from .splines import ParamCurve, SplineBasis, eval_basis, eval_curve, make_basis

__all__ = [
    "CoeffSeries",
    "DegenerateDataError",
    "DensityGrid",
    "DgpSpec",
    "DivergenceReport",
    "ForecastDensity",
    "ForecastError",
    "FunctionalSeries",
    "GaevDims",
    "GaevFit",
    "GevFitResult",
    "GevParams",
    "IntervalBand",
    "ParamCurve",
    "SimTruth",
    "SplineBasis",
    "VarModel",
    "boxcox",
    "cdf",
    "curve_divergence",
    "curve_jsd",
    "eval_basis",
    "eval_curve",
    "expanding_window_eval",
    "fit_gaev",
    "fit_mle",
    "fit_var",
    "forecast_fgaevm",
    "forecast_fgev",
    "forecast_tsgaevm",
    "forecast_var",
    "generate",
    "inv_boxcox",
    "jsd",
    "kld",
    "load",
    "log_likelihood",
    "make_basis",
    "make_density_grid",
    "monte_carlo",
    "parse_csv",
    "pdf",
    "persist",
    "pointwise_interval",
    "quantile",
    "quantile_curve",
    "select_dims",
    "sieve_bootstrap_forecasts",
    "simultaneous_band",
    "slice_annual",
]
