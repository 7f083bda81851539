"""Functional time series container: T annual curves on a common grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class FunctionalSeries:
    """T curves observed on a shared grid of J points."""

    years: np.ndarray
    grid: np.ndarray
    values: np.ndarray
    imputed_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        years = np.asarray(self.years)
        grid = np.asarray(self.grid, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a T x J matrix")
        t, j = values.shape
        if years.size != t:
            raise ValueError(f"{years.size} year labels for {t} curves")
        if grid.size != j:
            raise ValueError(f"grid of length {grid.size} for curves of length {j}")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("curve values must be finite after imputation")
        mask = self.imputed_mask
        mask = np.zeros_like(values, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        if mask.shape != values.shape:
            raise ValueError("imputed_mask shape must match values")
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "imputed_mask", mask)

    @property
    def n_years(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.values.shape[1]

    def head(self, t: int) -> "FunctionalSeries":
        """First ``t`` curves as a new series (shared grid)."""
        if not 1 <= t <= self.n_years:
            raise ValueError(f"cannot take first {t} of {self.n_years} curves")
        return FunctionalSeries(
            years=self.years[:t],
            grid=self.grid,
            values=self.values[:t],
            imputed_mask=self.imputed_mask[:t],
        )
