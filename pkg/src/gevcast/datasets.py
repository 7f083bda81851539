"""Deterministic synthetic daily-maximum temperature fixture.

Stands in for the station record the pipeline was designed around: a
southern-hemisphere seasonal cycle (warm at both ends of the calendar year)
with GEV-distributed daily maxima, a mild AR(1) year effect, and a sprinkle
of missing days.  The generator is the oracle for ingestion row counts.
"""

from __future__ import annotations

import argparse
import csv
import datetime
from pathlib import Path

import numpy as np

DEFAULT_SEED = 61850
DEFAULT_START_YEAR = 1900
DEFAULT_N_YEARS = 120

_PROTECTED = {(2, 28), (2, 29), (3, 1)}  # keep the Feb-29 imputation rule exact


def synthetic_daily_tmax(
    start_year: int = DEFAULT_START_YEAR,
    n_years: int = DEFAULT_N_YEARS,
    seed: int = DEFAULT_SEED,
    missing_rate: float = 2e-4,
) -> list:
    """Dated synthetic observations, sorted, with isolated missing days."""
    rng = np.random.default_rng(seed)
    year_effect = np.empty(n_years)
    year_effect[0] = 0.0
    shocks = rng.normal(0.0, 0.25, size=n_years)
    for i in range(1, n_years):
        year_effect[i] = 0.6 * year_effect[i - 1] + shocks[i]

    first = datetime.date(start_year, 1, 1)
    last = datetime.date(start_year + n_years - 1, 12, 31)
    n_days = (last - first).days + 1
    days = [first + datetime.timedelta(days=i) for i in range(n_days)]

    # Position on the leap-year grid drives the seasonal cycle.
    slot = np.array(
        [(datetime.date(2000, d.month, d.day) - datetime.date(2000, 1, 1)).days for d in days]
    )
    phase = 2.0 * np.pi * (slot - 14) / 366.0
    mu = 24.0 + 5.0 * np.cos(phase) + year_effect[[d.year - start_year for d in days]]
    sigma = np.exp(0.6 + 0.2 * np.cos(phase))
    xi = 0.08

    u = np.clip(rng.random(n_days), 1e-12, 1.0 - 1e-12)
    values = mu + sigma * ((-np.log(u)) ** -xi - 1.0) / xi

    drop = rng.random(n_days) < missing_rate
    rows = [
        (day, round(float(v), 1))
        for day, v, missing in zip(days, values, drop)
        if not (missing and (day.month, day.day) not in _PROTECTED)
    ]
    return rows


def write_synthetic_csv(path, **kwargs) -> int:
    """Write the fixture in the ``date,tmax`` ingestion format; returns rows."""
    rows = synthetic_daily_tmax(**kwargs)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "tmax"])
        writer.writerows((day.isoformat(), value) for day, value in rows)
    return len(rows)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Write the synthetic temperature fixture")
    parser.add_argument("output", help="destination CSV path")
    parser.add_argument("--years", type=int, default=DEFAULT_N_YEARS)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    args = parser.parse_args(argv)
    count = write_synthetic_csv(args.output, n_years=args.years, seed=args.seed)
    print(f"wrote {count} observations to {args.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
