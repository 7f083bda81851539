"""Daily-maximum ingestion: CSV parsing, annual slicing onto a 366-day grid,
gap imputation, and schema-tagged persistence for pipeline outputs."""

from __future__ import annotations

import csv
import datetime
import json
import logging
from pathlib import Path

import numpy as np

from .bootstrap import IntervalBand
from .forecast import ForecastDensity
from .gaev import GaevDims
from .metrics import DivergenceReport
from .series import FunctionalSeries

logger = logging.getLogger(__name__)

MAX_GAP_DAYS = 7          # longer interior gaps drop the year
MIN_YEAR_COVERAGE = 0.9   # fraction of calendar days required to keep a year

_FEB29_SLOT = 59          # 0-based position of Feb 29 on the leap-year grid
_LEAP_REF = 2000          # reference leap year for month/day -> slot mapping

_SERIES_SCHEMA = "gevcast/functional-series/v1"
_BAND_SCHEMA = "gevcast/interval-band/v1"
_DENSITY_SCHEMA = "gevcast/forecast-density/v1"
_REPORT_SCHEMA = "gevcast/divergence-report/v1"
_DIMS_SCHEMA = "gevcast/gaev-dims/v1"


class SchemaVersionError(ValueError):
    """Raised when a persisted file carries an unknown schema tag."""


def parse_csv(path) -> list:
    """Read ``date,tmax`` rows into a date-sorted observation list.

    Duplicate dates and malformed rows are rejected with the offending line.
    """
    path = Path(path)
    observations: dict[datetime.date, float] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["date", "tmax"]:
            raise ValueError(f"{path}: expected header 'date,tmax', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                day = datetime.date.fromisoformat(row[0].strip())
                value = float(row[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {row}: {exc}") from exc
            if day in observations:
                raise ValueError(f"{path}:{lineno}: duplicate date {day.isoformat()}")
            observations[day] = value
    return sorted(observations.items())


def _day_slot(day: datetime.date) -> int:
    """Position of a calendar day on the common 366-slot leap-year grid."""
    return (datetime.date(_LEAP_REF, day.month, day.day) - datetime.date(_LEAP_REF, 1, 1)).days


def _nan_runs(values: np.ndarray):
    """(start, length) for each maximal run of NaNs."""
    isnan = np.isnan(values)
    runs = []
    start = None
    for i, missing in enumerate(isnan):
        if missing and start is None:
            start = i
        elif not missing and start is not None:
            runs.append((start, i - start))
            start = None
    if start is not None:
        runs.append((start, len(values) - start))
    return runs


def slice_annual(observations) -> FunctionalSeries:
    """Slice dated observations into annual curves on the 366-day grid.

    Feb 29 of common years is imputed as the mean of Feb 28 and Mar 1; other
    gaps up to MAX_GAP_DAYS consecutive days are linearly interpolated, and
    years with longer gaps or under 90% coverage are dropped with a warning.
    """
    by_year: dict[int, list] = {}
    for day, value in observations:
        by_year.setdefault(day.year, []).append((day, value))

    kept_years, rows, masks = [], [], []
    for year in sorted(by_year):
        entries = by_year[year]
        is_leap = datetime.date(year, 3, 1) - datetime.date(year, 2, 28) > datetime.timedelta(days=1)
        days_in_year = 366 if is_leap else 365
        if len(entries) < MIN_YEAR_COVERAGE * days_in_year:
            logger.warning("dropping year %d: only %d of %d days present",
                           year, len(entries), days_in_year)
            continue
        slots = np.full(366, np.nan)
        for day, value in entries:
            slots[_day_slot(day)] = value
        if not is_leap and np.isnan(slots[_FEB29_SLOT]):
            feb28, mar1 = slots[_FEB29_SLOT - 1], slots[_FEB29_SLOT + 1]
            if not np.isnan(feb28) and not np.isnan(mar1):
                slots[_FEB29_SLOT] = 0.5 * (feb28 + mar1)

        gap_runs = _nan_runs(slots)
        if any(length > MAX_GAP_DAYS for _, length in gap_runs):
            worst = max(length for _, length in gap_runs)
            logger.warning("dropping year %d: gap of %d consecutive days", year, worst)
            continue
        mask = np.isnan(slots)
        if np.any(mask):
            known = np.flatnonzero(~mask)
            slots[mask] = np.interp(np.flatnonzero(mask), known, slots[known])
        kept_years.append(year)
        rows.append(slots)
        masks.append(mask)

    if not kept_years:
        raise ValueError("no usable years after slicing")
    return FunctionalSeries(
        years=np.array(kept_years),
        grid=np.arange(1.0, 367.0),
        values=np.array(rows),
        imputed_mask=np.array(masks),
    )


# ---------------------------------------------------------------------------
# Persistence

def _write_csv(path, schema: str, header: list, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(f"# schema: {schema}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _read_tagged_csv(path):
    with Path(path).open(newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("# schema: "):
            raise SchemaVersionError(f"{path}: missing schema tag")
        schema = first[len("# schema: "):]
        reader = csv.reader(fh)
        header = next(reader)
        return schema, header, list(reader)


def persist(obj, path) -> None:
    """Write a pipeline artifact to a schema-tagged CSV/JSON file."""
    path = Path(path)
    if isinstance(obj, FunctionalSeries):
        rows = [
            (int(obj.years[t]), repr(float(obj.grid[j])), repr(float(obj.values[t, j])),
             int(obj.imputed_mask[t, j]))
            for t in range(obj.n_years)
            for j in range(obj.n_points)
        ]
        _write_csv(path, _SERIES_SCHEMA, ["year", "tau", "value", "imputed"], rows)
    elif isinstance(obj, IntervalBand):
        rows = [
            (obj.kind, repr(obj.level), obj.B, repr(float(obj.grid[j])),
             repr(float(obj.lower[j])), repr(float(obj.upper[j])))
            for j in range(obj.grid.size)
        ]
        _write_csv(path, _BAND_SCHEMA, ["kind", "level", "B", "tau", "lower", "upper"], rows)
    elif isinstance(obj, ForecastDensity):
        payload = {
            "schema": _DENSITY_SCHEMA,
            "horizon": obj.horizon,
            "method": obj.method,
            "grid": obj.grid.tolist(),
            "mu": obj.mu.tolist(),
            "sigma": obj.sigma.tolist(),
            "xi": obj.xi.tolist(),
        }
        path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    elif isinstance(obj, DivergenceReport):
        payload = {
            "schema": _REPORT_SCHEMA,
            "label": obj.label,
            "per_point_jsd": [v.tolist() for v in obj.per_point_jsd],
            "per_point_kld": [v.tolist() for v in obj.per_point_kld],
            "per_sample_jsd": obj.per_sample_jsd.tolist(),
            "per_sample_kld": obj.per_sample_kld.tolist(),
            "mean_jsd": obj.mean_jsd,
            "mean_kld": obj.mean_kld,
            "failed_windows": list(obj.failed_windows),
        }
        path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    elif isinstance(obj, GaevDims):
        payload = {
            "schema": _DIMS_SCHEMA,
            "d_mu": obj.d_mu,
            "d_sigma": obj.d_sigma,
            "d_xi": obj.d_xi,
        }
        path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    else:
        raise TypeError(f"cannot persist object of type {type(obj).__name__}")


def load(path):
    """Load a persisted artifact, dispatching on its schema tag."""
    path = Path(path)
    text_head = path.open().read(1)
    if text_head == "{":
        payload = json.loads(path.read_text())
        schema = payload.get("schema")
        if schema == _DENSITY_SCHEMA:
            return ForecastDensity(
                horizon=payload["horizon"],
                grid=payload["grid"],
                mu=payload["mu"],
                sigma=payload["sigma"],
                xi=payload["xi"],
                method=payload["method"],
            )
        if schema == _REPORT_SCHEMA:
            return DivergenceReport(
                label=payload["label"],
                per_point_jsd=tuple(np.array(v) for v in payload["per_point_jsd"]),
                per_point_kld=tuple(np.array(v) for v in payload["per_point_kld"]),
                per_sample_jsd=np.array(payload["per_sample_jsd"]),
                per_sample_kld=np.array(payload["per_sample_kld"]),
                mean_jsd=payload["mean_jsd"],
                mean_kld=payload["mean_kld"],
                failed_windows=tuple(payload["failed_windows"]),
            )
        if schema == _DIMS_SCHEMA:
            return GaevDims(payload["d_mu"], payload["d_sigma"], payload["d_xi"])
        raise SchemaVersionError(f"{path}: unknown schema tag {schema!r}")

    schema, header, rows = _read_tagged_csv(path)
    if schema == _SERIES_SCHEMA:
        years = sorted({int(r[0]) for r in rows})
        order = {y: i for i, y in enumerate(years)}
        taus = sorted({float(r[1]) for r in rows})
        tau_order = {v: j for j, v in enumerate(taus)}
        values = np.empty((len(years), len(taus)))
        mask = np.zeros((len(years), len(taus)), dtype=bool)
        for r in rows:
            t, j = order[int(r[0])], tau_order[float(r[1])]
            values[t, j] = float(r[2])
            mask[t, j] = bool(int(r[3]))
        return FunctionalSeries(years=np.array(years), grid=np.array(taus),
                                values=values, imputed_mask=mask)
    if schema == _BAND_SCHEMA:
        kind = rows[0][0]
        level = float(rows[0][1])
        b = int(rows[0][2])
        grid = np.array([float(r[3]) for r in rows])
        lower = np.array([float(r[4]) for r in rows])
        upper = np.array([float(r[5]) for r in rows])
        return IntervalBand(grid=grid, lower=lower, upper=upper, level=level,
                            kind=kind, B=b)
    raise SchemaVersionError(f"{path}: unknown schema tag {schema!r}")
