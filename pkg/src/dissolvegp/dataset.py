"""Dissolution datasets: ingestion, summary statistics and validity checks.

A dataset holds the cumulative percent-dissolved measurements of ``n`` dosage
units sampled at ``p`` common time points for one product group (reference,
test, or a single experiment).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import (
    DataError,
    GridMismatchError,
    InsufficientReplicationError,
    ParseError,
    ValueRangeError,
)

# Ingestion tolerance for percent values: slack below 0 / above 100 admits
# measurement noise while still rejecting gross unit errors.
VALUE_MIN = -5.0
VALUE_MAX = 150.0


@dataclass(frozen=True)
class DissolutionDataset:
    """n units x p time points of cumulative percent dissolved for one group."""

    group_label: str
    times: np.ndarray
    values: np.ndarray
    unit_ids: tuple[str, ...]

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if times.ndim != 1 or values.ndim != 2:
            raise DataError("times must be a vector and values an n x p matrix")
        if values.shape[1] != times.size:
            raise DataError(
                f"values has {values.shape[1]} columns but {times.size} times given"
            )
        if times.size < 1 or values.shape[0] < 1:
            raise DataError("dataset needs at least one unit and one time point")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(values)):
            raise DataError("times and values must be finite")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise DataError("times must be strictly increasing")
        unit_ids = tuple(str(u) for u in self.unit_ids)
        if len(unit_ids) != values.shape[0]:
            raise DataError("one unit id per row required")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "unit_ids", unit_ids)

    @property
    def n_units(self) -> int:
        return self.values.shape[0]

    @property
    def n_times(self) -> int:
        return self.times.size

    def drop_time_index(self, i: int) -> "DissolutionDataset":
        """Dataset with time point ``i`` removed (used by leave-one-out scoring)."""
        keep = np.arange(self.n_times) != i
        return DissolutionDataset(
            self.group_label, self.times[keep], self.values[:, keep], self.unit_ids
        )


@dataclass(frozen=True)
class AverageProfile:
    """Per-time mean, variance (divisor n) and CV% (sd divisor n-1) of a dataset."""

    times: np.ndarray
    means: np.ndarray
    per_time_variance: np.ndarray
    per_time_cv_percent: np.ndarray | None  # None when n == 1 (CV undefined)


@dataclass(frozen=True)
class PooledCovariance:
    """Pooled covariance S = 0.5 (S_R + S_T) of two equal-grid datasets."""

    S: np.ndarray
    S_R: np.ndarray
    S_T: np.ndarray


@dataclass(frozen=True)
class ValidityReport:
    """Outcome of the five regulatory criteria for f2 applicability.

    Criteria: (1) at least three time points, (2) at least 12 units per group,
    (3) identical time grids, (4) at most one average measurement above 85%
    per group, (5) CV% at most 20 at the first time point and at most 10
    afterwards, per group.
    """

    min_time_points: bool
    min_units: bool
    identical_grids: bool
    max_one_above_85: bool
    cv_within_limits: bool
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def overall(self) -> bool:
        return (
            self.min_time_points
            and self.min_units
            and self.identical_grids
            and self.max_one_above_85
            and self.cv_within_limits
        )

    def to_dict(self) -> dict:
        return {
            "min_time_points": self.min_time_points,
            "min_units": self.min_units,
            "identical_grids": self.identical_grids,
            "max_one_above_85": self.max_one_above_85,
            "cv_within_limits": self.cv_within_limits,
            "overall": self.overall,
            "notes": list(self.notes),
        }


def _open_source(source):
    if hasattr(source, "read"):
        return source
    text = str(source)
    if not text or "\n" in text or "," in text:
        return io.StringIO(text)
    return open(text, "r", encoding="utf-8", newline="")


def _check_range(value, line):
    if not (VALUE_MIN <= value <= VALUE_MAX):
        raise ValueRangeError(
            f"line {line}: value {value!r} outside accepted range "
            f"[{VALUE_MIN}, {VALUE_MAX}]"
        )


def read_groups(source, fmt: str = "long") -> dict[str, DissolutionDataset]:
    """Parse a CSV stream/path/text into one dataset per group label.

    Long format header: ``group,unit,time,value``. Wide format header:
    ``unit,t<1>,...,t<p>`` (single group; label ``"data"``).
    """
    if fmt not in ("long", "wide"):
        raise ParseError(f"unknown format {fmt!r}")
    fh = _open_source(source)
    close = not hasattr(source, "read")
    try:
        if fmt == "long":
            return _read_long(fh)
        return _read_wide(fh)
    finally:
        if close:
            fh.close()


def _read_long(fh):
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        raise ParseError("empty input", line=1)
    cols = [c.strip().lower() for c in header]
    if cols[:4] != ["group", "unit", "time", "value"]:
        raise ParseError(f"expected header group,unit,time,value, got {header}", line=1)
    cells: dict[str, dict[str, dict[float, float]]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 4:
            raise ParseError(f"expected 4 fields, got {len(row)}", line=lineno)
        group, unit = row[0].strip(), row[1].strip()
        try:
            t = float(row[2])
            v = float(row[3])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        _check_range(v, lineno)
        per_unit = cells.setdefault(group, {}).setdefault(unit, {})
        if t in per_unit:
            raise ParseError(f"duplicate cell ({group},{unit},{t})", line=lineno)
        per_unit[t] = v
    if not cells:
        raise ParseError("no data rows found")
    out = {}
    for group, units in cells.items():
        grids = {tuple(sorted(d)) for d in units.values()}
        if len(grids) != 1:
            raise GridMismatchError(
                f"group {group!r}: units do not share a common time grid"
            )
        times = np.array(sorted(grids.pop()), dtype=float)
        unit_ids = sorted(units)
        values = np.array([[units[u][t] for t in times] for u in unit_ids])
        out[group] = DissolutionDataset(group, times, values, tuple(unit_ids))
    return out


def _read_wide(fh):
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None:
        raise ParseError("empty input", line=1)
    cols = [c.strip() for c in header]
    if not cols or cols[0].lower() != "unit":
        raise ParseError(f"expected wide header unit,t<1>,..., got {header}", line=1)
    times = []
    for c in cols[1:]:
        if not c or c[0].lower() != "t":
            raise ParseError(f"wide time column {c!r} must look like t<number>", line=1)
        try:
            times.append(float(c[1:]))
        except ValueError:
            raise ParseError(f"non-numeric time label {c!r}", line=1) from None
    if not times:
        raise ParseError("wide format needs at least one time column", line=1)
    unit_ids, rows = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(cols):
            raise ParseError(
                f"expected {len(cols)} fields, got {len(row)}", line=lineno
            )
        unit_ids.append(row[0].strip())
        try:
            vals = [float(c) for c in row[1:]]
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        for v in vals:
            _check_range(v, lineno)
        rows.append(vals)
    if not rows:
        raise ParseError("no data rows found")
    order = np.argsort(times)
    times = np.asarray(times, dtype=float)[order]
    values = np.asarray(rows, dtype=float)[:, order]
    return {"data": DissolutionDataset("data", times, values, tuple(unit_ids))}


def parse_dataset(source, fmt: str = "long", group: str | None = None,
                  group_label: str | None = None) -> DissolutionDataset:
    """Parse one dataset from a CSV source.

    For long-format files holding several groups, ``group`` selects which one;
    it may be omitted when the file holds a single group. ``group_label``
    relabels the returned dataset (useful for wide files, which carry none).
    """
    groups = read_groups(source, fmt=fmt)
    if group is None:
        if len(groups) != 1:
            raise DataError(
                f"source holds groups {sorted(groups)}; pass group= to choose one"
            )
        ds = next(iter(groups.values()))
    else:
        if group not in groups:
            raise DataError(f"group {group!r} not found (have {sorted(groups)})")
        ds = groups[group]
    if group_label is not None and group_label != ds.group_label:
        ds = DissolutionDataset(group_label, ds.times, ds.values, ds.unit_ids)
    return ds


def average_profile(ds: DissolutionDataset) -> AverageProfile:
    """Average dissolution profile with per-time variance and CV%."""
    means = ds.values.mean(axis=0)
    variance = ds.values.var(axis=0)  # divisor n
    if ds.n_units > 1:
        sd = ds.values.std(axis=0, ddof=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            cv = np.where(means != 0, 100.0 * sd / means, np.inf)
    else:
        cv = None
    return AverageProfile(ds.times, means, variance, cv)


def _require_same_grid(ref: DissolutionDataset, test: DissolutionDataset):
    if ref.n_times != test.n_times or not np.allclose(
        ref.times, test.times, rtol=0.0, atol=0.0
    ):
        raise GridMismatchError("reference and test time grids differ")


def pooled_covariance(ref: DissolutionDataset, test: DissolutionDataset) -> PooledCovariance:
    """Pooled covariance 0.5 (S_R + S_T) with (n-1)-divisor sample covariances."""
    _require_same_grid(ref, test)
    if ref.n_units < 2 or test.n_units < 2:
        raise InsufficientReplicationError(
            "sample covariance needs at least two units per group"
        )
    s_r = np.cov(ref.values, rowvar=False, ddof=1).reshape(ref.n_times, ref.n_times)
    s_t = np.cov(test.values, rowvar=False, ddof=1).reshape(test.n_times, test.n_times)
    return PooledCovariance(0.5 * (s_r + s_t), s_r, s_t)


def check_validity(ref: DissolutionDataset, test: DissolutionDataset) -> ValidityReport:
    """Evaluate the five regulatory criteria; never raises."""
    notes = []
    c1 = ref.n_times >= 3 and test.n_times >= 3
    if not c1:
        notes.append("fewer than three time points")
    c2 = ref.n_units >= 12 and test.n_units >= 12
    if not c2:
        notes.append("fewer than 12 units in at least one group")
    c3 = ref.n_times == test.n_times and np.array_equal(ref.times, test.times)
    if not c3:
        notes.append("time grids differ between groups")

    c4 = True
    for ds in (ref, test):
        above = int(np.sum(average_profile(ds).means > 85.0))
        if above > 1:
            c4 = False
            notes.append(
                f"group {ds.group_label!r}: {above} average measurements above 85%"
            )

    # CV limit: 20% at the first time point, 10% at all later points.
    c5 = True
    for ds in (ref, test):
        prof = average_profile(ds)
        if prof.per_time_cv_percent is None:
            c5 = False
            notes.append(f"group {ds.group_label!r}: CV undefined for a single unit")
            continue
        limits = np.full(ds.n_times, 10.0)
        limits[0] = 20.0
        bad = prof.per_time_cv_percent > limits
        if np.any(bad):
            c5 = False
            idx = np.where(bad)[0]
            notes.append(
                f"group {ds.group_label!r}: CV limit exceeded at t="
                f"{[float(t) for t in ds.times[idx]]}"
            )

    return ValidityReport(c1, c2, c3, c4, c5, tuple(notes))


def _load_bundled(name: str) -> dict[str, DissolutionDataset]:
    text = resources.files("dissolvegp.data").joinpath(name).read_text(encoding="utf-8")
    return read_groups(text, fmt="long")


def load_dataset1() -> tuple[DissolutionDataset, DissolutionDataset]:
    """Bundled case-study dataset 1 as (reference, test)."""
    groups = _load_bundled("dataset1.csv")
    return groups["R"], groups["T"]


def load_dataset2() -> tuple[DissolutionDataset, DissolutionDataset]:
    """Bundled case-study dataset 2 as (reference, test)."""
    groups = _load_bundled("dataset2.csv")
    return groups["R"], groups["T"]
