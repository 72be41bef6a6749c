"""Right-censored survival data: validation, CSV ingestion, serialization.

The observable unit is a triplet (follow-up time, event indicator, covariate
vector).  Datasets are immutable after construction; every estimator in the
package consumes a :class:`SurvivalDataset`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class DataError(ValueError):
    """Raised when raw input cannot form a valid dataset."""


@dataclass(frozen=True)
class Observation:
    """One right-censored subject: T = min(X, C), the event flag, and Z."""

    follow_up_time: float
    event_indicator: bool
    covariates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "covariates", np.asarray(self.covariates, dtype=float))
        if not (math.isfinite(self.follow_up_time) and self.follow_up_time > 0):
            raise DataError(f"follow-up time must be positive and finite, got {self.follow_up_time!r}")
        if self.covariates.ndim != 1 or not np.all(np.isfinite(self.covariates)):
            raise DataError("covariates must be a finite 1-d vector")


class _SortedView(NamedTuple):
    order: np.ndarray            # stable argsort of follow-up times
    times: np.ndarray            # times[order]
    events: np.ndarray           # events[order]
    covariates: np.ndarray       # covariates[order]
    group_starts: np.ndarray     # first sorted index of each distinct time
    distinct_times: np.ndarray
    event_time_index: np.ndarray     # distinct-time index of each distinct event time
    distinct_event_times: np.ndarray
    event_counts: np.ndarray         # events per distinct event time
    event_cov_sums: np.ndarray       # per distinct event time, sum of event covariates


class SurvivalDataset:
    """Immutable collection of right-censored observations.

    Stores column arrays (``times``, ``events``, ``covariates``) for numeric
    work; ``observations`` materializes row objects on demand.  At least one
    event is required: with no events the baseline hazard estimate would be
    identically zero and the regression coefficients unidentifiable.
    """

    def __init__(self, times, events, covariates):
        times = np.asarray(times, dtype=float)
        events = np.asarray(events, dtype=bool)
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(len(times), -1)
        if times.ndim != 1 or events.shape != times.shape:
            raise DataError("times and events must be 1-d arrays of equal length")
        if covariates.shape[0] != times.shape[0]:
            raise DataError("covariate rows must match the number of observations")
        if times.size == 0:
            raise DataError("dataset must contain at least one observation")
        if not np.all(np.isfinite(times)) or np.any(times <= 0):
            bad = times[~(np.isfinite(times) & (times > 0))][0]
            raise DataError(f"follow-up times must be positive and finite, got {bad!r}")
        if not np.all(np.isfinite(covariates)):
            raise DataError("covariates must be finite")
        if not events.any():
            raise DataError("dataset has no events; estimators are undefined")
        self._times = times
        self._times.setflags(write=False)
        self._events = events
        self._events.setflags(write=False)
        self._covariates = covariates
        self._covariates.setflags(write=False)

    @property
    def times(self) -> np.ndarray:
        return self._times

    @property
    def events(self) -> np.ndarray:
        return self._events

    @property
    def covariates(self) -> np.ndarray:
        return self._covariates

    @property
    def n(self) -> int:
        return int(self._times.size)

    def __len__(self) -> int:
        return self.n

    @property
    def covariate_dim(self) -> int:
        return int(self._covariates.shape[1])

    @property
    def observations(self) -> list[Observation]:
        return [
            Observation(float(t), bool(e), z)
            for t, e, z in zip(self._times, self._events, self._covariates)
        ]

    @cached_property
    def sorted_view(self) -> _SortedView:
        # One stable sort shared by every estimator; ties grouped once.
        order = np.argsort(self._times, kind="stable")
        times = self._times[order]
        events = self._events[order]
        covs = self._covariates[order]
        is_start = np.empty(times.size, dtype=bool)
        is_start[0] = True
        is_start[1:] = times[1:] != times[:-1]
        group_starts = np.flatnonzero(is_start)
        distinct = times[group_starts]
        group_of = np.cumsum(is_start) - 1
        d_counts = np.bincount(group_of[events], minlength=distinct.size)
        event_groups = np.flatnonzero(d_counts)
        p = self.covariate_dim
        sums = np.zeros((event_groups.size, p))
        if p and event_groups.size:
            ev_groups_per_row = group_of[events]
            ev_covs = covs[events]
            for col in range(p):
                sums[:, col] = np.bincount(
                    ev_groups_per_row, weights=ev_covs[:, col], minlength=distinct.size
                )[event_groups]
        return _SortedView(
            order=order,
            times=times,
            events=events,
            covariates=covs,
            group_starts=group_starts,
            distinct_times=distinct,
            event_time_index=event_groups,
            distinct_event_times=distinct[event_groups],
            event_counts=d_counts[event_groups],
            event_cov_sums=sums,
        )


def validate_dataset(raw: Iterable[tuple]) -> SurvivalDataset:
    """Build a dataset from raw ``(time, event, covariates)`` rows.

    The covariate dimension is inferred from the first row; every later row
    must match it.  Raises :class:`DataError` on nonpositive or non-finite
    times, inconsistent covariate lengths, or a dataset without events.
    """
    rows = list(raw)
    if not rows:
        raise DataError("empty input")
    first_cov = np.atleast_1d(np.asarray(rows[0][2], dtype=float))
    p = first_cov.size
    times = np.empty(len(rows))
    events = np.empty(len(rows), dtype=bool)
    covs = np.empty((len(rows), p))
    for i, row in enumerate(rows):
        if len(row) != 3:
            raise DataError(f"row {i + 1}: expected (time, event, covariates)")
        t, e, z = row
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if z.size != p:
            raise DataError(f"row {i + 1}: covariate length {z.size} != {p}")
        times[i] = float(t)
        events[i] = bool(e)
        covs[i] = z
    return SurvivalDataset(times, events, covs)


_CSV_TRUE = {"1", "true"}
_CSV_FALSE = {"0", "false"}


def _expected_header(p: int) -> list[str]:
    return ["time", "event"] + [f"z{i}" for i in range(1, p + 1)]


def load_csv(path) -> SurvivalDataset:
    """Load a dataset from CSV with header ``time,event,z1,...,zp``.

    `p = 0` (header ``time,event``) is accepted.  The event column must be
    one of ``0``, ``1``, ``true``, ``false``.  Malformed rows are reported
    with their 1-based data-row number.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        p = len(header) - 2
        if p < 0 or header != _expected_header(p):
            raise DataError(f"{path}: header must be time,event,z1,...,zp; got {header!r}")
        rows = []
        for i, cells in enumerate(reader, start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != p + 2:
                raise DataError(f"{path}: row {i}: expected {p + 2} fields, got {len(cells)}")
            try:
                t = float(cells[0])
            except ValueError:
                raise DataError(f"{path}: row {i}: bad time value {cells[0]!r}") from None
            ev_token = cells[1].strip().lower()
            if ev_token in _CSV_TRUE:
                e = True
            elif ev_token in _CSV_FALSE:
                e = False
            else:
                raise DataError(f"{path}: row {i}: bad event value {cells[1]!r}")
            try:
                z = [float(c) for c in cells[2:]]
            except ValueError:
                raise DataError(f"{path}: row {i}: bad covariate value") from None
            rows.append((t, e, z))
    if not rows:
        raise DataError(f"{path}: no data rows")
    try:
        return validate_dataset(rows)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def save_csv(data: SurvivalDataset, path) -> None:
    """Write a dataset back to CSV with 17 significant digits (lossless)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_expected_header(data.covariate_dim))
        for t, e, z in zip(data.times, data.events, data.covariates):
            writer.writerow([f"{t:.17g}", "1" if e else "0"] + [f"{v:.17g}" for v in z])
