"""Baseline cumulative hazard estimation and its coefficient sensitivity.

Two deliberately separate constructions of the same estimator are kept and
cross-checked in tests: the classical event-time sum with increments
``d_i / sum_{T_j >= t_i} exp(beta'Z_j)``, and the plug-in form that averages
``1 / phi_n(beta, T_i)`` over uncensored subjects.  Their agreement is an
algebraic identity, not an approximation, so any disagreement is a defect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SurvivalDataset
from .risk import build_aggregates, d1_n, phi_n
from .stepfun import StepCurve


@dataclass(frozen=True)
class BaselineCumHazEstimate:
    """Step-function estimate of the baseline cumulative hazard.

    Jumps sit exactly at the distinct uncensored times; evaluation beyond the
    last follow-up time extends the last value (the plug-in form is undefined
    there), which :meth:`beyond_support` flags.
    """

    curve: StepCurve
    beta_used: np.ndarray
    max_follow_up: float

    def value(self, x):
        return self.curve(x)

    def beyond_support(self, x):
        return np.asarray(x, dtype=float) > self.max_follow_up


@dataclass(frozen=True)
class PluginACurve:
    """Sensitivity of the cumulative hazard estimate to the coefficients.

    One step curve per covariate coordinate; minus this curve is the beta
    gradient of the cumulative hazard estimate at fixed x.  Empty when the
    dataset has no covariates.
    """

    components: tuple[StepCurve, ...]
    beta_used: np.ndarray

    @property
    def is_empty(self) -> bool:
        return len(self.components) == 0

    def values_at(self, x) -> np.ndarray:
        """Evaluate all coordinates; shape (len(x), p)."""
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        if self.is_empty:
            return np.zeros((x_arr.size, 0))
        return np.column_stack([c(x_arr) for c in self.components])


def breslow_traditional(data: SurvivalDataset, beta) -> BaselineCumHazEstimate:
    """Event-time sum form: increments d_i over the raw risk-set sums."""
    agg = build_aggregates(data, beta)
    sv = data.sorted_view
    denom = agg.s0[sv.event_time_index] * np.exp(agg.log_scale)
    increments = sv.event_counts / denom
    curve = StepCurve(sv.distinct_event_times, np.cumsum(increments))
    return BaselineCumHazEstimate(
        curve=curve, beta_used=agg.beta, max_follow_up=float(sv.times[-1])
    )


def breslow_plugin(data: SurvivalDataset, beta) -> BaselineCumHazEstimate:
    """Plug-in form: (1/n) sum over events of 1 / phi_n(beta, T_i).

    Must agree with :func:`breslow_traditional` at every x; the two code
    paths are kept separate on purpose.
    """
    agg = build_aggregates(data, beta)
    sv = data.sorted_view
    ev_times = sv.times[sv.events]
    contributions = 1.0 / (data.n * phi_n(agg, ev_times))
    group = np.searchsorted(sv.distinct_event_times, ev_times)
    sums = np.bincount(group, weights=contributions, minlength=sv.distinct_event_times.size)
    curve = StepCurve(sv.distinct_event_times, np.cumsum(sums))
    return BaselineCumHazEstimate(
        curve=curve, beta_used=agg.beta, max_follow_up=float(sv.times[-1])
    )


def a_n_curve(data: SurvivalDataset, beta) -> PluginACurve:
    """Plug-in sensitivity curve (1/n) sum_{events, T_i <= x} d1/phi_n^2.

    Returns an empty, flagged curve when there are no covariates.
    """
    agg = build_aggregates(data, beta)
    if agg.p == 0:
        return PluginACurve(components=(), beta_used=agg.beta)
    sv = data.sorted_view
    ev_times = sv.times[sv.events]
    phi_vals = phi_n(agg, ev_times)
    d1_vals = d1_n(agg, ev_times)
    contributions = d1_vals / (data.n * phi_vals[:, None] ** 2)
    group = np.searchsorted(sv.distinct_event_times, ev_times)
    components = []
    for col in range(agg.p):
        sums = np.bincount(
            group, weights=contributions[:, col], minlength=sv.distinct_event_times.size
        )
        components.append(
            StepCurve(sv.distinct_event_times, np.cumsum(sums), monotone=False)
        )
    return PluginACurve(components=tuple(components), beta_used=agg.beta)
