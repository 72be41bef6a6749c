"""Influence-function linearization of the baseline cumulative hazard.

The centered estimate decomposes, uniformly on a compact window [0, M] with
positive risk mass, as

    cum_haz_n(x) - cum_haz_0(x)
        = mean_i xi(T_i, Delta_i, Z_i; x)
          - (beta_hat - beta0)' A0(x)
          + r_n(x),

where the per-subject influence term is

    xi(t, delta, z; x) = -exp(beta0'z) * int_0^{min(x,t)} rate0/Phi du
                         + delta {t <= x} / Phi(beta0, t)

and r_n is the higher-order remainder.  This module evaluates xi both with
population plug-ins (truth mode: exact functionals of a TruthModel) and with
empirical plug-ins (fitted coefficients, step-function hazard, empirical risk
mass), composes the plug-in variance estimate, and computes the exact
algebraic decomposition of the centered estimate used to measure remainder
rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .breslow import PluginACurve, breslow_traditional
from .coxfit import CoxFit, score_residuals
from .data import SurvivalDataset
from .risk import build_aggregates, phi_n
from .stepfun import StepCurve
from .truth import TruthModel

MODE_PLUGIN = "plugin"
MODE_TRUTH = "truth"


@dataclass(frozen=True)
class InfluenceMatrix:
    """Per-subject influence values on a grid; entry (i, k) is xi_i(x_k)."""

    grid: np.ndarray
    values: np.ndarray
    mode: str


@dataclass(frozen=True)
class VarianceCurves:
    """Plug-in variance of the cumulative hazard estimate along the grid.

    ``total`` includes the coefficient-estimation contribution through the
    sensitivity curve; ``xi_only`` ignores it (exact for the no-covariate
    case).
    """

    grid: np.ndarray
    total: np.ndarray
    xi_only: np.ndarray


@dataclass(frozen=True)
class DecompositionReport:
    """Exact split of the centered estimate on a grid.

    ``t_n1`` is the cost of plugging fitted coefficients into the hazard
    estimate; ``t_n2`` the estimation error at the true coefficients, which
    splits algebraically as ``b_n + c_n + r_n3 + r_n4``.  ``beta_term`` is
    the first-order coefficient effect ``-(beta_hat-beta0)'A0(x)`` and
    ``r_n = t_n1 + t_n2 - mean_xi - beta_term`` is the linearization
    remainder.
    """

    grid: np.ndarray
    t_n1: np.ndarray
    t_n2: np.ndarray
    b_n: np.ndarray
    c_n: np.ndarray
    r_n3: np.ndarray
    r_n4: np.ndarray
    r_n: np.ndarray
    mean_xi: np.ndarray
    beta_term: np.ndarray
    sup_norms: dict
    beta_hat: np.ndarray
    beta0: np.ndarray

    def identity_residual(self) -> float:
        """Max grid deviation of t_n2 from b_n + c_n + r_n3 + r_n4."""
        return float(
            np.max(np.abs(self.t_n2 - (self.b_n + self.c_n + self.r_n3 + self.r_n4)))
        )


def _as_grid(x_grid) -> np.ndarray:
    grid = np.atleast_1d(np.asarray(x_grid, dtype=float))
    if grid.size == 0 or not np.all(np.isfinite(grid)) or np.any(grid < 0):
        raise ValueError("grid must be nonempty, finite, and nonnegative")
    return grid


# ---------------------------------------------------------------------------
# Influence values


def xi_truth_value(truth: TruthModel, t: float, delta: bool, z, x: float) -> float:
    """Influence of one observation at one point, with population plug-ins."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    eta = float(z @ truth.beta0) if truth.p else 0.0
    integral = truth.hazard_over_phi(min(x, t)) if min(x, t) > 0 else 0.0
    event = 1.0 / truth.phi(t) if (delta and t <= x) else 0.0
    return float(-np.exp(eta) * integral + event)


def xi_truth(data: SurvivalDataset, truth: TruthModel, x_grid) -> InfluenceMatrix:
    """Influence matrix with population plug-ins, one row per subject."""
    grid = _as_grid(x_grid)
    hi = float(grid.max())
    if truth.phi(hi) <= 0:
        raise ValueError("grid extends beyond the follow-up support of the design")
    t = data.times
    eta = data.covariates @ truth.beta0 if truth.p else np.zeros(data.n)
    q_t = truth.hazard_over_phi(np.minimum(t, hi))
    q_x = truth.hazard_over_phi(grid)
    q_min = np.where(t[:, None] <= grid[None, :], q_t[:, None], q_x[None, :])
    event_weight = np.where(data.events, 1.0 / truth.phi(t), 0.0)
    event = event_weight[:, None] * (t[:, None] <= grid[None, :])
    values = -np.exp(eta)[:, None] * q_min + event
    return InfluenceMatrix(grid=grid, values=values, mode=MODE_TRUTH)


def xi_truth_mean(data: SurvivalDataset, truth: TruthModel, x_grid) -> np.ndarray:
    """Column means of the truth-mode influence matrix, via prefix sums.

    Same values as ``xi_truth(...).values.mean(axis=0)`` but O((n+g) log n),
    which is what the rate experiments need at scale.
    """
    grid = _as_grid(x_grid)
    hi = float(grid.max())
    if truth.phi(hi) <= 0:
        raise ValueError("grid extends beyond the follow-up support of the design")
    sv = data.sorted_view
    eta = sv.covariates @ truth.beta0 if truth.p else np.zeros(data.n)
    w = np.exp(eta)
    q_t = truth.hazard_over_phi(np.minimum(sv.times, hi))
    event_weight = np.where(sv.events, 1.0 / truth.phi(sv.times), 0.0)
    prefix_wq = np.concatenate([[0.0], np.cumsum(w * q_t)])
    prefix_w = np.concatenate([[0.0], np.cumsum(w)])
    prefix_ev = np.concatenate([[0.0], np.cumsum(event_weight)])
    k = np.searchsorted(sv.times, grid, side="right")
    q_x = truth.hazard_over_phi(grid)
    total_w = prefix_w[-1]
    integral_part = prefix_wq[k] + q_x * (total_w - prefix_w[k])
    return (-integral_part + prefix_ev[k]) / data.n


def xi_plugin(data: SurvivalDataset, fit: CoxFit | None, x_grid) -> InfluenceMatrix:
    """Influence matrix with empirical plug-ins.

    The path integral is replaced by the sum of hazard-estimate increments
    over the empirical risk mass; the event term uses the empirical risk mass
    at the subject's own time.  ``fit`` may be None only for covariate-free
    data; otherwise it must have converged.
    """
    grid = _as_grid(x_grid)
    if data.covariate_dim == 0:
        beta = np.zeros(0)
    else:
        if fit is None:
            raise ValueError("a converged fit is required when covariates are present")
        if not fit.converged:
            raise ValueError(f"fit did not converge (status {fit.status})")
        beta = fit.beta_hat
    sv = data.sorted_view
    if float(grid.max()) > float(sv.times[-1]):
        raise ValueError(
            "grid point beyond the last follow-up time: empirical risk mass is zero"
        )
    agg = build_aggregates(data, beta)
    base = breslow_traditional(data, beta)
    ev_times = base.curve.jump_times
    increments = np.diff(np.concatenate([[0.0], base.curve.cumulative_values]))
    phi_at_events = phi_n(agg, ev_times)
    qhat = StepCurve(ev_times, np.cumsum(increments / phi_at_events))
    t = data.times
    eta = data.covariates @ beta if data.covariate_dim else np.zeros(data.n)
    q_t = qhat(t)
    q_x = qhat(grid)
    q_min = np.where(t[:, None] <= grid[None, :], q_t[:, None], q_x[None, :])
    event_weight = np.where(data.events, 1.0 / phi_n(agg, t), 0.0)
    event = event_weight[:, None] * (t[:, None] <= grid[None, :])
    values = -np.exp(eta)[:, None] * q_min + event
    return InfluenceMatrix(grid=grid, values=values, mode=MODE_PLUGIN)


# ---------------------------------------------------------------------------
# Plug-in variance


def variance_estimate(
    data: SurvivalDataset,
    infl: InfluenceMatrix,
    fit: CoxFit | None = None,
    a_curve: PluginACurve | None = None,
) -> VarianceCurves:
    """Pointwise plug-in variance of the cumulative hazard estimate.

    Composes the influence values with the coefficient estimator's linear
    expansion: subject i carries ``xi_i(x) - ell_i' A_n(x)`` where ``ell_i``
    is the information-scaled score residual.  With no covariates the
    sensitivity term vanishes and ``total == xi_only``.
    """
    if data.n < 2:
        raise ValueError("variance undefined for n < 2")
    xi_only = infl.values.var(axis=0, ddof=1) / data.n
    if data.covariate_dim == 0:
        return VarianceCurves(grid=infl.grid, total=xi_only.copy(), xi_only=xi_only)
    if fit is None or a_curve is None:
        raise ValueError("fit and sensitivity curve are required with covariates")
    if not fit.converged:
        raise ValueError(f"fit did not converge (status {fit.status})")
    if a_curve.is_empty:
        raise ValueError("sensitivity curve is empty")
    resid = score_residuals(data, fit.beta_hat)
    try:
        ell = data.n * np.linalg.solve(fit.information, resid.T).T
    except np.linalg.LinAlgError:
        raise ValueError("singular information") from None
    a_vals = a_curve.values_at(infl.grid)
    psi = infl.values - ell @ a_vals.T
    total = psi.var(axis=0, ddof=1) / data.n
    return VarianceCurves(grid=infl.grid, total=total, xi_only=xi_only)


# ---------------------------------------------------------------------------
# Exact decomposition of the centered estimate


def _piecewise_risk_integrals(data: SurvivalDataset, truth: TruthModel, grid: np.ndarray):
    """Integrals of functions of the empirical risk mass against the truth.

    The empirical risk mass is constant between consecutive distinct
    follow-up times, so integrals like ``int_0^x g(Phi_n(u)) dF(u)`` reduce
    exactly to sums of antiderivative differences over those pieces.  Returns
    ``(I_v, I_inv)`` on the grid, where ``I_v`` integrates ``Phi_n *
    rate0/Phi`` and ``I_inv`` integrates ``(1/Phi_n) * Phi * rate0``.
    """
    agg = build_aggregates(data, truth.beta0)
    edges = np.concatenate([[0.0], agg.distinct_times])
    v = agg.s0 / data.n * np.exp(agg.log_scale)
    hi = float(grid.max())
    if hi > edges[-1]:
        raise ValueError(
            "grid point beyond the last follow-up time: empirical risk mass is zero"
        )
    cut = int(np.searchsorted(edges, hi, side="left"))
    edges = edges[: cut + 1].copy()
    edges[-1] = min(edges[-1], hi)  # partial final piece never extends past the grid
    v = v[:cut]
    q_edges = truth.hazard_over_phi(edges)
    h_edges = truth.h_uc(edges)
    q_grid = truth.hazard_over_phi(grid)
    h_grid = truth.h_uc(grid)

    def accumulate(gvals, f_edges, f_grid):
        piece = gvals * np.diff(f_edges)
        prefix = np.concatenate([[0.0], np.cumsum(piece)])
        j = np.searchsorted(edges, grid, side="left") - 1
        jj = np.clip(j, 0, gvals.size - 1)
        out = prefix[jj] + gvals[jj] * (f_grid - f_edges[jj])
        return np.where(j >= 0, out, 0.0)

    i_v = accumulate(v, q_edges, q_grid)
    i_inv = accumulate(1.0 / v, h_edges, h_grid)
    return i_v, i_inv


def _t2_terms(data: SurvivalDataset, truth: TruthModel, grid: np.ndarray) -> dict:
    """Terms of the split of cum_haz_n(beta0, x) - cum_haz_0(x)."""
    i_v, i_inv = _piecewise_risk_integrals(data, truth, grid)
    lam0 = truth.cum_hazard0(grid)
    sv = data.sorted_view
    event_weight = np.where(sv.events, 1.0 / truth.phi(sv.times), 0.0)
    prefix_ev = np.concatenate([[0.0], np.cumsum(event_weight)])
    k = np.searchsorted(sv.times, grid, side="right")
    s_phi = prefix_ev[k] / data.n
    base0 = breslow_traditional(data, truth.beta0)
    haz_n0 = base0.curve(grid)
    b_n = lam0 - i_v
    c_n = s_phi - lam0
    r_n3 = (haz_n0 - s_phi) - (i_inv - lam0)
    r_n4 = i_inv - 2.0 * lam0 + i_v
    return {
        "haz_n_beta0": haz_n0,
        "t_n2": haz_n0 - lam0,
        "b_n": b_n,
        "c_n": c_n,
        "r_n3": r_n3,
        "r_n4": r_n4,
    }


def remainder_decomposition(
    data: SurvivalDataset,
    fit: CoxFit | None,
    truth: TruthModel,
    x_grid,
    *,
    beta_hat=None,
) -> DecompositionReport:
    """Exact decomposition of the centered hazard estimate on ``x_grid``.

    ``beta_hat`` overrides the fitted coefficients (forcing ``beta_hat =
    beta0`` zeroes ``t_n1`` and reduces the remainder to ``r_n3 + r_n4``).
    Requires a converged fit otherwise, and a grid inside the data support
    with positive population risk mass.
    """
    grid = _as_grid(x_grid)
    if truth.phi(float(grid.max())) <= 0:
        raise ValueError("grid extends beyond the follow-up support of the design")
    if beta_hat is None:
        if fit is None:
            raise ValueError("either a fit or explicit coefficients are required")
        if not fit.converged:
            raise ValueError(f"fit did not converge (status {fit.status})")
        beta_hat = fit.beta_hat
    beta_hat = np.atleast_1d(np.asarray(beta_hat, dtype=float))
    terms = _t2_terms(data, truth, grid)
    haz_hat = breslow_traditional(data, beta_hat).curve(grid)
    t_n1 = haz_hat - terms["haz_n_beta0"]
    mean_xi = xi_truth_mean(data, truth, grid)
    a0 = truth.a0(grid)
    beta_term = -a0 @ (beta_hat - truth.beta0) if truth.p else np.zeros(grid.size)
    lam0 = truth.cum_hazard0(grid)
    r_n = (haz_hat - lam0) - mean_xi - beta_term
    arrays = {
        "t_n1": t_n1,
        "t_n2": terms["t_n2"],
        "b_n": terms["b_n"],
        "c_n": terms["c_n"],
        "r_n3": terms["r_n3"],
        "r_n4": terms["r_n4"],
        "r_n": r_n,
        "mean_xi": mean_xi,
        "beta_term": beta_term,
    }
    sup_norms = {name: float(np.max(np.abs(val))) for name, val in arrays.items()}
    return DecompositionReport(
        grid=grid,
        sup_norms=sup_norms,
        beta_hat=beta_hat,
        beta0=truth.beta0,
        **arrays,
    )


def default_m_plugin(data: SurvivalDataset, beta, phi_floor: float = 0.05) -> float:
    """Largest follow-up time with empirical risk mass >= phi_floor."""
    agg = build_aggregates(data, beta)
    mass = agg.s0 / data.n * np.exp(agg.log_scale)
    ok = np.flatnonzero(mass >= phi_floor)
    if ok.size == 0:
        raise ValueError("empirical risk mass is below the floor everywhere")
    return float(agg.distinct_times[ok[-1]])
