"""Seeded Monte Carlo experiments that measure convergence rates.

Each experiment simulates datasets of increasing size from a truth model,
tracks the sup over a grid of a centered quantity, and fits a least-squares
slope to (log n, log mean sup).  Boundedness-in-probability claims are
operationalized two ways: the slope band, and stability across n of the
median of the rate-normalized statistic.

Replication r at sample size n uses the generator seeded by
``SeedSequence([seed, n, r])``, so results are bit-reproducible from the
master seed and independent of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coxfit import fit_mple
from .data import SurvivalDataset
from .linearize import _t2_terms, xi_truth_mean
from .breslow import breslow_traditional
from .risk import build_aggregates, d1_n, phi_n
from .truth import TruthModel, generate_dataset

# Fraction of replications allowed to fail (non-converged fits) before the
# whole experiment is declared invalid.
EXCLUSION_CAP = 0.01

A_N_CHOICES = {
    "1/log n": lambda n: 1.0 / math.log(n),
    "1/sqrt(log n)": lambda n: 1.0 / math.sqrt(math.log(n)),
    "const": lambda n: 1.0,
}


class ExperimentValidityError(RuntimeError):
    """Too many replications were excluded; results would be biased."""


def replication_seed(seed: int, n: int, rep: int) -> np.random.SeedSequence:
    """Documented split function: child stream for (sample size, replication)."""
    return np.random.SeedSequence([int(seed), int(n), int(rep)])


def fit_loglog_slope(sample_sizes, values) -> tuple[float, float]:
    """OLS slope and standard error of log(values) on log(sample_sizes)."""
    x = np.log(np.asarray(sample_sizes, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    coeffs, residuals, *_ = np.polyfit(x, y, 1, full=True)
    slope = float(coeffs[0])
    k = x.size
    if k > 2 and residuals.size:
        sigma2 = float(residuals[0]) / (k - 2)
        se = math.sqrt(sigma2 / float(np.sum((x - x.mean()) ** 2)))
    else:
        se = float("nan")
    return slope, se


@dataclass(frozen=True)
class QuantitySummary:
    """Per-n summaries of one tracked sup-norm."""

    mean: np.ndarray
    median: np.ndarray
    q10: np.ndarray
    q90: np.ndarray
    slope: float
    slope_stderr: float


@dataclass(frozen=True)
class RateExperimentResult:
    claim: str
    sample_sizes: tuple[int, ...]
    replications: int
    seed: int
    a_n_label: str
    grid_points: int
    M: float
    quantities: dict[str, QuantitySummary]
    raw: dict[str, np.ndarray]          # quantity -> (len(sizes), reps), NaN = excluded
    excluded: tuple[int, ...] = field(default=())
    normalized_median: np.ndarray | None = None  # median of a_n * n * sup per n

    @property
    def fitted_slope(self) -> float:
        """Slope of the experiment's primary tracked quantity."""
        return self.quantities[self.primary_quantity].slope

    @property
    def primary_quantity(self) -> str:
        order = ["r_n", "r_n3", "phi"]
        for name in order:
            if name in self.quantities:
                return name
        return next(iter(self.quantities))

    def normalized_stability_ratio(self) -> float:
        """Max/min across n of the normalized-statistic medians."""
        if self.normalized_median is None:
            raise ValueError("experiment does not track a normalized statistic")
        med = self.normalized_median
        return float(med.max() / med.min())

    def to_dict(self) -> dict:
        def num(v):
            # JSON has no NaN; an undefined standard error serializes as null.
            v = float(v)
            return v if math.isfinite(v) else None

        out = {
            "claim": self.claim,
            "sample_sizes": list(self.sample_sizes),
            "replications": self.replications,
            "seed": self.seed,
            "a_n": self.a_n_label,
            "grid_points": self.grid_points,
            "M": self.M,
            "fitted_slope": num(self.fitted_slope),
            "excluded": list(self.excluded),
            "quantities": {
                name: {
                    "mean_sup": [num(v) for v in s.mean],
                    "median_sup": [num(v) for v in s.median],
                    "q10_sup": [num(v) for v in s.q10],
                    "q90_sup": [num(v) for v in s.q90],
                    "slope": num(s.slope),
                    "slope_stderr": num(s.slope_stderr),
                }
                for name, s in sorted(self.quantities.items())
            },
        }
        if self.normalized_median is not None:
            out["normalized_median"] = [float(v) for v in self.normalized_median]
            out["normalized_stability_ratio"] = self.normalized_stability_ratio()
        return out


def _validate_sizes(sample_sizes):
    sizes = tuple(int(n) for n in sample_sizes)
    if len(sizes) < 2 or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sample_sizes must be at least two strictly increasing integers")
    return sizes


def _fixed_grid(M: float, grid_points: int) -> np.ndarray:
    return np.linspace(0.0, M, grid_points)


def _eval_grid(fixed: np.ndarray, data: SurvivalDataset, M: float,
               *, refine_steps: bool = False, cap_at_support: bool = False) -> np.ndarray:
    """Fixed grid plus the data's jump points (sup of step terms sits there).

    With ``cap_at_support`` the grid is clipped to the largest follow-up time:
    reciprocal-risk-mass integrands are undefined beyond it, and on the
    (asymptotically negligible) event that the sample ends before M the sup is
    taken over the observable window instead.
    """
    hi = min(M, float(data.sorted_view.times[-1])) if cap_at_support else M
    t = data.sorted_view.distinct_times
    t = t[t <= hi]
    pieces = [fixed[fixed <= hi], t]
    if refine_steps:
        pieces.append(np.minimum(np.nextafter(t, np.inf), hi))
    return np.unique(np.concatenate(pieces))


def _summaries(sample_sizes, raw: dict[str, np.ndarray]) -> dict[str, QuantitySummary]:
    out = {}
    for name, table in raw.items():
        mean = np.nanmean(table, axis=1)
        slope, se = fit_loglog_slope(sample_sizes, mean)
        out[name] = QuantitySummary(
            mean=mean,
            median=np.nanmedian(table, axis=1),
            q10=np.nanquantile(table, 0.1, axis=1),
            q90=np.nanquantile(table, 0.9, axis=1),
            slope=slope,
            slope_stderr=se,
        )
    return out


def risk_deviation_experiment(
    truth: TruthModel,
    sample_sizes,
    replications: int,
    seed: int,
    *,
    grid_points: int = 512,
    phi_floor: float = 0.05,
) -> RateExperimentResult:
    """Root-n deviations of the empirical risk mass and its gradient.

    Tracks sup over [0, M] of |phi_n(beta0, .) - phi(beta0, .)| and of the
    Euclidean norm of the gradient deviation, both evaluated at the true
    coefficients (no fitting).
    """
    sizes = _validate_sizes(sample_sizes)
    M = truth.default_M(phi_floor)
    fixed = _fixed_grid(M, grid_points)
    sup_phi = np.empty((len(sizes), replications))
    sup_d1 = np.empty((len(sizes), replications))
    for i, n in enumerate(sizes):
        for r in range(replications):
            data = generate_dataset(truth, n, replication_seed(seed, n, r))
            grid = _eval_grid(fixed, data, M, refine_steps=True)
            agg = build_aggregates(data, truth.beta0)
            dev_phi = phi_n(agg, grid) - truth.phi(grid)
            sup_phi[i, r] = np.max(np.abs(dev_phi))
            if truth.p:
                dev_d1 = d1_n(agg, grid) - truth.d1(grid)
                sup_d1[i, r] = np.max(np.linalg.norm(dev_d1, axis=1))
            else:
                sup_d1[i, r] = np.nan
    raw = {"phi": sup_phi}
    if truth.p:
        raw["d1"] = sup_d1
    return RateExperimentResult(
        claim="risk-deviation",
        sample_sizes=sizes,
        replications=replications,
        seed=int(seed),
        a_n_label="const",
        grid_points=grid_points,
        M=M,
        quantities=_summaries(sizes, raw),
        raw=raw,
        excluded=tuple(0 for _ in sizes),
    )


def coupling_remainder_experiment(
    truth: TruthModel,
    sample_sizes,
    replications: int,
    seed: int,
    *,
    a_n: str = "1/log n",
    grid_points: int = 512,
    phi_floor: float = 0.05,
) -> RateExperimentResult:
    """Rate of the empirical-process coupling remainder r_n3.

    r_n3 integrates the deviation of the reciprocal empirical risk mass
    against the centered empirical measure; its sup should shrink almost at
    rate 1/n.  Evaluated at the true coefficients, so no fitting is involved.
    Reports the slope and the per-n medians of a_n * n * sup|r_n3|.
    """
    sizes = _validate_sizes(sample_sizes)
    if a_n not in A_N_CHOICES:
        raise ValueError(f"unknown a_n choice {a_n!r}; options: {sorted(A_N_CHOICES)}")
    a_fn = A_N_CHOICES[a_n]
    M = truth.default_M(phi_floor)
    fixed = _fixed_grid(M, grid_points)
    sup_r3 = np.empty((len(sizes), replications))
    for i, n in enumerate(sizes):
        for r in range(replications):
            data = generate_dataset(truth, n, replication_seed(seed, n, r))
            grid = _eval_grid(fixed, data, M, cap_at_support=True)
            terms = _t2_terms(data, truth, grid)
            sup_r3[i, r] = np.max(np.abs(terms["r_n3"]))
    raw = {"r_n3": sup_r3}
    normalized = np.array(
        [np.median(a_fn(n) * n * sup_r3[i]) for i, n in enumerate(sizes)]
    )
    return RateExperimentResult(
        claim="coupling-remainder",
        sample_sizes=sizes,
        replications=replications,
        seed=int(seed),
        a_n_label=a_n,
        grid_points=grid_points,
        M=M,
        quantities=_summaries(sizes, raw),
        raw=raw,
        excluded=tuple(0 for _ in sizes),
        normalized_median=normalized,
    )


def linearization_remainder_experiment(
    truth: TruthModel,
    sample_sizes,
    replications: int,
    seed: int,
    *,
    a_n: str = "1/log n",
    grid_points: int = 512,
    phi_floor: float = 0.05,
    force_beta0: bool = False,
) -> RateExperimentResult:
    """Rate of the linearization remainder r_n with fitted coefficients.

    Per replication: fit the coefficients, then form

        r_n(x) = haz_n(beta_hat, x) - haz_0(x) - mean_i xi_i(x)
                 + (beta_hat - beta0)' A0(x)

    with truth-mode influence values and the population sensitivity curve.
    Non-converged fits are excluded and counted; exceeding the exclusion cap
    invalidates the experiment.  ``force_beta0`` replaces the fitted
    coefficients by the true ones (the remainder then reduces to r_n3+r_n4).
    Also tracks sup|mean xi|, the linear term the remainder must stay below.
    """
    sizes = _validate_sizes(sample_sizes)
    if a_n not in A_N_CHOICES:
        raise ValueError(f"unknown a_n choice {a_n!r}; options: {sorted(A_N_CHOICES)}")
    a_fn = A_N_CHOICES[a_n]
    if truth.p == 0 and not force_beta0:
        raise ValueError("fitting requires covariates; use force_beta0 for p = 0")
    M = truth.default_M(phi_floor)
    fixed = _fixed_grid(M, grid_points)
    sup_r = np.full((len(sizes), replications), np.nan)
    sup_xi = np.full((len(sizes), replications), np.nan)
    excluded = []
    for i, n in enumerate(sizes):
        bad = 0
        for r in range(replications):
            data = generate_dataset(truth, n, replication_seed(seed, n, r))
            if force_beta0:
                beta_hat = truth.beta0
            else:
                fit = fit_mple(data)
                if not fit.converged:
                    bad += 1
                    continue
                beta_hat = fit.beta_hat
            grid = _eval_grid(fixed, data, M, cap_at_support=True)
            haz = breslow_traditional(data, beta_hat).curve(grid)
            mean_xi = xi_truth_mean(data, truth, grid)
            resid = haz - truth.cum_hazard0(grid) - mean_xi
            if truth.p:
                resid += truth.a0(grid) @ (beta_hat - truth.beta0)
            sup_r[i, r] = np.max(np.abs(resid))
            sup_xi[i, r] = np.max(np.abs(mean_xi))
        excluded.append(bad)
        if bad > EXCLUSION_CAP * replications:
            raise ExperimentValidityError(
                f"{bad}/{replications} replications excluded at n={n}; "
                f"cap is {EXCLUSION_CAP:.0%}"
            )
    raw = {"r_n": sup_r, "mean_xi": sup_xi}
    normalized = np.array(
        [np.nanmedian(a_fn(n) * n * sup_r[i]) for i, n in enumerate(sizes)]
    )
    return RateExperimentResult(
        claim="linearization-remainder",
        sample_sizes=sizes,
        replications=replications,
        seed=int(seed),
        a_n_label=a_n,
        grid_points=grid_points,
        M=M,
        quantities=_summaries(sizes, raw),
        raw=raw,
        excluded=tuple(excluded),
        normalized_median=normalized,
    )


# ---------------------------------------------------------------------------
# Flat key-value experiment configs


CONFIG_KEYS = {
    "truth", "claim", "sample_sizes", "replications", "a_n", "seed",
    "grid_points", "M_policy",
}


def parse_config(path) -> dict:
    """Parse a flat ``key = value`` experiment config file.

    Keys: truth, claim, sample_sizes (comma-separated), replications, a_n,
    seed, grid_points, M_policy (risk-mass floor defining M).  Lines starting
    with ``#`` and blank lines are ignored.
    """
    out: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            if key == "sample_sizes":
                out[key] = tuple(int(v) for v in value.split(","))
            elif key in {"replications", "seed", "grid_points"}:
                out[key] = int(value)
            elif key == "M_policy":
                out[key] = float(value)
            else:
                out[key] = value
    return out
