"""Command-line surface: fit, baseline hazard curves, influence/variance,
decomposition, and the Monte Carlo rate lab.

Exit codes: 0 success, 1 I/O or input error, 2 invalid invocation or
model/fit failure, 3 internal self-check failure, 4 experiment validity
failure.  All artifacts are plain JSON/CSV written into --output-dir
(default: $BRESLOW_LAB_OUT or the working directory); reruns with identical
inputs and seeds produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import breslow as breslow_mod
from .coxfit import fit_mple
from .data import DataError, load_csv
from .experiments import (
    ExperimentValidityError,
    coupling_remainder_experiment,
    linearization_remainder_experiment,
    parse_config,
    risk_deviation_experiment,
)
from .linearize import (
    default_m_plugin,
    remainder_decomposition,
    variance_estimate,
    xi_plugin,
)
from .truth import generate_dataset, no_covariate_truth, reference_truth

EXIT_OK = 0
EXIT_IO = 1
EXIT_MODEL = 2
EXIT_SELF_CHECK = 3
EXIT_EXPERIMENT = 4

TRUTHS = {
    "reference": reference_truth,
    "no-covariates": no_covariate_truth,
}

CLAIMS = {
    "lemma1": risk_deviation_experiment,
    "lemma2": coupling_remainder_experiment,
    "theorem": linearization_remainder_experiment,
}


class _CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_input(args) -> "SurvivalDataset":
    if getattr(args, "input", None):
        try:
            return load_csv(args.input)
        except FileNotFoundError as exc:
            raise _CliError(EXIT_IO, f"cannot read {args.input}: {exc}") from exc
        except OSError as exc:
            raise _CliError(EXIT_IO, f"cannot read {args.input}: {exc}") from exc
        except DataError as exc:
            raise _CliError(EXIT_IO, str(exc)) from exc
    truth = _resolve_truth(args.truth)
    return generate_dataset(truth, args.n, args.seed)


def _resolve_truth(name: str):
    if name not in TRUTHS:
        raise _CliError(EXIT_MODEL, f"unknown truth model {name!r}; options: {sorted(TRUTHS)}")
    return TRUTHS[name]()


def _out_dir(args) -> Path:
    out = Path(args.output_dir or os.environ.get("BRESLOW_LAB_OUT", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")])


# ---------------------------------------------------------------------------
# Subcommands


def cmd_fit(args) -> int:
    data = _load_input(args)
    out = _out_dir(args)
    if data.covariate_dim == 0:
        raise _CliError(EXIT_MODEL, "fit requires at least one covariate column")
    fit = fit_mple(data, tol=args.tol, max_iter=args.max_iter)
    payload = {
        "beta_hat": [float(v) for v in fit.beta_hat],
        "log_partial_likelihood": fit.log_partial_likelihood,
        "score_norm": fit.score_norm,
        "information": [[float(v) for v in row] for row in fit.information],
        "iterations": fit.iterations,
        "status": fit.status,
        "n": data.n,
        "p": data.covariate_dim,
    }
    _write_json(out / "fit.json", payload)
    if not fit.converged:
        print(f"fit failed: {fit.status}", file=sys.stderr)
        return EXIT_MODEL
    return EXIT_OK


def cmd_breslow(args) -> int:
    data = _load_input(args)
    out = _out_dir(args)
    if args.beta is not None:
        beta = _parse_floats(args.beta) if args.beta else np.zeros(0)
        if beta.size != data.covariate_dim:
            raise _CliError(
                EXIT_MODEL,
                f"--beta has {beta.size} entries, dataset has p={data.covariate_dim}",
            )
    elif data.covariate_dim == 0:
        beta = np.zeros(0)
    else:
        fit = fit_mple(data, tol=args.tol, max_iter=args.max_iter)
        if not fit.converged:
            raise _CliError(EXIT_MODEL, f"fit failed: {fit.status}")
        beta = fit.beta_hat
    traditional = breslow_mod.breslow_traditional(data, beta)
    plugin = breslow_mod.breslow_plugin(data, beta)
    trad_vals = traditional.curve.cumulative_values
    plug_vals = plugin.curve(traditional.curve.jump_times)
    rel = np.max(np.abs(plug_vals - trad_vals) / (1.0 + np.abs(trad_vals)))
    if rel > 1e-10:
        print(f"estimator forms disagree: relative error {rel:.3e}", file=sys.stderr)
        return EXIT_SELF_CHECK
    _write_csv(
        out / "breslow.csv",
        ["x", "cum_hazard"],
        zip(traditional.curve.jump_times.tolist(), trad_vals.tolist()),
    )
    a_curve = breslow_mod.a_n_curve(data, beta)
    if not a_curve.is_empty:
        jumps = a_curve.components[0].jump_times
        rows = np.column_stack([jumps] + [c.cumulative_values for c in a_curve.components])
        _write_csv(
            out / "a_n.csv",
            ["x"] + [f"a{i}" for i in range(1, data.covariate_dim + 1)],
            (tuple(float(v) for v in row) for row in rows),
        )
    return EXIT_OK


def cmd_influence(args) -> int:
    data = _load_input(args)
    out = _out_dir(args)
    if data.covariate_dim:
        fit = fit_mple(data, tol=args.tol, max_iter=args.max_iter)
        if not fit.converged:
            raise _CliError(EXIT_MODEL, f"fit failed: {fit.status}")
        beta = fit.beta_hat
    else:
        fit = None
        beta = np.zeros(0)
    m = args.M if args.M is not None else default_m_plugin(data, beta)
    grid = np.linspace(0.0, m, args.grid_points)
    infl = xi_plugin(data, fit, grid)
    a_curve = breslow_mod.a_n_curve(data, beta)
    curves = variance_estimate(
        data, infl, fit, None if a_curve.is_empty else a_curve
    )
    _write_csv(
        out / "variance.csv",
        ["x", "variance", "variance_xi_only"],
        zip(grid.tolist(), curves.total.tolist(), curves.xi_only.tolist()),
    )
    if args.write_xi:
        header = ["subject"] + [f"x{k}" for k in range(grid.size)]
        rows = (
            (i, *[float(v) for v in row]) for i, row in enumerate(infl.values)
        )
        _write_csv(out / "xi_matrix.csv", header, rows)
    return EXIT_OK


def cmd_decompose(args) -> int:
    truth = _resolve_truth(args.truth)
    data = _load_input(args)
    out = _out_dir(args)
    if truth.p != data.covariate_dim:
        raise _CliError(EXIT_MODEL, "truth model and dataset covariate dimensions differ")
    if truth.p:
        fit = fit_mple(data, tol=args.tol, max_iter=args.max_iter)
        if not fit.converged:
            raise _CliError(EXIT_MODEL, f"fit failed: {fit.status}")
    else:
        fit = None
    m = args.M if args.M is not None else min(
        truth.default_M(), float(data.sorted_view.times[-1])
    )
    grid = np.linspace(0.0, m, args.grid_points)
    report = remainder_decomposition(
        data, fit, truth, grid, beta_hat=None if truth.p else truth.beta0
    )
    columns = ["t_n1", "t_n2", "b_n", "c_n", "r_n3", "r_n4", "r_n", "mean_xi"]
    rows = zip(
        grid.tolist(), *[getattr(report, c).tolist() for c in columns]
    )
    _write_csv(out / "decomposition.csv", ["x"] + columns, rows)
    payload = {
        "sup_norms": {k: float(v) for k, v in sorted(report.sup_norms.items())},
        "identity_residual": report.identity_residual(),
        "beta_hat": [float(v) for v in report.beta_hat],
        "beta0": [float(v) for v in report.beta0],
        "n": data.n,
        "M": m,
        "truth": args.truth,
    }
    if getattr(args, "input", None) is None:
        payload["seed"] = args.seed
    _write_json(out / "decomposition.json", payload)
    return EXIT_OK


def cmd_rate_lab(args) -> int:
    options = {
        "truth": "reference",
        "claim": None,
        "sample_sizes": None,
        "replications": None,
        "a_n": "1/log n",
        "seed": None,
        "grid_points": 512,
        "M_policy": 0.05,
    }
    if args.config:
        try:
            options.update(parse_config(args.config))
        except FileNotFoundError as exc:
            raise _CliError(EXIT_IO, str(exc)) from exc
        except ValueError as exc:
            raise _CliError(EXIT_MODEL, str(exc)) from exc
    if args.claim:
        options["claim"] = args.claim
    if args.truth:
        options["truth"] = args.truth
    if args.n:
        options["sample_sizes"] = tuple(int(v) for v in args.n.split(","))
    if args.reps is not None:
        options["replications"] = args.reps
    if args.a_n:
        options["a_n"] = args.a_n
    if args.seed is not None:
        options["seed"] = args.seed
    if args.grid_points is not None:
        options["grid_points"] = args.grid_points
    if args.phi_floor is not None:
        options["M_policy"] = args.phi_floor
    claim = options["claim"]
    if claim not in CLAIMS:
        raise _CliError(EXIT_MODEL, f"unknown claim {claim!r}; options: {sorted(CLAIMS)}")
    for key in ("sample_sizes", "replications", "seed"):
        if options[key] is None:
            raise _CliError(EXIT_MODEL, f"missing required option {key}")
    truth = _resolve_truth(options["truth"])
    kwargs = dict(grid_points=options["grid_points"], phi_floor=options["M_policy"])
    if claim != "lemma1":
        kwargs["a_n"] = options["a_n"]
    try:
        result = CLAIMS[claim](
            truth,
            options["sample_sizes"],
            options["replications"],
            options["seed"],
            **kwargs,
        )
    except ExperimentValidityError as exc:
        print(f"experiment invalid: {exc}", file=sys.stderr)
        return EXIT_EXPERIMENT
    out = _out_dir(args)
    payload = result.to_dict()
    payload["truth"] = options["truth"]
    _write_json(out / "rates.json", payload)
    for i, n in enumerate(result.sample_sizes):
        header = ["replication"] + sorted(result.raw)
        rows = (
            (r, *[float(result.raw[qty][i, r]) for qty in sorted(result.raw)])
            for r in range(result.replications)
        )
        _write_csv(out / f"reps_n{n}.csv", header, rows)
    print(f"claim={claim} seed={options['seed']} slope={result.fitted_slope:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="breslow-lab",
        description="Proportional hazards estimation and rate experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, *, with_input=True, with_truth_gen=False):
        p.add_argument("--output-dir", default=None, help="artifact directory")
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--max-iter", type=int, default=50)
        if with_input:
            p.add_argument("--input", default=None, help="input CSV (time,event,z1,...)")
        if with_truth_gen:
            p.add_argument("--truth", default="reference", choices=sorted(TRUTHS))
            p.add_argument("--n", type=int, default=2000, help="simulated sample size")
            p.add_argument("--seed", type=int, default=0)

    p_fit = sub.add_parser("fit", help="maximum partial likelihood fit")
    add_common(p_fit)
    p_fit.set_defaults(func=cmd_fit, input_required=True)

    p_br = sub.add_parser("breslow", help="baseline cumulative hazard curves")
    add_common(p_br)
    p_br.add_argument("--beta", default=None, help="skip fitting; comma-separated, '' for p=0")
    p_br.set_defaults(func=cmd_breslow, input_required=True)

    p_inf = sub.add_parser("influence", help="plug-in influence and variance curves")
    add_common(p_inf, with_truth_gen=True)
    p_inf.add_argument("--grid-points", type=int, default=128)
    p_inf.add_argument("--M", type=float, default=None)
    p_inf.add_argument("--write-xi", action="store_true")
    p_inf.set_defaults(func=cmd_influence)

    p_dec = sub.add_parser("decompose", help="linearization decomposition report")
    add_common(p_dec, with_truth_gen=True)
    p_dec.add_argument("--grid-points", type=int, default=128)
    p_dec.add_argument("--M", type=float, default=None)
    p_dec.set_defaults(func=cmd_decompose)

    p_lab = sub.add_parser("rate-lab", help="Monte Carlo rate experiments")
    p_lab.add_argument("--claim", choices=sorted(CLAIMS), default=None)
    p_lab.add_argument("--config", default=None, help="flat key=value config file")
    p_lab.add_argument("--truth", default=None, choices=sorted(TRUTHS))
    p_lab.add_argument("--n", default=None, help="comma-separated sample sizes")
    p_lab.add_argument("--reps", type=int, default=None)
    p_lab.add_argument("--a-n", dest="a_n", default=None)
    p_lab.add_argument("--seed", type=int, default=None)
    p_lab.add_argument("--grid-points", type=int, default=None)
    p_lab.add_argument("--phi-floor", type=float, default=None)
    p_lab.add_argument("--output-dir", default=None)
    p_lab.set_defaults(func=cmd_rate_lab)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "input_required", False) and not args.input:
        print("--input is required for this subcommand", file=sys.stderr)
        return EXIT_MODEL
    try:
        return args.func(args)
    except _CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except DataError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO
    except (FileNotFoundError, OSError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_MODEL


def entrypoint() -> None:
    sys.exit(main())
