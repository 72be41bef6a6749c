#!/usr/bin/env python3
"""Run the three convergence-rate experiments and write their artifacts.

Desk-scale defaults reproduce the acceptance-suite settings; pass smaller
sizes for a quick look.  Each claim writes rates.json plus per-n replication
CSVs into its own subdirectory of --output-dir.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from breslow_lab.cli import main as cli_main


def run(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", default="250,500,1000,2000,4000,8000")
    parser.add_argument("--reps", type=int, default=200)
    parser.add_argument("--seed", type=int, default=20260810)
    parser.add_argument("--output-dir", default="rate_lab_out")
    args = parser.parse_args(argv)

    out = Path(args.output_dir)
    for claim in ("lemma1", "lemma2", "theorem"):
        target = out / claim
        print(f"== {claim} -> {target}")
        code = cli_main([
            "rate-lab", "--claim", claim,
            "--n", args.n, "--reps", str(args.reps), "--seed", str(args.seed),
            "--output-dir", str(target),
        ])
        if code != 0:
            print(f"{claim} failed with exit code {code}", file=sys.stderr)
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
