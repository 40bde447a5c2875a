#!/usr/bin/env python3
"""Run the bundled change-of-variable verification suite and print a table.

Usage: python3 scripts/run_ito_suite.py [--out OUT] [--jobs K]
"""

import argparse
import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from planarough.cli import main as cli_main  # noqa: E402

CONFIG = os.path.join(os.path.dirname(__file__), "..", "configs", "ito-suite.json")


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/ito-suite")
    ap.add_argument("--jobs", type=int, default=4)
    args = ap.parse_args()

    code = cli_main(
        ["ito", "--config", CONFIG, "--out", args.out, "--jobs", str(args.jobs)]
    )

    print()
    print(f"{'experiment':<22} {'theorem':<12} {'finest residual':>16} {'slope':>8}")
    with open(os.path.join(args.out, "summary.json"), encoding="utf-8") as fh:
        summary = json.load(fh)
    for row in summary["experiments"]:
        path = os.path.join(args.out, row["name"], row.get("report", ""))
        if not row.get("report") or not os.path.exists(path):
            print(f"{row['name']:<22} {'—':<12} {row.get('error', 'no report')}")
            continue
        with open(path, encoding="utf-8") as fh:
            rep = json.load(fh)
        slope = "conv" if rep["slope_is_converged_sentinel"] else f"{rep['slope']:.2f}"
        print(
            f"{row['name']:<22} {rep['theorem']:<12} "
            f"{rep['finest_residual']:>16.3e} {slope:>8}"
        )
    return code


if __name__ == "__main__":
    sys.exit(main())
