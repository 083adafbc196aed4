"""CLI: auxmc-plot mse|acc|ess --config fig.json."""

from __future__ import annotations

import argparse
import json
import sys

from .figures import FigureSpec, SchemaError, plot_accuracy_panels, plot_mse_panels
from .tables import table_ess


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="auxmc-plot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("mse", "MSE panel grid from per-step CSVs"),
        ("acc", "holdout-accuracy panels from per-step CSVs"),
        ("ess", "ESS summary table from summary CSVs"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="figure-spec JSON")

    args = parser.parse_args(argv)
    try:
        if args.command == "ess":
            with open(args.config) as fh:
                raw = json.load(fh)
            text, _, _ = table_ess(
                raw["inputs"], raw.get("output", "ess_table"),
                per_second=raw.get("per_second", True),
            )
            print(text)
        else:
            spec = FigureSpec.from_json(args.config)
            plotter = plot_mse_panels if args.command == "mse" else plot_accuracy_panels
            for path in plotter(spec):
                print(f"wrote {path}")
    except (SchemaError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
