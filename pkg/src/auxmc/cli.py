"""Command-line entry point.

Subcommands: run, tune, theory, ess, ingest-mnist.  Exit codes: 0 success,
1 config error, 2 data error, 3 check failure.  The AUXMC_OUTDIR environment
variable supplies the default output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .core import RngStream
from .diagnostics import ZeroVarianceError, ess, tune_step_size
from .harness import (
    ConfigError,
    DataFormatError,
    build_model,
    ingest_mnist,
    load_config,
    make_step_factory,
    run_experiment,
    theory_check,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_CHECK = 3


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def _out_dir(args) -> str | None:
    return args.out or os.environ.get("AUXMC_OUTDIR")


def cmd_run(args) -> int:
    overrides = dict(_parse_override(s) for s in args.set or [])
    cfg = load_config(args.config, overrides)
    out = _out_dir(args) or cfg.out_dir
    if cfg.experiment == "theory":
        return cmd_theory(args)
    result = run_experiment(cfg, out)
    print(f"wrote {result['paths']['steps']}")
    print(f"wrote {result['paths']['ess']}")
    print(f"wrote {result['paths']['meta']}")
    return EXIT_OK


def cmd_tune(args) -> int:
    overrides = dict(_parse_override(s) for s in args.set or [])
    cfg = load_config(args.config, overrides)
    model, _ = build_model(cfg)
    factory = make_step_factory(args.sampler, cfg, model)
    rng = RngStream(cfg.seed, 4)
    theta0 = np.zeros(model.d) if cfg.experiment != "exchange_toy" else np.atleast_1d(
        model.theta_grid[0]
    )
    res = tune_step_size(factory, theta0, args.rate, rng)
    print(
        f"sampler={args.sampler} target={args.rate} step_size={res.step_size:.6g} "
        f"achieved={res.achieved_rate:.3f} pilot_iterations={res.pilot_iterations} "
        f"converged={res.converged}"
    )
    return EXIT_OK if res.converged else EXIT_CHECK


def cmd_theory(args) -> int:
    out = _out_dir(args)
    records, ok = theory_check(out)
    width = max(len(r.name) for r in records)
    for r in records:
        flag = "PASS" if r.passed else "FAIL"
        print(f"{flag}  {r.name:<{width}}  value={r.value:.6e}  bound={r.bound:.6e}")
    print(f"{sum(r.passed for r in records)}/{len(records)} checks passed")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_ess(args) -> int:
    try:
        data = np.genfromtxt(args.trace, delimiter=",", names=True)
    except OSError as exc:
        print(f"error: cannot read {args.trace}: {exc}", file=sys.stderr)
        return EXIT_DATA
    names = data.dtype.names
    if names is None:
        print("error: trace CSV needs a header row", file=sys.stderr)
        return EXIT_DATA
    values = []
    n = data.shape[0]
    burn = int(args.burn_in * n)
    for name in names:
        col = np.asarray(data[name], dtype=float)[burn:]
        try:
            e = ess(col)
        except (ZeroVarianceError, ValueError) as exc:
            print(f"{name}: undefined ({exc})")
            continue
        values.append(e)
        print(f"{name}: ESS = {e:.1f}")
    if values:
        arr = np.array(values)
        print(
            f"summary: min={arr.min():.1f} median={np.median(arr):.1f} max={arr.max():.1f}"
            f" (n={n}, burn-in {burn})"
        )
    return EXIT_OK


def cmd_ingest_mnist(args) -> int:
    digits = tuple(int(x) for x in args.digits.split(","))
    if len(digits) != 2:
        print("error: --digits expects a pair like 3,5", file=sys.stderr)
        return EXIT_CONFIG
    data = ingest_mnist(
        args.train_images, args.train_labels, args.test_images, args.test_labels,
        digits=digits, n_components=args.components,
    )
    np.savez(
        args.out_file,
        x_train=data.x_train, y_train=data.y_train,
        x_test=data.x_test, y_test=data.y_test,
    )
    print(
        f"digits {digits}: train {data.n_train} / test {data.n_test} samples, "
        f"{args.components} components -> {args.out_file}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="auxmc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (default AUXMC_OUTDIR or config)")
    run.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a top-level config scalar")
    run.set_defaults(fn=cmd_run)

    tune = sub.add_parser("tune", help="tune one sampler's step size")
    tune.add_argument("config")
    tune.add_argument("--sampler", required=True)
    tune.add_argument("--rate", type=float, required=True)
    tune.add_argument("--set", action="append", metavar="KEY=VALUE")
    tune.add_argument("--out")
    tune.set_defaults(fn=cmd_tune)

    theory = sub.add_parser("theory", help="run the exact-kernel verification suite")
    theory.add_argument("--out", help="also write theory_report.csv here")
    theory.set_defaults(fn=cmd_theory)

    eparser = sub.add_parser("ess", help="effective sample size of a sample CSV")
    eparser.add_argument("trace")
    eparser.add_argument("--burn-in", type=float, default=0.1)
    eparser.set_defaults(fn=cmd_ess)

    mi = sub.add_parser("ingest-mnist", help="IDX -> centered PCA covariates")
    mi.add_argument("--train-images", required=True)
    mi.add_argument("--train-labels", required=True)
    mi.add_argument("--test-images", required=True)
    mi.add_argument("--test-labels", required=True)
    mi.add_argument("--digits", default="3,5")
    mi.add_argument("--components", type=int, default=50)
    mi.add_argument("--out-file", default="mnist_pca.npz")
    mi.set_defaults(fn=cmd_ingest_mnist)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
