"""Command line entry points.

Five subcommands cover the pipeline: ``simulate`` writes the configured
synthetic draw to CSV, ``bound`` solves the configured experiments on the
full sample and prints the intervals, ``experiment`` runs the whole grid
with bootstrap replicates and writes results.csv/results.json plus fig.svg,
``dro`` prints calibrated radii and DRO intervals, and ``plot`` renders an
existing results.json. Command line flags override the matching config
fields; ``experiment`` requires an explicit --seed so runs are reproducible
by construction. Any package error exits with status 1 and a one-line
message on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import dgp
from .data import DISCRETE
from .errors import ConfigSchemaError, ShiftboundError
from .experiment import dro_report, full_sample_bounds, run_experiment
from .svgplot import emit_plot


def _load_config(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write_dataset_csv(ds, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([c.name for c in ds.columns])
        discrete = [c.kind == DISCRETE for c in ds.columns]
        for row in ds.values:
            writer.writerow(
                [
                    int(v) if d else format(v, ".12g")
                    for v, d in zip(row, discrete)
                ]
            )


def _print(doc):
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _cmd_simulate(args):
    config = _load_config(args.config)
    ds_block = config.get("dataset", {})
    if ds_block.get("type") != "synthetic":
        raise ConfigSchemaError("simulate needs a synthetic dataset block")
    n = args.n if args.n is not None else ds_block.get("n")
    seed = args.seed if args.seed is not None else ds_block.get("seed")
    if n is None or seed is None:
        raise ConfigSchemaError("simulate needs n and seed (config or flags)")
    pmf = tuple(ds_block.get("x1_pmf", dgp.X1_PMF))
    full, observed = dgp.simulate_synthetic(int(n), int(seed), x1_pmf=pmf)
    os.makedirs(args.out, exist_ok=True)
    _write_dataset_csv(full, os.path.join(args.out, "full.csv"))
    _write_dataset_csv(observed, os.path.join(args.out, "observed.csv"))
    _print({"out": args.out, "n": int(n), "seed": int(seed)})


def _cmd_bound(args):
    config = _load_config(args.config)
    if args.seed is not None:
        config.setdefault("dataset", {})["seed"] = args.seed
    _print(full_sample_bounds(config))


def _cmd_experiment(args):
    config = _load_config(args.config)
    config.setdefault("dataset", {})["seed"] = args.seed
    if args.replicates is not None:
        config.setdefault("bootstrap", {})["b"] = args.replicates
    out_dir = args.out or config.get("output")
    if not out_dir:
        raise ConfigSchemaError("experiment needs --out or config output dir")
    bundle = run_experiment(config, out_dir=out_dir)
    emit_plot(bundle, os.path.join(out_dir, "fig.svg"))
    _print(
        {
            "out": out_dir,
            "experiments": bundle.experiments,
            "rows": len(bundle.rows),
        }
    )


def _cmd_dro(args):
    config = _load_config(args.config)
    if args.seed is not None:
        config.setdefault("dataset", {})["seed"] = args.seed
    _print(dro_report(config, mode=args.mode))


def _cmd_plot(args):
    with open(args.results, encoding="utf-8") as fh:
        doc = json.load(fh)
    emit_plot(doc, args.out)
    _print({"out": args.out})


def build_parser():
    parser = argparse.ArgumentParser(
        prog="shiftbound",
        description="Partial identification under distribution shift",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write the configured synthetic draw")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("bound", help="full-sample bounds per experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=_cmd_bound)

    p = sub.add_parser("experiment", help="run the grid with bootstrap")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--replicates", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser("dro", help="DRO radii and intervals per experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=("observable", "omniscient", "both"))
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=_cmd_dro)

    p = sub.add_parser("plot", help="render results.json to SVG")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except ShiftboundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
