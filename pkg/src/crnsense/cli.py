"""Command-line experiment runner.

    crnsense SUBCOMMAND [--config PRESET_OR_PATH] [--set KEY=VALUE ...] [--out DIR] [--seed N]

Each subcommand writes versioned CSV files (first line ``# schema=v1``) into
``--out``. Exit status: 0 success, 2 invalid configuration, 3 numerical
failure, 1 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from . import experiments as ex
from .config import load_config, list_presets
from .core import NumericalError, ParameterError

log = logging.getLogger("crnsense")

SCHEMA = "# schema=v1"

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.10g}"
    return str(v)


def write_csv(path: Path, rows: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(SCHEMA + "\n")
        if rows:
            w = csv.writer(fh, lineterminator="\n")
            cols = list(rows[0])
            w.writerow(cols)
            for r in rows:
                w.writerow([_fmt(r[c]) for c in cols])
    return path


def write_jsonl(path: Path, diags) -> Path:
    with path.open("w") as fh:
        for d in diags:
            fh.write(d.to_json() + "\n")
    return path


def _cluster_bench(cfg, args):
    rows = ex.run_cluster_bench(cfg, args.seed)
    return {"cluster_bench.csv": rows}, {}


def _threshold_sweep(cfg, args):
    rows, diags = ex.run_threshold_sweep(cfg, args.seed)
    return {"threshold_sweep.csv": rows}, {"optimizer.jsonl": diags}


def _power_sweep(cfg, args):
    rows, diags = ex.run_power_sweep(cfg, args.seed)
    return {"power_sweep.csv": rows}, {"optimizer.jsonl": diags}


def _mdp_check(cfg, args):
    rows, mats = ex.run_mdp_check(cfg, args.seed)
    if cfg.settings.dump_matrix:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for label, U in mats.items():
            U.dump(out / f"transition_{label}.csv")
    return {"mdp_check.csv": rows}, {}


def _full_pipeline(cfg, args):
    rows, diags = ex.run_full_pipeline(cfg, args.seed)
    return {"full_pipeline.csv": rows}, {"optimizer.jsonl": diags}


COMMANDS = {
    "cluster-bench": (_cluster_bench, "clustering accuracy and run time versus number of points"),
    "threshold-sweep": (_threshold_sweep, "model and simulated capacity versus detection threshold"),
    "power-sweep": (_power_sweep, "optimised capacity versus SU transmit power"),
    "mdp-check": (_mdp_check, "closed-form versus numerical battery steady state"),
    "full-pipeline": (_full_pipeline, "traces -> clustering -> channel selection -> optimisation -> simulation"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crnsense", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", default="table2",
                       help=f"preset name ({', '.join(list_presets())}) or path to a .cfg file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, default=0, help="base random seed (default: 0)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    run, _ = COMMANDS[args.command]
    try:
        cfg = load_config(args.config, args.overrides)
        log.info("running %s with config %s", args.command, args.config)
        tables, jsonl = run(cfg, args)
        out = Path(args.out)
        for fname, rows in tables.items():
            path = write_csv(out / fname, rows)
            print(f"wrote {path} ({len(rows)} rows)")
        for fname, diags in jsonl.items():
            print(f"wrote {write_jsonl(out / fname, diags)}")
    except ParameterError as exc:
        print(f"crnsense: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"crnsense: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"crnsense: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"crnsense: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
