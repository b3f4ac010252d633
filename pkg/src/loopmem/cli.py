"""Command-line front end.

    loopmem <simulate|decay|malus|tomo|budget|reproduce> \
        [--scenario path] [--preset name] [--seed n] [--out dir]

Either --scenario or --preset must identify the configuration; a scenario
file may itself extend a preset, and --seed overrides the file's seed.  The
output directory defaults to $LOOPMEM_OUT, then ./loopmem-out.  Module
errors are emitted as a JSON object on stderr with exit code 1.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import LoopMemError, SchemaError
from .scenario import PRESETS, load_scenario, resolve, run

OUT_ENV = "LOOPMEM_OUT"
SUBCOMMANDS = ("simulate", "decay", "malus", "tomo", "budget", "reproduce")
FIGURES = ("fig2c", "fig3", "fig4")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loopmem",
        description="Polarization loop-memory simulation and analysis pipelines.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    descriptions = {
        "simulate": "storage event tables for each input state and cycle count",
        "decay": "cycle-count scan, per-cycle survival fit, closed-form table",
        "malus": "analyzer fringe scan and visibility fit per input state",
        "tomo": "projective counts, state reconstruction, Monte Carlo errors",
        "budget": "loss budget: per-cycle efficiency, lifetime, eta table",
        "reproduce": "bundled pipelines emitting plot-ready tables",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=descriptions[name])
        if name == "reproduce":
            p.add_argument("figure", choices=FIGURES,
                           help="which bundled pipeline to run")
        p.add_argument("--scenario", help="path to a scenario JSON file")
        p.add_argument("--preset", help=f"named preset: {', '.join(sorted(PRESETS))}")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./loopmem-out)")
    return parser


def _resolve_scenario(args):
    if args.scenario:
        scenario = load_scenario(args.scenario)
        raw = scenario.raw
        if args.preset:
            raw = dict(raw, preset=args.preset)
    elif args.preset:
        raw = {"preset": args.preset}
    else:
        raise SchemaError("provide --scenario and/or --preset", field="(args)")
    if args.seed is not None:
        if args.seed < 0:
            raise SchemaError("seed must be nonnegative", field="(args).seed")
        raw = dict(raw, seed=args.seed)
    return resolve(raw)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out_dir = args.out or os.environ.get(OUT_ENV) or "./loopmem-out"
    try:
        scenario = _resolve_scenario(args)
        summary, written = run(scenario, args.subcommand, out_dir,
                               figure=getattr(args, "figure", None))
    except LoopMemError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        field = getattr(exc, "field", "")
        if field:
            payload["field"] = field
        print(json.dumps(payload), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc)}), file=sys.stderr)
        return 1

    for path in written:
        print(f"wrote {path}")
    print(json.dumps({"scenario": scenario.label,
                      "hash": scenario.content_hash()[:16],
                      "seed": scenario.seed,
                      "summary": summary}, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
