"""Command-line pipeline driver.

Verbs: simulate, noise, scan, invert, export, pipeline.  Exit codes:
0 success, 1 configuration error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigurationError, ConvexwaveError, DegenerateDataError, SolverError
from .pipeline import run_export, run_invert, run_noise, run_pipeline, run_scan, run_simulate


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="convexwave", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir)")

    p = sub.add_parser("simulate", help="solve the forward problem and write measured data")
    add_common(p)
    p.add_argument("--resume", action="store_true")

    p = sub.add_parser("noise", help="add relative noise to a measured-data container")
    add_common(p)
    p.add_argument("--data", default=None, help="input container (default <out>/f)")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--force", action="store_true", help="accept containers from other configs")

    p = sub.add_parser("scan", help="depth scan M(a) of the measured data")
    add_common(p)
    p.add_argument("--data", default=None)
    p.add_argument("--out-file", default=None, help="CSV path (default <out>/scan.csv)")
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("invert", help="reconstruct the dielectric constant")
    add_common(p)
    p.add_argument("--data", default=None, help="input container (default <out>/f_noisy)")
    p.add_argument("--resume", action="store_true", help="reuse persisted intermediates")
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("export", help="export a container for visualization")
    p.add_argument("--container", required=True)
    p.add_argument("--format", required=True, choices=["vtk", "csv"])
    p.add_argument("--slice", default=None, help="slice spec for CSV, e.g. z=0.0")
    p.add_argument("--out-file", required=True)

    p = sub.add_parser("pipeline", help="all stages: simulate, noise, scan, invert, export")
    add_common(p)
    p.add_argument("--resume", action="store_true")
    return parser


def _outdir(cfg, args) -> Path:
    out = Path(args.out) if args.out else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        if args.command == "export":
            run_export(args.container, args.format, args.out_file, args.slice)
            return 0
        cfg = load_config(args.config, seed_override=args.seed, out_override=args.out)
        out = _outdir(cfg, args)
        if args.command == "simulate":
            run_simulate(cfg, out, resume=args.resume)
        elif args.command == "noise":
            run_noise(cfg, out, data=args.data, resume=args.resume, force=args.force)
        elif args.command == "scan":
            _, a_best = run_scan(cfg, out, data=args.data, out_file=args.out_file, force=args.force)
            print(f"argmax depth a0 = {a_best:g}")
        elif args.command == "invert":
            doc = run_invert(cfg, out, data=args.data, resume=args.resume, force=args.force)
            print(f"c_comp = {doc['c_comp']:.4f} at {tuple(doc['location'])}")
        elif args.command == "pipeline":
            doc = run_pipeline(cfg, out, resume=args.resume)
            print(f"c_comp = {doc['c_comp']:.4f} at {tuple(doc['location'])}")
        return 0
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, DegenerateDataError, ConvexwaveError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
