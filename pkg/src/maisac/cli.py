"""Command-line entry points: Monte-Carlo sweeps and verification suites."""

from __future__ import annotations

import argparse
import logging
import sys

from .checks import SUITES, run_suite
from .harness import load_plan_file, print_summary, run_sweep


def parse_axis(text: str) -> list[float]:
    """Parse 'start:step:stop' (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"expected start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise argparse.ArgumentTypeError("step must be positive")
        out = []
        v = start
        while v <= stop + 1e-9:
            out.append(round(v, 10))
            v += step
        return out
    return [float(p) for p in text.split(",") if p]


def parse_divisions(text: str) -> list[tuple[int, int]]:
    """Parse '2x2,4x1' into division tuples."""
    out = []
    for token in text.split(","):
        a, _, b = token.partition("x")
        out.append((int(a), int(b)))
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maisac",
                                     description="Movable-antenna near-field ISAC simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte-Carlo sweep and write a CSV")
    sim.add_argument("--config", default=None, help="JSON file overriding the preset")
    sim.add_argument("--preset", default="desk", choices=("desk", "paper"))
    sim.add_argument("--methods", default="nomp_lsrc,omp_lsrc,omp2d,omp3d",
                     help="comma-separated method names")
    sim.add_argument("--snr", default=None, help="SNR axis in dB: 'start:step:stop' or list")
    sim.add_argument("--nt", default=None, help="slots-per-frame axis, comma-separated")
    sim.add_argument("--kc", default=None, help="pilot-subcarrier axis, comma-separated")
    sim.add_argument("--divisions", default=None, help="subregion divisions, e.g. '2x2,4x1'")
    sim.add_argument("--trials", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", default=None)
    sim.add_argument("--jobs", type=int, default=1)
    sim.add_argument("--fresh", action="store_true", help="ignore an existing output file")

    chk = sub.add_parser("check", help="run a verification suite")
    chk.add_argument("--suite", required=True, choices=sorted(SUITES))

    summ = sub.add_parser("summary", help="print per-point means of an existing CSV")
    summ.add_argument("csv")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)

    if args.command == "check":
        return 0 if run_suite(args.suite) else 1

    if args.command == "summary":
        print_summary(args.csv)
        return 0

    plan = load_plan_file(args.config, preset=args.preset)
    overrides = {}
    if args.snr is not None:
        overrides["snr_db_list"] = tuple(parse_axis(args.snr))
    if args.nt is not None:
        overrides["nt_list"] = tuple(int(v) for v in parse_axis(args.nt))
    if args.kc is not None:
        overrides["kc_list"] = tuple(int(v) for v in parse_axis(args.kc))
    if args.divisions is not None:
        overrides["division_list"] = tuple(parse_divisions(args.divisions))
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["out_path"] = args.out
    if args.methods:
        overrides["methods"] = tuple(m for m in args.methods.split(",") if m)
    if overrides:
        from dataclasses import replace

        plan = replace(plan, **overrides)
    out = run_sweep(plan, jobs=args.jobs, resume=not args.fresh)
    print_summary(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
