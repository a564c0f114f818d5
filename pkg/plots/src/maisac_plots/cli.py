"""Command line for turning a sweep CSV into figures."""

from __future__ import annotations

import argparse
import sys

from .render import FIGURE_KINDS, PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maisac-plot",
                                     description="Render sweep-result figures from a CSV")
    parser.add_argument("--csv", required=True, help="results CSV from the simulator")
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    parser.add_argument("--out", required=True, help="output image path (e.g. fig.svg)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    render(PlotSpec(csv_path=args.csv, kind=args.kind, out_path=args.out))
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
