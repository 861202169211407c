"""Command-line entry point.

Exit codes: 0 success; 1 output path exists and --force not given; 2 bad
arguments, unreadable input, or a curve file that breaks the schema.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .curves import CurveFormatError, load_curve
from .render import X_CHOICES, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot_tradeoff",
        description="Render a fairness-accuracy trade-off figure from sweep curve CSVs.",
    )
    parser.add_argument("--curves", nargs="+", required=True, metavar="CSV",
                        help="one or more curve files; one plotted series each")
    parser.add_argument("--x", choices=X_CHOICES, default="meo",
                        help="fairness column for the x axis")
    parser.add_argument("--out", required=True, help="image file to write")
    parser.add_argument("--svg", action="store_true",
                        help="write SVG instead of the default PNG")
    parser.add_argument("--force", action="store_true",
                        help="overwrite --out if it already exists")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    if out.exists() and not args.force:
        print(f"error: {out} exists; pass --force to overwrite", file=sys.stderr)
        return 1
    try:
        curves = [load_curve(path) for path in args.curves]
    except (CurveFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    render(curves, x_metric=args.x, out_path=str(out), svg=args.svg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
