"""Command-line entry point: meshfig render."""

import argparse
import os
import sys

from .render import FigureSpec, render
from .schemas import KINDS, SchemaError


def build_parser():
    parser = argparse.ArgumentParser(
        prog="meshfig", description="Render figures from diagnostic reports")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render one figure from report CSVs")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="inputs", required=True, nargs="+",
                   help="input CSV file(s), one per variant")
    p.add_argument("--labels", nargs="*", default=None,
                   help="variant labels (default: input file stems)")
    p.add_argument("--out", required=True,
                   help="output path; extension optional")
    p.add_argument("--format", choices=("svg", "png", "both"), default="svg")
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0

    labels = args.labels
    if not labels:
        labels = [os.path.splitext(os.path.basename(p))[0]
                  for p in args.inputs]
    formats = ("svg", "png") if args.format == "both" else (args.format,)
    try:
        spec = FigureSpec(kind=args.kind, inputs=tuple(args.inputs),
                          labels=tuple(labels), out=args.out, formats=formats)
        written = render(spec)
    except (SchemaError, OSError) as exc:
        print(f"meshfig: error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
