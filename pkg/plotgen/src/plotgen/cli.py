"""Command line: render convergence or lattice figures from bench outputs."""

import argparse
import sys

from .figures import FigureSpec, render_convergence, render_lattice


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="plotgen",
        description="figures from bqce benchmark CSV and dump files")
    ap.add_argument("--in", dest="inputs", nargs="+", required=True,
                    help="input CSV (convergence) or dump file (lattice)")
    ap.add_argument("--out", required=True, help="output PNG path")
    ap.add_argument("--kind", choices=("convergence", "lattice"),
                    required=True)
    ap.add_argument("--title", default="")
    args = ap.parse_args(argv)
    if args.kind == "convergence":
        render_convergence(FigureSpec(csv_paths=list(args.inputs),
                                      out_path=args.out, title=args.title))
    else:
        if len(args.inputs) != 1:
            ap.error("lattice rendering takes exactly one dump file")
        render_lattice(args.inputs[0], args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
