"""plotview map|policy <csv> <problem.json> [-j N] -o out.png"""

from __future__ import annotations

import argparse
import sys

from .records import PlotviewError, read_policy, read_problem, read_subdomains
from .render import render_map, render_policy


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotview", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_map = sub.add_parser("map", help="case-colored subdomain map with the h = 0 contour")
    p_map.add_argument("csv", help="subdomain CSV from `dtcbf verify --dump-subdomains`")
    p_map.add_argument("problem", help="the problem JSON the dump came from")
    p_map.add_argument("-o", "--out", required=True, help="output image path")

    p_pol = sub.add_parser("policy", help="heatmap of one input component")
    p_pol.add_argument("csv", help="policy CSV from `dtcbf verify --dump-policy`")
    p_pol.add_argument("problem", help="the problem JSON the dump came from")
    p_pol.add_argument("-j", type=int, default=1, help="input component (1-based)")
    p_pol.add_argument("-o", "--out", required=True, help="output image path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        problem = read_problem(args.problem)
        if args.command == "map":
            render_map(read_subdomains(args.csv), problem, out=args.out)
        else:
            render_policy(read_policy(args.csv), problem, j=args.j, out=args.out)
    except PlotviewError as exc:
        print(f"plotview: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
