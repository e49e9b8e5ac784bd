"""Command line front end.

qjfig render --figure figN --bundle DIR --out FILE.png [--dpi D]
qjfig list

Exit codes: 0 success, 2 unusable arguments or bundle.
"""

from __future__ import annotations

import argparse
import sys

from . import render
from .recipes import FIGURES


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qjfig",
                                description="render figures from qjumps "
                                            "result bundles")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("render", help="draw one figure as a PNG")
    r.add_argument("--figure", required=True,
                   help=f"one of {', '.join(sorted(FIGURES))}")
    r.add_argument("--bundle", required=True, help="bundle directory")
    r.add_argument("--out", required=True, help="output PNG path")
    r.add_argument("--dpi", type=int, default=150)

    sub.add_parser("list", help="list figures and the files they consume")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list":
        for name, rec in FIGURES.items():
            print(f"{name}: {rec.panels} [{', '.join(sorted(rec.requires))}]")
        return 0
    try:
        digest = render(args.figure, args.bundle, args.out, dpi=args.dpi)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} (input_sha256 {digest})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
