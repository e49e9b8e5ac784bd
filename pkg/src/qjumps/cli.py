"""Command line front end.

qjumps run  (--scenario NAME | CONFIG.json) [--out DIR] [overrides]
qjumps compare DIR_A DIR_B [--out FILE]
qjumps scenarios

Exit codes: 0 success, 2 configuration problem, 3 numerical guard tripped.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qjumps",
                                description="jump unravelings on a discretized "
                                            "structured bath")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write a bundle")
    r.add_argument("config", nargs="?", default=None,
                   help="path to a JSON scenario config")
    r.add_argument("--scenario", default=None,
                   help="builtin scenario name (fig1..fig6)")
    r.add_argument("--out", default=None, help="bundle directory "
                   "(default: <name>_bundle)")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--trajectories", type=int, default=None)
    r.add_argument("--modes", type=int, default=None,
                   help="override the bath mode count")
    r.add_argument("--dt", type=float, default=None)
    r.add_argument("--t-max", type=float, default=None)
    r.add_argument("--stride", type=int, default=None)
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--engines", default=None,
                   help="comma separated subset of total,gaw,nmqj")

    c = sub.add_parser("compare", help="compare two bundles")
    c.add_argument("dir_a")
    c.add_argument("dir_b")
    c.add_argument("--out", default=None, help="write the comparison JSON here "
                   "instead of stdout")

    sub.add_parser("scenarios", help="list builtin scenarios")
    return p


def _run(args) -> int:
    if (args.config is None) == (args.scenario is None):
        print("run needs exactly one of CONFIG.json or --scenario NAME",
              file=sys.stderr)
        return 2
    overrides = {}
    for key, attr in (("seed", "seed"), ("trajectories", "trajectories"),
                      ("dt", "dt"), ("t_max", "t_max"), ("stride", "stride"),
                      ("workers", "workers")):
        val = getattr(args, attr)
        if val is not None:
            overrides[key] = val
    if args.modes is not None:
        overrides["bath_n_modes"] = args.modes
    if args.engines is not None:
        overrides["engines"] = tuple(e.strip() for e in args.engines.split(",")
                                     if e.strip())
    sc = harness.load_scenario(args.config if args.config else args.scenario,
                               **overrides)
    outdir = args.out if args.out else f"{sc.name}_bundle"
    summary = harness.run(sc, outdir)
    drift = (summary.get("integration", {}).get("max_norm_drift")
             if "integration" in summary else None)
    print(f"wrote {outdir} (scenario {sc.name}, system {sc.system})")
    if drift is not None:
        print(f"max norm drift {drift:.3e}")
    return 0


def _compare(args) -> int:
    result = harness.compare(args.dir_a, args.dir_b)
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _scenarios() -> int:
    for name, sc in harness.builtin_scenarios().items():
        b = sc.bath
        det = ",".join(f"{d:g}" for d in b.detunings)
        print(f"{name}: system={sc.system} gamma0={b.gamma0:g} "
              f"detunings=({det}) n_modes={b.n_modes} engines={','.join(sc.engines)} "
              f"seed={sc.seed}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "compare":
            return _compare(args)
        return _scenarios()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
