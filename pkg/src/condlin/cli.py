"""Command-line experiment runner.

Usage:

    condlin <experiment> --method strang --h 0.01 [--out DIR] [...]
    condlin all [--out DIR]

Experiments: vdp-nonstiff, vdp-stiff, vdp-convergence, vdp-jumps, hh,
hh-reduced, integrate; ``all`` runs the complete reproduction matrix.
The default output directory comes from $CONDLIN_OUT (falling back to the
current directory).  Exit codes: 0 success, 1 usage error, 2 experiment
failure.  A diverged run is a *result* (reported as stable=false in the
summary CSV), not a failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .experiments import EXPERIMENTS, ExperimentSpec, SpecError, run, run_all


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; this tool reserves 2 for
    # experiment failures and uses 1 for usage problems.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_out() -> str:
    return os.environ.get("CONDLIN_OUT", ".")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="condlin",
                     description="structure-preserving integrator experiments")
    sub = parser.add_subparsers(dest="experiment", required=True)

    def add_common(p):
        p.add_argument("--method", help="integration method id")
        p.add_argument("--h", type=float, dest="h", help="time step size")
        p.add_argument("--t-end", type=float, default=None, dest="t_end")
        p.add_argument("--out", default=_default_out(), help="output directory")
        p.add_argument("--stride", type=int, default=0,
                       help="record every N-th state (0 = automatic)")
        p.add_argument("--traj", action=argparse.BooleanOptionalAction, default=True,
                       help="write the trajectory CSV")

    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        add_common(p)
        if name.startswith("vdp") or name == "integrate":
            p.add_argument("--epsilon", type=float,
                           default=50.0 if name in ("vdp-stiff", "vdp-jumps") else 0.05)
        if name.startswith("hh") or name == "integrate":
            p.add_argument("--i-on", type=float, default=10.0, dest="i_on")
            p.add_argument("--t-on", type=float, default=50.0, dest="t_on")
            p.add_argument("--t-off", type=float, default=150.0, dest="t_off")
        if name == "integrate":
            p.add_argument("--model", choices=("vdp", "hh"), default="vdp")

    p = sub.add_parser("all", help="run the full reproduction matrix")
    p.add_argument("--out", default=_default_out(), help="output directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1

    if args.experiment == "all":
        try:
            failures = run_all(args.out)
        except Exception as exc:
            print(f"condlin: run-all failed: {exc}", file=sys.stderr)
            return 2
        for f in failures:
            print(f"condlin: FAILED {f}", file=sys.stderr)
        return 2 if failures else 0

    fields = {k: v for k, v in vars(args).items()
              if k in ExperimentSpec.__dataclass_fields__ and v is not None}
    spec = ExperimentSpec(**fields)
    try:
        spec.validate()
    except SpecError as exc:
        print(f"condlin: {exc}", file=sys.stderr)
        return 1
    try:
        run(spec)
    except OSError as exc:
        print(f"condlin: cannot write output: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"condlin: experiment failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
