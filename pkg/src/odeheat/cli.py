"""Command line front end: ``odeheat run-preset|run|sweep``."""

import argparse
import logging
import sys

from . import _kernels
from .experiments import PRESETS, ConfigError, run_config, run_preset


def _theta(s):
    v = float(s)
    if not 0.5 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"theta must lie in [0.5, 1], got {s}")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--adjoint", choices=("discrete", "continuous"), help="adjoint discretisation")
    common.add_argument("--theta", type=_theta, help="time scheme parameter (1 = implicit Euler, 0.5 = Crank-Nicolson)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="odeheat", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    rp = sub.add_parser("run-preset", parents=[common], help="run one of the built-in experiments")
    rp.add_argument("name", help=f"one of {', '.join(PRESETS)}")
    rc = sub.add_parser("run", parents=[common], help="run a JSON experiment config")
    rc.add_argument("config")
    sw = sub.add_parser("sweep", parents=[common], help="run a config over an explicit epsilon list")
    sw.add_argument("config")
    sw.add_argument("--epsilons", type=float, nargs="+", required=True)
    return p


def _print_rows(rows):
    print("epsilon,N_iter,norm_yT,abs_zT,norm_v")
    for r in rows:
        print(f"{r.epsilon:.6g},{r.N_iter},{r.norm_yT:.6g},{r.abs_zT:.6g},{r.norm_v:.6g}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger(__name__).info("kernel backend: %s", _kernels.BACKEND)
    try:
        if args.command == "run-preset":
            rows = run_preset(args.name, args.out, args.adjoint, args.theta)
        elif args.command == "run":
            rows = run_config(args.config, args.out, args.adjoint, args.theta)
        else:
            rows = run_config(args.config, args.out, args.adjoint, args.theta, args.epsilons)
    except (ConfigError, ValueError, ArithmeticError, OSError) as exc:
        print(f"odeheat: error: {exc}", file=sys.stderr)
        return 2
    _print_rows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
