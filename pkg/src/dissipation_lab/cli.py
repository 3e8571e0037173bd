"""Command line front end: ``disslab <subcommand> [flags]``.

Exit status is 0 only when every verdict passes, 1 when some verdict fails
and 2 on configuration or stage errors.
"""
import argparse
import json
import sys

from .errors import LabError, StageError
from .experiment import ExperimentConfig, run_experiment
from .scenarios import get_scenario, scenario_ids

SUBCOMMANDS = {
    "scan": "scan",
    "classify": "classify",
    "kernel-opt": "kernel-opt",
    "bv-check": "bv-check",
    "audit": "audit",
}


def _floats(text):
    return [float(v) for v in text.split(",")]


def _points(text):
    return [tuple(_floats(p)) for p in text.split(";") if p.strip()]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment configuration")
    common.add_argument("--scenario", metavar="ID")
    common.add_argument("--kernel", metavar="PROFILE",
                        help="family[:A=a,b,c,d|G=...;r=1;K=64;taper=0.1]")
    common.add_argument("--ladder", metavar="MAX,RATIO,COUNT")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--seed", type=int)
    common.add_argument("--format", choices=("csv", "text"))
    common.add_argument("--counts", type=lambda s: tuple(int(v) for v in s.split(",")),
                        metavar="N[,N]")
    common.add_argument("--resolution", type=int, help="kernel nodes per radius")

    ap = argparse.ArgumentParser(prog="disslab", description="Energy-flux laboratory for weak solutions.")
    sub = ap.add_subparsers(dest="command", required=True)
    s = sub.add_parser("scan", parents=[common], help="flux scans over a scale ladder")
    s.add_argument("--kinds", type=lambda t: tuple(t.split(",")), help="cet,dr,bd,energy")
    s.add_argument("--phi", action="append", metavar="JSON",
                   help='test function, e.g. \'{"kind":"bump","center":[1,0],"radius":0.3}\'')
    s.add_argument("--random-phi", type=int, dest="random_test_functions")
    c = sub.add_parser("classify", parents=[common], help="blow-up classification at points")
    c.add_argument("--points", type=_points, metavar="X,Y;X,Y")
    k = sub.add_parser("kernel-opt", parents=[common], help="minimise the anisotropy functional")
    k.add_argument("--M", type=_floats, metavar="m11,m12,m21,m22")
    k.add_argument("--budget", type=int)
    sub.add_parser("bv-check", parents=[common], help="exact chain-rule ledger")
    sub.add_parser("audit", parents=[common], help="scenario self-consistency checks")
    sub.add_parser("scenario-list", help="list registered scenarios")
    return ap


def _config(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    over = {
        "task": SUBCOMMANDS[args.command],
        "scenario": args.scenario,
        "kernel": args.kernel,
        "ladder": args.ladder,
        "out": args.out,
        "seed": args.seed,
        "format": args.format,
        "counts": args.counts,
        "resolution": args.resolution,
    }
    if args.command == "scan":
        over["kinds"] = args.kinds
        over["random_test_functions"] = args.random_test_functions
        if args.phi:
            over["test_functions"] = [json.loads(p) for p in args.phi]
    elif args.command == "classify":
        over["points"] = args.points
    elif args.command == "kernel-opt":
        if args.M is not None:
            n = int(round(len(args.M) ** 0.5))
            over["M"] = tuple(tuple(args.M[i * n:(i + 1) * n]) for i in range(n))
        over["budget"] = args.budget
    cfg = cfg.with_overrides(**over)
    cfg.__post_init__()
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "scenario-list":
        for sid in scenario_ids():
            sc = get_scenario(sid)
            print(f"{sid}\tdim={sc.dim}\tburgers={sc.burgers}\tjump_set={sc.jump_set}")
        return 0
    try:
        cfg = _config(args)
        bundle = run_experiment(cfg)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LabError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for v in bundle.verdicts:
        print(f"{'PASS' if v.passed else 'FAIL'} {v.name} measured={v.measured:.6g} "
              f"expected={v.expected:.6g} {v.detail}".rstrip())
    print(f"{sum(v.passed for v in bundle.verdicts)}/{len(bundle.verdicts)} verdicts passed")
    return 0 if bundle.passed else 1


if __name__ == "__main__":
    sys.exit(main())
