"""Command-line entry point: ``kakf run|validate|selftest``."""

import argparse
import sys

from .errors import ConfigError, InvalidDims
from .harness import load_config, run_campaign
from .selftest import run_selftest


def _overrides(args):
    return {
        "master_seed": args.seed,
        "n_trials": args.trials,
        "output_path": args.out,
        "receivers": args.receivers,
        "noiseless_mode": True if args.noiseless else None,
        "workers": args.workers,
    }


def _cmd_run(args):
    cfg = load_config(args.config, **_overrides(args))
    result = run_campaign(cfg)
    print(f"wrote {cfg.output_path}")
    for row in result.table:
        print(
            f"snr={row['snr_db']:>6} {row['receiver']:<5} "
            f"nmse_h={row['nmse_h_mean']:.3e} nmse_g={row['nmse_g_mean']:.3e} "
            f"ser={row['ser_mean']:.3e} ok={row['n_trials_ok']} failed={row['n_trials_failed']}"
        )
    return 0


def _cmd_validate(args):
    cfg = load_config(args.config, **_overrides(args))
    d = cfg.dims
    print(f"P = {d.p}")
    print(f"K = {d.k_blocks}")
    print(f"rho = {d.rate:.6g}")
    print("OK: K >= P")
    return 0


def _cmd_selftest(args):
    return 0 if run_selftest(seed=args.seed or 0) else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="kakf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--trials", type=int, default=None, help="Monte Carlo trials per SNR point")
        p.add_argument("--out", default=None, help="output CSV path (JSON summary goes next to it)")
        p.add_argument("--receivers", default=None, help="comma-separated subset of kakf,bals")
        p.add_argument("--noiseless", action="store_true", help="skip noise; single SNR point at +inf")
        p.add_argument("--workers", type=int, default=None, help="process pool size")

    p_run = sub.add_parser("run", help="run a Monte Carlo campaign")
    p_run.add_argument("config")
    common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="check a config and print P, K and the rate")
    p_val.add_argument("config")
    common(p_val)
    p_val.set_defaults(func=_cmd_validate)

    p_self = sub.add_parser("selftest", help="run the built-in property checks on desk dimensions")
    common(p_self)
    p_self.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidDims) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
