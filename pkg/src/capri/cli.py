"""Command line entry point: ``capri {run,audit,compare} --config PATH``."""

import argparse
import dataclasses
import sys

from . import config as config_mod
from . import harness
from .errors import ConfigError

EXIT_CONFIG = 2
EXIT_AUDIT = 3


def _parser():
    p = argparse.ArgumentParser(prog="capri", description="Private contextual kernel bandit simulator")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("run", "run every seed and write regret CSVs"),
        ("audit", "empirical sensitivity and noise-calibration audit"),
        ("compare", "uniform / non-private / JDP / LDP comparison"),
    ]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", default=None, help="output directory (defaults to the config's output)")
        sp.add_argument("--seed-override", type=int, default=None, help="run this single seed instead")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = config_mod.load(args.config)
        if args.seed_override is not None:
            cfg = dataclasses.replace(cfg, seeds=[args.seed_override])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "run":
        report = harness.run_experiment(cfg, args.out)
        print(f"mean final regret {report.mean_curve[-1]:.4f} over {len(cfg.seeds)} seed(s)")
        return 0
    if args.command == "audit":
        rep = harness.privacy_audit(cfg, args.out)
        print(f"epochs audited {len(rep.rows)}; max ratio {rep.max_ratio:.12f}; "
              f"sigma0 mismatches {rep.sigma0_mismatches}")
        if not rep.ok:
            print("audit violation", file=sys.stderr)
            return EXIT_AUDIT
        return 0
    reports = harness.compare_baselines(cfg, args.out)
    for name, rep in reports.items():
        print(f"{name:>10}: mean final regret {rep.mean_curve[-1]:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
