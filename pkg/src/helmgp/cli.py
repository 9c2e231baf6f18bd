"""Command-line front end.

Subcommands ``simulate``, ``ingest``, ``fit``, ``predict`` and ``run`` each
take ``--config`` (or ``--preset``) and ``--out``.  Exit codes: 0 success,
2 configuration error, 3 data error, 4 numerical failure.
"""
import argparse
import logging
import sys

from . import config as hconfig
from .errors import ConfigError, HelmGPError
from .experiments import run

STAGES = {
    "simulate": ("data",),
    "ingest": ("data",),
    "fit": ("data", "fit"),
    "predict": ("data", "predict"),
    "run": ("data", "fit", "predict"),
}


def _parser():
    p = argparse.ArgumentParser(prog="helmgp", description=__doc__.split("\n")[0])
    p.add_argument("--benchmark-cost", nargs=2, type=int, metavar=("M", "N"),
                   help="time Helmholtz vs velocity posteriors at M observations, N test points")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")
    for name in STAGES:
        s = sub.add_parser(name)
        src = s.add_mutually_exclusive_group()
        src.add_argument("--config", help="key = value config file")
        src.add_argument("--preset", choices=hconfig.PRESETS)
        s.add_argument("--out", help="output directory (overrides 'out' in the config)")
        s.add_argument("--family", choices=("helmholtz", "velocity", "both"))
        s.add_argument("--pin-hyperparams", action="store_true",
                       help="use the configured hyperparameters without fitting")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
    return p


def _load(args):
    if args.config:
        m = hconfig.load(args.config)
    elif args.preset:
        m = {"preset": args.preset}
    else:
        raise ConfigError("either --config or --preset is required")
    for item in args.set:
        m.update(hconfig.parse_text(item, "--set"))
    if args.family:
        m["family"] = args.family
    if args.pin_hyperparams or args.command == "predict":
        m["pinned"] = "true"
    cfg = hconfig.build(m)
    if args.command == "ingest" and cfg.simulated:
        raise ConfigError("the ingest command needs an ingest.* data source")
    return cfg


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.benchmark_cost:
        from .bench import cost_ratio
        M, N = args.benchmark_cost
        if M < 1 or N < 1:
            print("error: M and N must be positive", file=sys.stderr)
            return 2
        ratio, th, tv = cost_ratio(M, N)
        print(f"M: {M}\nN: {N}\nhelmholtz_seconds: {th:.6f}\n"
              f"velocity_seconds: {tv:.6f}\nratio: {ratio:.4f}")
        return 0
    if args.command is None:
        _parser().print_help(sys.stderr)
        return 2
    try:
        cfg = _load(args)
        out = args.out or cfg.out
        if out is None:
            raise ConfigError("no output directory: pass --out or set 'out' in the config")
        report = run(cfg, out=out, stages=STAGES[args.command])
    except HelmGPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    for k, v in report.items().items():
        print(f"{k}: {v}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
