"""``pcl`` command line entry point."""
from __future__ import annotations

import argparse
import logging
import sys

import yaml

from .evolution import LeakageError
from .experiments import KINDS, ConfigError, load_config, run_experiment

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_LEAKAGE = 3

log = logging.getLogger("pcl")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcl",
        description="Cavities thermalised by a stream of phaseonium ancillas: experiments and figures.",
    )
    parser.add_argument("kind", choices=KINDS, help="experiment to run")
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--out", help="output directory (default $PCL_OUT/<kind> or pcl-out/<kind>)")
    parser.add_argument("--jobs", type=int, help="worker processes (default $PCL_JOBS or 1)")
    parser.add_argument("--plot", action="store_true", default=None, help="also render PNG plots")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override a config entry, e.g. --set params.alpha=0.3 (repeatable)",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.overrides, seed=args.seed, out=args.out, jobs=args.jobs, plot=args.plot)
        record = run_experiment(args.kind, cfg)
    except LeakageError as err:
        print(f"pcl: leakage abort: {err}", file=sys.stderr)
        return EXIT_LEAKAGE
    except (ConfigError, ValueError, KeyError, TypeError, OSError, yaml.YAMLError) as err:
        print(f"pcl: invalid configuration: {err}", file=sys.stderr)
        return EXIT_INVALID
    print(record.to_json())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
