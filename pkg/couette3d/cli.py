"""Command line entry point: ``couette3d <kind> --config <path> [--seed N] [--out DIR]``."""

import argparse
import sys

from couette3d import __version__
from couette3d.core import AppException, get_logger, get_settings, setup_logging
from couette3d.schemas.experiment import KINDS
from couette3d.services.experiment_runner import ExperimentRunner, load_experiment_config

logger = get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="couette3d", description="Plane Couette flow perturbation experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("kind", choices=KINDS, help="experiment kind")
    parser.add_argument("--config", required=True, help="flat TOML experiment file")
    parser.add_argument("--seed", type=int, default=None, help="override the seed of the random initial data")
    parser.add_argument("--out", default=None, help="root directory of run directories")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    setup_logging(log_level=settings.log_level, log_file=settings.log_file)

    try:
        config = load_experiment_config(args.config, kind=args.kind, seed=args.seed)
        result = ExperimentRunner(args.out).run(config)
    except AppException as exc:
        logger.error(f"{exc.code}: {exc.message}")
        return exc.exit_code

    print(result.run_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
