"""``unrollcs`` command-line entry point."""

from __future__ import annotations

import argparse
import logging
import sys

from .. import container
from ..dictionary import DivergenceError
from ..numerics import ConvergenceError
from ..problems import ConfigurationError
from ..training import TrainingError
from . import commands
from .config import PROFILES, ConfigError, ExperimentConfig

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML experiment config overlaid on the profile")
    common.add_argument("--profile", choices=sorted(PROFILES), default="paper",
                        help="built-in defaults to start from (default: paper)")
    common.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    common.add_argument("--force", action="store_true", help="overwrite outputs from another config")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="unrollcs",
        description="Compressed-sensing recovery with classical and learned unrolled solvers.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("gen-data", parents=[common], help="generate ensembles and fixed test sets")
    sub.add_parser("compute-dict", parents=[common], help="compute the analytic weight matrix W")
    p = sub.add_parser("train", parents=[common], help="train the configured learned solvers")
    p.add_argument("--ablation", action="store_true", help="train NA-ALISTA on inputs {r}, {u}, {r,u}")
    p = sub.add_parser("eval", parents=[common], help="test NMSE of trained models and baselines")
    p.add_argument("--ablation", action="store_true", help="evaluate the input-ablation runs")
    sub.add_parser("sweep", parents=[common], help="train and evaluate over the configured sweep axis")
    p = sub.add_parser("diagnose", parents=[common], help="correlation, parameter and ratio diagnostics")
    p.add_argument("--untrained", action="store_true", help="use freshly initialized models")
    return parser


def dispatch(args, cfg: ExperimentConfig) -> int:
    root = cfg.out
    if args.command == "gen-data":
        return commands.gen_data(cfg, root, args.force)
    if args.command == "compute-dict":
        return commands.compute_dict(cfg, root, args.force)
    if args.command == "train":
        return commands.train_cmd(cfg, root, args.force, args.ablation)
    if args.command == "eval":
        return commands.eval_cmd(cfg, root, args.ablation)
    if args.command == "sweep":
        return commands.sweep_cmd(cfg, root, args.force)
    return commands.diagnose_cmd(cfg, root, args.untrained)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits with 2 on usage errors
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        cfg = ExperimentConfig.resolve(args.config, args.profile, args.seed, args.out)
        return dispatch(args, cfg)
    except (ConfigError, ConfigurationError) as exc:
        print(f"unrollcs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (commands.RunError, container.ContainerError, TrainingError, DivergenceError,
            ConvergenceError) as exc:
        print(f"unrollcs: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
