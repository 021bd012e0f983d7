"""hgcnet command line.

    hgcnet analyze   [--config PATH] [--sweep-groups 1,2,4,6]
    hgcnet train     [--config PATH] [--desk] [--resume CHECKPOINT]
    hgcnet eval      [--config PATH] [--resume CHECKPOINT]
    hgcnet gradcheck
    hgcnet ablate    [--config PATH] [--desk]

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

import argparse
import sys
from typing import Callable, Dict, List, Optional, Sequence

import structlog

from ..blocks.modules import VARIANTS
from ..core.config import LoggingConfig
from ..core.exceptions import ConfigurationError, HgcError
from ..core.logging import setup_logging
from .commands import cmd_ablate, cmd_analyze, cmd_eval, cmd_gradcheck, cmd_train
from .run_config import RunConfig, load_run_config

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def parse_groups(text: str) -> List[int]:
    try:
        groups = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not groups or min(groups) < 1:
        raise argparse.ArgumentTypeError(f"group counts must be positive, got {text!r}")
    return groups


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Run config: flat key = value file, or .yaml")
    parser.add_argument("--seed", type=int, help="Seed for weights, data and batch order")
    parser.add_argument("--out", help="Output directory (default runs/latest)")
    parser.add_argument("--variant", choices=VARIANTS, help="1x1 reduction of every module")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--log-format", choices=["console", "json"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hgcnet", description="Hierarchical group convolution networks on numpy."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="Per-layer parameter and FLOP report")
    _common(analyze)
    analyze.add_argument(
        "--sweep-groups", type=parse_groups, help="Compare HGC and SGC totals, e.g. 1,2,4,6"
    )

    for name, help_text in (
        ("train", "Train a network"),
        ("eval", "Evaluate a checkpoint or a fresh network"),
        ("ablate", "Train HGC and SGC variants side by side"),
    ):
        command = sub.add_parser(name, help=help_text)
        _common(command)
        command.add_argument("--desk", action="store_true", help="Desk-scale synthetic run")
        command.add_argument("--resume", help="Checkpoint to resume from (train) or load (eval)")

    gradcheck = sub.add_parser("gradcheck", help="Finite-difference check of every op")
    _common(gradcheck)
    return parser


COMMANDS: Dict[str, Callable[[RunConfig, argparse.Namespace], int]] = {
    "analyze": lambda cfg, args: cmd_analyze(cfg, args.sweep_groups),
    "train": lambda cfg, args: cmd_train(cfg),
    "eval": lambda cfg, args: cmd_eval(cfg),
    "gradcheck": lambda cfg, args: cmd_gradcheck(cfg),
    "ablate": lambda cfg, args: cmd_ablate(cfg),
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse `argv`, run one subcommand and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG

    setup_logging(
        LoggingConfig(level=args.log_level or "INFO", format=args.log_format or "console")
    )
    try:
        cfg = load_run_config(args)
        setup_logging(cfg.logging)
        logger.debug("run_config_loaded", command=args.command, out_dir=cfg.out_dir)
        return COMMANDS[args.command](cfg, args)
    except ConfigurationError as e:
        logger.error("configuration_error", command=args.command, error=str(e))
        return EXIT_CONFIG
    except (HgcError, OSError) as e:
        logger.error("command_failed", command=args.command, error=str(e), kind=type(e).__name__)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        logger.warning("interrupted", command=args.command)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
