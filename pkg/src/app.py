#!/usr/bin/env python3
"""
Camera-height scale recovery command-line tool.
"""

import argparse
import logging
import sys

from src.commands import camheight, losses, refine, report, simulate
from src.config import Config, config
from src.errors import CamHeightError, ConfigError

logger = logging.getLogger(__name__)

COMMANDS = (simulate, camheight, losses, refine, report)


class CliParser(argparse.ArgumentParser):
    """Argument parser whose usage errors become ConfigError (exit code 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def create_parser() -> CliParser:
    """Create the argument parser with every subcommand registered."""
    parser = CliParser(prog="camh", description="Metric scale recovery from camera height and object size priors")
    parser.add_argument("--config", help="TOML file overriding the preset")
    parser.add_argument("--preset", default="default", choices=sorted(config), help="Training preset")
    parser.add_argument("--seed", type=int, help="Random seed")
    parser.add_argument("--out-dir", default=Config.OUT_DIR, help=f"Output folder (default {Config.OUT_DIR})")
    parser.add_argument("--epochs", type=int, help="Epochs to run")
    parser.add_argument("--mode", help="Supervision: online, offline or finetune:N")
    parser.add_argument("--threads", type=int, help=f"Worker threads (default CAMH_THREADS, {Config.THREADS})")

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv=None) -> int:
    """Main entry point."""
    logging.basicConfig(level=Config.LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        args = create_parser().parse_args(argv)
        return args.handler(args)
    except CamHeightError as e:
        print(f"❌ {e}", file=sys.stderr)
        diagnostics = getattr(e, "diagnostics", None)
        if diagnostics:
            for key, value in diagnostics.items():
                print(f"   {key}: {value}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"❌ {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
