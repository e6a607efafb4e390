"""
`camh losses`: per-frame loss breakdown of a sequence at a given epoch.
"""

import logging

from src.commands.common import build_config, output_path
from src.database.state_file import load_states
from src.errors import ConfigError
from src.formats.manifest import load_manifest
from src.formats.reports import LOSS_COLUMNS, write_csv
from src.services.epoch_optimizer import supervision_for_epoch
from src.services.pipeline import evaluate_losses, load_frames

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("losses", help="Evaluate the loss terms of every frame")
    parser.add_argument("manifest", help="Sequence manifest file")
    parser.add_argument("--epoch", type=int, default=1, help="Training epoch, numbered from 1 (default 1)")
    supervision = parser.add_mutually_exclusive_group()
    supervision.add_argument("--h-star", type=float, help="Pseudo camera height to supervise with")
    supervision.add_argument("--state-file", help="Take H* for the epoch from a stored sequence state")
    parser.add_argument("--gradient", action="store_true", help="Add d loss / d log-scale per frame")
    parser.set_defaults(handler=run)


def run(args) -> int:
    config = build_config(args)
    manifest = load_manifest(args.manifest)

    h_star = args.h_star
    if args.state_file:
        states = load_states(args.state_file)
        if manifest.sequence_id not in states:
            raise ConfigError(f"No stored state for sequence '{manifest.sequence_id}' in {args.state_file}")
        h_star = supervision_for_epoch(states[manifest.sequence_id], args.epoch)

    frames, intr, errors = load_frames(manifest, config)
    rows = evaluate_losses(frames, intr, config, epoch=args.epoch, h_star=h_star, gradient=args.gradient)
    rows.extend(dict(error, status="unreadable") for error in errors)

    path = output_path(args, "losses.csv")
    write_csv(path, LOSS_COLUMNS, rows)
    usable = sum(1 for row in rows if row["status"] == "ok")
    print(f"📊 {usable} of {len(rows)} frames evaluated at epoch {args.epoch}")
    print(f"✅ Losses written to {path}")
    return 0
