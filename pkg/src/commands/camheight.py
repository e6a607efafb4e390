"""
`camh camheight`: optimize the pseudo camera height of one or more sequences.
"""

import logging

from src.commands.common import build_config, load_manifests
from src.config import Config
from src.services.pipeline import run_pipeline

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("camheight", help="Optimize per-sequence camera heights")
    parser.add_argument("manifests", nargs="+", help="Sequence manifest files")
    parser.add_argument("--state-file", help="Resume from and save sequence states to this file")
    parser.add_argument(
        "--resume", action="store_true", help=f"Use the state file from CAMH_STATE_FILE ({Config.STATE_FILE})"
    )
    parser.add_argument("--history-db", default=Config.HISTORY_DATABASE_PATH or None, help="SQLite run-history ledger")
    parser.add_argument("--no-plot", action="store_true", help="Skip the H* trend plot")
    parser.set_defaults(handler=run)


def run(args) -> int:
    config = build_config(args)
    manifests = load_manifests(args.manifests)
    state_path = args.state_file or (Config.STATE_FILE if args.resume else None)

    print(f"🚀 Optimizing {len(manifests)} sequence(s) for {config.epochs} epochs ({config.supervision.mode.value})")
    report = run_pipeline(
        manifests,
        config,
        args.out_dir,
        state_path=state_path,
        history_db=args.history_db,
        plot=not args.no_plot,
    )

    for sequence in report.sequences:
        if sequence.status != "ok":
            print(f"⚠️  {sequence.sequence_id}: {sequence.status}")
            continue
        h_star = sequence.state.h_star
        line = f"📊 {sequence.sequence_id}: H* = {'n/a' if h_star is None else f'{h_star:.4f} m'}"
        if sequence.truth is not None and h_star is not None:
            line += f" (truth {sequence.truth:.4f} m, error {100 * abs(h_star - sequence.truth) / sequence.truth:.2f}%)"
        if sequence.errors:
            line += f", {len(sequence.errors)} frame error(s)"
        print(line)
    for name, path in sorted(report.files.items()):
        print(f"✅ {name}: {path}")
    return 0
