"""
`camh report`: depth metrics of a sequence, size-prior accuracy and the
recorded epoch history of a sequence.
"""

import logging
import os

from src.commands.common import build_config, output_path
from src.config import Config
from src.database.sqlalchemy_connection import init_database, sequence_history
from src.errors import ConfigError, PipelineError
from src.formats.manifest import load_manifest
from src.formats.reports import HISTORY_COLUMNS, METRIC_COLUMNS, write_csv
from src.services.pipeline import evaluate_depth, load_frames
from src.services.size_prior import dimension_errors, load_dimension_table

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("report", help="Depth metrics, size-prior errors and epoch history")
    parser.add_argument("--metrics", metavar="MANIFEST", help="Evaluate depth against the manifest's ground truth")
    parser.add_argument("--scale", type=float, default=1.0, help="Factor applied to predicted depth (default 1)")
    parser.add_argument("--median-scaling", action="store_true", help="Rescale each frame by the median ratio")
    parser.add_argument(
        "--dimensions", nargs=2, metavar=("PREDICTED", "REFERENCE"), help="Compare two dimension tables"
    )
    parser.add_argument("--history", metavar="SEQUENCE_ID", help="Epoch history of a sequence from the ledger")
    parser.add_argument("--history-db", default=Config.HISTORY_DATABASE_PATH or None, help="SQLite run-history ledger")
    parser.set_defaults(handler=run)


def _metrics(args, config) -> None:
    manifest = load_manifest(args.metrics)
    frames, _, _ = load_frames(manifest, config)
    per_frame, mean = evaluate_depth(frames, config, scale=args.scale, median_scaling=args.median_scaling)
    if mean is None:
        raise PipelineError(f"No frame of {manifest.sequence_id} has usable ground truth")

    rows = [dict(metrics.to_dict(), frame_id=frame_id) for frame_id, metrics in per_frame]
    rows.append(dict(mean.to_dict(), frame_id="mean"))
    path = output_path(args, "metrics.csv")
    write_csv(path, METRIC_COLUMNS, rows)
    print(
        f"📊 AbsRel {mean.abs_rel:.4f}  SqRel {mean.sq_rel:.4f}  RMSE {mean.rmse:.4f}  RMSElog {mean.rmse_log:.4f}  "
        f"d1 {mean.a1:.4f}  d2 {mean.a2:.4f}  d3 {mean.a3:.4f}"
    )
    print(f"✅ Metrics written to {path}")


def _dimensions(args, config) -> None:
    predicted = load_dimension_table(args.dimensions[0]).dimensions
    reference = load_dimension_table(args.dimensions[1]).dimensions
    errors = dimension_errors(predicted, reference, fixed_height=config.prior.fixed_height)
    path = output_path(args, "dimensions.csv")
    write_csv(path, ["metric", "value"], ({"metric": key, "value": value} for key, value in errors.items()))
    print(
        f"📊 {int(errors['count'])} objects: height {errors['height']:.4f}, width {errors['width']:.4f}, "
        f"length {errors['length']:.4f} (fixed {config.prior.fixed_height} m: {errors['fixed_height']:.4f})"
    )
    print(f"✅ Dimension errors written to {path}")


def _history(args) -> None:
    if not args.history_db:
        raise ConfigError("report --history needs --history-db or CAMH_HISTORY_DB")
    if args.history_db != ":memory:" and not os.path.exists(args.history_db):
        raise PipelineError(f"No history ledger at {args.history_db}")

    history = sequence_history(init_database(args.history_db), args.history)
    if history is None:
        raise PipelineError(f"Sequence {args.history} has no recorded epochs in {args.history_db}")

    rows = [
        {
            "epoch": epoch["epoch"],
            "epoch_height": epoch["epochHeight"],
            "moving_height": epoch["movingHeight"],
            "h_star": epoch["hStar"],
            "frames_used": epoch["framesUsed"],
            "frames_skipped": epoch["framesSkipped"],
        }
        for epoch in history["epochs"]
    ]
    path = output_path(args, "history.csv")
    write_csv(path, HISTORY_COLUMNS, rows)
    h_star = "none" if history["hStar"] is None else f"{history['hStar']:.4f}"
    print(f"📊 {args.history}: {len(rows)} epochs recorded ({history['mode']}), H* = {h_star}")
    print(f"✅ History written to {path}")


def run(args) -> int:
    if not args.metrics and not args.dimensions and not args.history:
        raise ConfigError("report needs --metrics, --dimensions and/or --history")
    config = build_config(args)
    if args.metrics:
        _metrics(args, config)
    if args.dimensions:
        _dimensions(args, config)
    if args.history:
        _history(args)
    return 0
