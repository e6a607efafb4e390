"""
`camh refine`: recover one global depth scale of a sequence from the scale losses.
"""

import logging
from dataclasses import replace

from src.commands.common import build_config, output_path
from src.errors import PipelineError
from src.formats.manifest import load_manifest
from src.formats.reports import REFINE_COLUMNS, write_csv
from src.services.pipeline import evaluate_depth, load_frames, scale_recovery_refine

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser("refine", help="Fit a global depth scale by gradient descent")
    parser.add_argument("manifest", help="Sequence manifest file")
    parser.add_argument("--steps", type=int, help="Descent steps")
    parser.add_argument("--lr", type=float, help="Initial learning rate")
    parser.add_argument("--optimizer", choices=("adam", "sgd"))
    parser.add_argument("--h-star", type=float, help="Pseudo camera height; estimated from the sequence if omitted")
    parser.set_defaults(handler=run)


def run(args) -> int:
    config = build_config(args)
    overrides = {
        key: value
        for key, value in (("steps", args.steps), ("learning_rate", args.lr), ("optimizer", args.optimizer))
        if value is not None
    }
    if overrides:
        config = replace(config, refine=replace(config.refine, **overrides))

    manifest = load_manifest(args.manifest)
    frames, intr, _ = load_frames(manifest, config)
    if not frames:
        raise PipelineError(f"No frame of {manifest.sequence_id} could be loaded")

    print(f"🚀 Refining the scale of {manifest.sequence_id} over {len(frames)} frames")
    result = scale_recovery_refine(frames, intr, config, h_star=args.h_star)

    path = output_path(args, "refine.csv")
    write_csv(path, REFINE_COLUMNS, ({"step": i, "loss": loss} for i, loss in enumerate(result.losses)))
    print(
        f"📊 Scale {result.scale:.6f} after {result.steps} steps "
        f"(loss {result.losses[0]:.6g} -> best {result.loss:.6g})"
    )
    if not result.converged:
        print(f"⚠️ Step size still above {config.refine.tolerance:g}; kept the best scale seen")

    _, before = evaluate_depth(frames, config)
    _, after = evaluate_depth(frames, config, scale=result.scale)
    if before is not None and after is not None:
        print(f"📏 AbsRel {before.abs_rel:.4f} -> {after.abs_rel:.4f}")
    print(f"✅ Loss curve written to {path}")
    return 0
