"""
Helpers shared by the subcommands.
"""

import os
import sys
from dataclasses import replace
from typing import List, Sequence

from src.config import PipelineConfig, load_pipeline_config
from src.formats.manifest import SequenceManifest, load_manifest

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def build_config(args) -> PipelineConfig:
    """Preset, then the --config file, then command-line flags."""
    config = load_pipeline_config(args.config, preset=args.preset)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.epochs is not None:
        changes["epochs"] = args.epochs
    if args.threads is not None:
        changes["threads"] = args.threads
    if changes:
        config = replace(config, **changes)
    if args.mode:
        config = config.with_mode(args.mode)
    return config


def read_scene_table(path) -> dict:
    """The optional [scene] table of a config file."""
    if not path:
        return {}
    with open(path, "rb") as f:
        return tomllib.load(f).get("scene", {})


def load_manifests(paths: Sequence[str]) -> List[SequenceManifest]:
    return [load_manifest(path) for path in paths]


def output_path(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)
