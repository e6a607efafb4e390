"""
Sequence manifests: one TOML file per sequence listing intrinsics and the
per-frame input files. Relative paths resolve against the manifest's folder.

    sequence_id = "seq-00"
    camera_height = 1.65          # optional ground truth, reporting only

    [intrinsics]
    fx = 500.0
    fy = 500.0
    cx = 320.0
    cy = 160.0

    [[frames]]
    id = "000000"
    depth = "depth/000000.pfm"
    road_mask = "road/000000.pgm"
    instance_mask = "instances/000000.pgm"
    image = "image/000000.pfm"                  # optional
    source_images = ["image/000001.pfm"]        # optional
    source_poses = [[1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, -0.5]]  # 3x4 row-major T_{t->s}
    dimension_table = "dims/000000.csv"         # optional
    gt_depth = "gt/000000.pfm"                  # optional
"""

import json
import os
import sys
from dataclasses import dataclass, field
from typing import List, Optional

from src.errors import ParseError, ValidationError
from src.models.camera import Intrinsics, RelativePose

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class FrameEntry:
    frame_id: str
    depth: str
    road_mask: str
    instance_mask: str
    image: Optional[str] = None
    source_images: List[str] = field(default_factory=list)
    source_poses: List[RelativePose] = field(default_factory=list)
    dimension_table: Optional[str] = None
    gt_depth: Optional[str] = None


@dataclass(frozen=True)
class SequenceManifest:
    sequence_id: str
    intrinsics: Intrinsics
    frames: List[FrameEntry]
    root: str = "."
    camera_height: Optional[float] = None

    def resolve(self, path: Optional[str]) -> Optional[str]:
        if path is None:
            return None
        return path if os.path.isabs(path) else os.path.join(self.root, path)


_FRAME_KEYS = {
    "id",
    "depth",
    "road_mask",
    "instance_mask",
    "image",
    "source_images",
    "source_poses",
    "dimension_table",
    "gt_depth",
}


def _frame_from_mapping(data, index: int, path: str) -> FrameEntry:
    unknown = set(data) - _FRAME_KEYS
    if unknown:
        raise ParseError(f"frame {index}: unknown key(s) {', '.join(sorted(unknown))}", path=path)
    for key in ("id", "depth", "road_mask", "instance_mask"):
        if key not in data:
            raise ParseError(f"frame {index}: missing '{key}'", path=path)

    sources = [str(s) for s in data.get("source_images", [])]
    try:
        poses = [RelativePose.from_list(p) for p in data.get("source_poses", [])]
    except (ValueError, TypeError) as e:
        raise ValidationError(f"{path}: frame {index}: invalid source pose: {e}")
    if len(poses) != len(sources):
        raise ValidationError(f"{path}: frame {index}: {len(sources)} source images but {len(poses)} poses")

    return FrameEntry(
        frame_id=str(data["id"]),
        depth=str(data["depth"]),
        road_mask=str(data["road_mask"]),
        instance_mask=str(data["instance_mask"]),
        image=data.get("image"),
        source_images=sources,
        source_poses=poses,
        dimension_table=data.get("dimension_table"),
        gt_depth=data.get("gt_depth"),
    )


def load_manifest(path: str) -> SequenceManifest:
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ParseError("file not found", path=path)
    except tomllib.TOMLDecodeError as e:
        raise ParseError(f"invalid TOML: {e}", path=path)

    if "sequence_id" not in data or "intrinsics" not in data:
        raise ParseError("manifest needs 'sequence_id' and an [intrinsics] table", path=path)
    try:
        intr = Intrinsics(**{k: float(data["intrinsics"][k]) for k in ("fx", "fy", "cx", "cy")})
    except KeyError as e:
        raise ParseError(f"[intrinsics] is missing {e}", path=path)

    frames = [_frame_from_mapping(entry, i, path) for i, entry in enumerate(data.get("frames", []))]
    if not frames:
        raise ValidationError(f"{path}: manifest lists no frames")
    ids = [frame.frame_id for frame in frames]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: duplicate frame ids")

    camera_height = data.get("camera_height")
    return SequenceManifest(
        sequence_id=str(data["sequence_id"]),
        intrinsics=intr,
        frames=frames,
        root=os.path.dirname(os.path.abspath(path)),
        camera_height=float(camera_height) if camera_height is not None else None,
    )


def _toml_value(value) -> str:
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return repr(float(value)) if isinstance(value, float) else str(value)


def write_manifest(path: str, manifest: SequenceManifest):
    """Write a manifest with paths as given (relative paths stay relative)."""
    lines = [f"sequence_id = {_toml_value(manifest.sequence_id)}"]
    if manifest.camera_height is not None:
        lines.append(f"camera_height = {_toml_value(manifest.camera_height)}")
    lines.append("")
    lines.append("[intrinsics]")
    for key, value in manifest.intrinsics.to_dict().items():
        lines.append(f"{key} = {_toml_value(float(value))}")

    for frame in manifest.frames:
        lines.append("")
        lines.append("[[frames]]")
        lines.append(f"id = {_toml_value(frame.frame_id)}")
        for key in ("depth", "road_mask", "instance_mask", "image", "dimension_table", "gt_depth"):
            value = getattr(frame, key)
            if value is not None:
                lines.append(f"{key} = {_toml_value(value)}")
        if frame.source_images:
            lines.append(f"source_images = {_toml_value(frame.source_images)}")
            poses = [[float(v) for v in pose.to_list()] for pose in frame.source_poses]
            lines.append(f"source_poses = {_toml_value(poses)}")

    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
