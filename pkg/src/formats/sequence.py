"""
Writes simulated sequences to disk: depth and masks per frame, a dimension
table with the true box sizes and the manifest that ties them together.
"""

import logging
import os
from typing import Optional, Sequence

import numpy as np

from src.formats.manifest import FrameEntry, SequenceManifest, write_manifest
from src.formats.pfm import write_pfm
from src.formats.pgm import write_instance_mask, write_road_mask
from src.models.camera import RelativePose
from src.services.simulator import SceneConfig, apply_global_scale, render_scene, render_view_pair
from src.services.size_prior import Dimensions, write_dimension_table

logger = logging.getLogger(__name__)

# Source camera one step ahead along the optical axis.
FORWARD_STEP = 0.5


def forward_pose(step: float = FORWARD_STEP) -> RelativePose:
    return RelativePose(np.eye(3), np.array([0.0, 0.0, -step]))


def write_sequence(
    scenes: Sequence[SceneConfig],
    out_dir: str,
    sequence_id: str = "sim-00",
    scale: float = 1.0,
    images: bool = False,
    prior_error: float = 0.0,
) -> str:
    """Render `scenes` into `out_dir` and return the manifest path.

    Depth is multiplied by `scale`; ground-truth depth is stored unscaled.
    `prior_error` inflates every tabulated height by that fraction.
    """
    for folder in ("depth", "road", "instances", "dims", "gt"):
        os.makedirs(os.path.join(out_dir, folder), exist_ok=True)
    if images:
        os.makedirs(os.path.join(out_dir, "image"), exist_ok=True)

    frames = []
    for index, scene in enumerate(scenes):
        frame_id = f"{index:06d}"
        rendered = render_scene(scene)
        paths = {
            "depth": f"depth/{frame_id}.pfm",
            "road_mask": f"road/{frame_id}.pgm",
            "instance_mask": f"instances/{frame_id}.pgm",
            "dimension_table": f"dims/{frame_id}.csv",
            "gt_depth": f"gt/{frame_id}.pfm",
        }
        write_pfm(os.path.join(out_dir, paths["depth"]), apply_global_scale(rendered.depth, scale).values)
        write_pfm(os.path.join(out_dir, paths["gt_depth"]), rendered.truth.depth.values)
        write_road_mask(os.path.join(out_dir, paths["road_mask"]), rendered.road_mask)
        write_instance_mask(os.path.join(out_dir, paths["instance_mask"]), rendered.truth.labels)

        dimensions = {
            i + 1: Dimensions(box.height * (1.0 + prior_error), box.width, box.length)
            for i, box in enumerate(scene.boxes)
        }
        write_dimension_table(os.path.join(out_dir, paths["dimension_table"]), dimensions)

        image: Optional[str] = None
        sources, poses = [], []
        if images:
            pose = forward_pose()
            target, source, _, _ = render_view_pair(scene, pose)
            image = f"image/{frame_id}.pfm"
            write_pfm(os.path.join(out_dir, image), target.values)
            sources.append(f"image/{frame_id}_s.pfm")
            write_pfm(os.path.join(out_dir, sources[0]), source.values)
            poses.append(pose)

        frames.append(
            FrameEntry(
                frame_id=frame_id,
                image=image,
                source_images=sources,
                source_poses=poses,
                **paths,
            )
        )
        logger.debug("Wrote frame %s", frame_id)

    manifest = SequenceManifest(
        sequence_id=sequence_id,
        intrinsics=scenes[0].intrinsics,
        frames=frames,
        root=out_dir,
        camera_height=scenes[0].camera_height,
    )
    path = os.path.join(out_dir, "manifest.toml")
    write_manifest(path, manifest)
    logger.info("Wrote %d frames of %s to %s", len(frames), sequence_id, out_dir)
    return path
