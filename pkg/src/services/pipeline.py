"""
End-to-end camera-height optimization over sequences and the global-scale
refine loop.
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from src.config import PipelineConfig
from src.database.sqlalchemy_connection import init_database, record_epoch
from src.database.state_file import load_states, save_states
from src.errors import (
    CamHeightError,
    DivergenceError,
    EpochSkippedError,
    FrameUnusableError,
    InvalidInputError,
    MissingPriorError,
    NumericalError,
    PipelineError,
    UndefinedLossError,
)
from src.formats.manifest import FrameEntry, SequenceManifest
from src.formats.pfm import read_pfm
from src.formats.pgm import read_instance_mask, read_road_mask
from src.formats.reports import EPOCH_COLUMNS, FRAME_COLUMNS, write_csv, write_h_star_plot
from src.models.camera import DepthMap, Image, Intrinsics, RelativePose
from src.models.losses import LossBreakdown
from src.models.scene import FrameAnnotation, FrameCameraHeight, FrameScale, ObjectInstance, SilhouetteMeasurement
from src.models.supervision import FrameRecord, SequenceState, SupervisionMode
from src.services.camheight import frame_camera_height, per_pixel_camera_height, road_normal
from src.services.epoch_optimizer import (
    close_epoch,
    estimate_offline_height,
    start_sequence,
    supervision_for_epoch,
)
from src.services.geometry import normal_map
from src.services.loss_gradient import GradientMode, ScaleLossInputs, log_scale_terms, loss_gradient
from src.services.losses import (
    aux_geometric_loss,
    camera_height_loss,
    loss_weight_schedule,
    reconstruction_loss,
    smoothness_loss,
    total_loss,
    warp_view,
)
from src.services.metrics import MetricsReport, center_crop_mask, compute_depth_metrics
from src.services.outlier_filter import approximate_heights, filter_outliers, horizon_line
from src.services.preprocessing import align_focal_length, filter_static_frames
from src.services.silhouette_projector import frame_scale_factor, scaled_camera_height, silhouette_height
from src.services.size_prior import FixedHeightPrior, PriorSource, load_dimension_table, prior_height

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True, eq=False)
class FrameInputs:
    """Everything loaded for one frame."""

    frame_id: str
    depth: DepthMap
    annotation: FrameAnnotation
    priors: PriorSource
    image: Optional[Image] = None
    sources: Sequence[Image] = ()
    poses: Sequence[RelativePose] = ()
    gt_depth: Optional[DepthMap] = None


@dataclass(frozen=True, eq=False)
class FrameMeasurement:
    """Epoch-independent geometry of one frame."""

    frame_id: str
    camera_height: FrameCameraHeight
    normal: np.ndarray
    height_map: np.ndarray
    silhouettes: List[SilhouetteMeasurement]
    priors: Dict[int, float]


@dataclass(frozen=True)
class FrameScaleResult:
    frame_id: str
    camera_height: float
    scale: FrameScale
    inliers: FrozenSet[int]
    scaled_height: float


@dataclass
class SequenceReport:
    sequence_id: str
    status: str = "ok"
    state: Optional[SequenceState] = None
    frame_rows: List[dict] = field(default_factory=list)
    epoch_rows: List[dict] = field(default_factory=list)
    errors: List[dict] = field(default_factory=list)
    truth: Optional[float] = None


@dataclass
class PipelineReport:
    sequences: List[SequenceReport] = field(default_factory=list)
    files: Dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class RefineResult:
    scale: float
    log_scale: float
    steps: int
    losses: List[float]
    h_star: Optional[float]
    loss: float = math.nan
    converged: bool = False


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> List[R]:
    """Map in input order, on a thread pool when more than one thread is allowed."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, items))


# Loading


def _prior_source(manifest: SequenceManifest, entry: FrameEntry, config: PipelineConfig) -> PriorSource:
    table = manifest.resolve(entry.dimension_table) or config.prior.dimension_table
    if table:
        return load_dimension_table(table, fallback=config.prior.fallback_height)
    return FixedHeightPrior(config.prior.fixed_height)


def _read_image(path: str) -> np.ndarray:
    return np.clip(read_pfm(path).astype(np.float64), 0.0, 1.0)


def load_frame(
    manifest: SequenceManifest, entry: FrameEntry, config: PipelineConfig
) -> Tuple[FrameInputs, Intrinsics]:
    """Read one frame; with a target focal length every map is aligned and the intrinsics follow."""
    intr = manifest.intrinsics
    depth = read_pfm(manifest.resolve(entry.depth))
    road = read_road_mask(manifest.resolve(entry.road_mask))
    labels = read_instance_mask(manifest.resolve(entry.instance_mask))
    if road.shape != depth.shape or labels.shape != depth.shape:
        raise FrameUnusableError(f"Frame {entry.frame_id}: mask and depth dimensions differ")

    image = _read_image(manifest.resolve(entry.image)) if entry.image else None
    sources = [_read_image(manifest.resolve(path)) for path in entry.source_images] if image is not None else []
    gt_depth = read_pfm(manifest.resolve(entry.gt_depth)) if entry.gt_depth else None

    camera = config.camera
    if camera.target_focal is not None:

        def align(values, kind):
            return align_focal_length(values, intr, camera.target_focal, kind=kind, crop_size=camera.crop_size)[0]

        depth, aligned_intr = align_focal_length(
            depth, intr, camera.target_focal, kind="depth", crop_size=camera.crop_size
        )
        road = align(road.astype(np.uint8), "mask").astype(bool)
        labels = align(labels, "mask")
        image = align(image, "image") if image is not None else None
        sources = [align(source, "image") for source in sources]
        gt_depth = align(gt_depth, "depth") if gt_depth is not None else None
        intr = aligned_intr

    # Instances cropped away entirely drop out here.
    annotation = FrameAnnotation(road_mask=road, instances=ObjectInstance.from_label_image(labels))
    frame = FrameInputs(
        frame_id=entry.frame_id,
        depth=DepthMap(depth),
        annotation=annotation,
        priors=_prior_source(manifest, entry, config),
        image=Image(image) if image is not None else None,
        sources=[Image(source) for source in sources],
        poses=list(entry.source_poses) if image is not None else [],
        gt_depth=DepthMap(gt_depth) if gt_depth is not None else None,
    )
    return frame, intr


def load_frames(
    manifest: SequenceManifest, config: PipelineConfig
) -> Tuple[List[FrameInputs], Intrinsics, List[dict]]:
    """Frames that loaded in manifest order, the intrinsics they share, and one error entry per failed frame."""

    def attempt(entry: FrameEntry):
        try:
            return load_frame(manifest, entry, config), None
        except (CamHeightError, OSError) as e:
            logger.warning("Frame %s skipped: %s", entry.frame_id, e)
            return None, {"frame_id": entry.frame_id, "error": str(e)}

    frames, errors = [], []
    intr = manifest.intrinsics
    for loaded, error in parallel_map(attempt, manifest.frames, config.threads):
        if loaded is None:
            errors.append(error)
            continue
        frame, intr = loaded
        frames.append(frame)
    return frames, intr, errors


def select_frames(frames: List[FrameInputs], config: PipelineConfig) -> List[FrameInputs]:
    """Apply the frame stride and, when enabled and images exist, static-frame elimination."""
    settings = config.static_filter
    if settings.enabled and frames and all(frame.image is not None for frame in frames):
        kept = filter_static_frames(
            [frame.image for frame in frames],
            stride=settings.stride,
            pixel_threshold=settings.pixel_threshold,
            count_fraction=settings.count_fraction,
        )
        return [frames[i] for i in kept]
    return frames[:: settings.stride]


# Per-frame steps


def measure_frame(frame: FrameInputs, intr: Intrinsics) -> FrameMeasurement:
    """Unscaled camera height, road normal and object silhouettes of one frame."""
    road = frame.annotation.road_mask
    normals = normal_map(frame.depth, intr)
    height_map = per_pixel_camera_height(frame.depth, normals, road, intr)
    camera_height = frame_camera_height(height_map, road)
    normal = road_normal(normals, road)

    priors: Dict[int, float] = {}
    for instance in frame.annotation.instances:
        try:
            priors[instance.id] = prior_height(frame.priors, instance)
        except MissingPriorError as e:
            logger.debug("Frame %s: %s", frame.frame_id, e)

    silhouettes = [
        silhouette_height(frame.depth, intr, instance, normal, camera_height.value)
        for instance in frame.annotation.instances
        if instance.id in priors
    ]
    return FrameMeasurement(
        frame_id=frame.frame_id,
        camera_height=camera_height,
        normal=normal,
        height_map=height_map,
        silhouettes=silhouettes,
        priors=priors,
    )


def select_inliers(
    frame: FrameInputs,
    measurement: FrameMeasurement,
    intr: Intrinsics,
    h_star: Optional[float],
    threshold: float,
) -> FrozenSet[int]:
    """Objects with a valid silhouette that pass the plausibility filter.

    Without a supervision height there is nothing to compare against, so every
    valid object is kept.
    """
    candidates = {m.object_id for m in measurement.silhouettes if m.valid}
    if h_star is None:
        return frozenset(candidates)

    horizon = horizon_line(intr, measurement.normal)
    instances = [instance for instance in frame.annotation.instances if instance.id in candidates]
    approximations = approximate_heights(instances, horizon, h_star)
    return frozenset(filter_outliers(measurement.priors, approximations, threshold))


def scale_frame(
    frame: FrameInputs,
    measurement: FrameMeasurement,
    intr: Intrinsics,
    h_star: Optional[float],
    threshold: float = 0.2,
) -> FrameScaleResult:
    """Scaled camera height of one frame from its inlier objects."""
    inliers = select_inliers(frame, measurement, intr, h_star, threshold)
    kept = [m for m in measurement.silhouettes if m.object_id in inliers]
    scale = frame_scale_factor(kept, measurement.priors)
    scaled = scaled_camera_height(measurement.camera_height, scale)
    return FrameScaleResult(
        frame_id=frame.frame_id,
        camera_height=measurement.camera_height.value,
        scale=scale,
        inliers=inliers,
        scaled_height=scaled.value,
    )


def _disparity(depth: DepthMap) -> Optional[np.ndarray]:
    valid = depth.valid
    if not valid.any():
        return None
    disparity = np.zeros(depth.shape)
    disparity[valid] = 1.0 / depth.values[valid]
    # Pixels without depth take the farthest valid disparity.
    disparity[~valid] = disparity[valid].min()
    return disparity


def photometric_terms(frame: FrameInputs, intr: Intrinsics, config: PipelineConfig) -> Tuple[Optional[float], ...]:
    """(L_rec, L_sm) of one frame; absent terms are None."""
    if frame.image is None:
        return None, None

    rec = None
    if frame.sources:
        warped = [warp_view(source, frame.depth, pose, intr) for source, pose in zip(frame.sources, frame.poses)]
        try:
            rec = reconstruction_loss(
                frame.image,
                frame.sources,
                [image for image, _ in warped],
                automask=config.loss_options.automask,
                lambda_pe=config.losses.lambda_pe,
                valid_masks=[mask for _, mask in warped],
            )
        except UndefinedLossError as e:
            logger.debug("Frame %s: %s", frame.frame_id, e)

    disparity = _disparity(frame.depth)
    sm = smoothness_loss(disparity, frame.image) if disparity is not None else None
    return rec, sm


def frame_losses(
    frame: FrameInputs,
    measurement: FrameMeasurement,
    intr: Intrinsics,
    config: PipelineConfig,
    h_star: Optional[float],
    inliers: FrozenSet[int],
    tau: int,
    photometric: Tuple[Optional[float], Optional[float]] = (None, None),
) -> LossBreakdown:
    """Loss breakdown of one frame at the zero-based training epoch tau."""
    cam = None
    if h_star is not None:
        try:
            cam = camera_height_loss(measurement.height_map, frame.annotation.road_mask, h_star)
        except UndefinedLossError as e:
            logger.debug("Frame %s: %s", frame.frame_id, e)
    instances = [instance for instance in frame.annotation.instances if instance.id in inliers]
    aux = aux_geometric_loss(frame.depth, instances, measurement.priors, intr)
    rec, sm = photometric
    return total_loss(
        rec=rec,
        sm=sm,
        cam=cam,
        aux=aux,
        weights=config.losses,
        tau=tau,
        options=config.loss_options,
        fix_camera_weight=config.supervision.mode is not SupervisionMode.ONLINE,
    )


# Sequence optimization


def _initial_state(
    sequence_id: str,
    frames: Sequence[FrameInputs],
    measurements: Sequence[Optional[FrameMeasurement]],
    intr: Intrinsics,
    config: PipelineConfig,
) -> SequenceState:
    settings = config.supervision
    offline = settings.offline_height
    if settings.mode is not SupervisionMode.ONLINE and offline is None:
        records = []
        for frame, measurement in zip(frames, measurements):
            if measurement is None:
                continue
            try:
                result = scale_frame(frame, measurement, intr, None, config.filter.threshold)
            except FrameUnusableError:
                continue
            records.append(FrameRecord(frame.frame_id, sequence_id, result.scaled_height, len(result.inliers)))
        try:
            offline = estimate_offline_height(records)
        except EpochSkippedError as e:
            raise PipelineError(f"Sequence {sequence_id}: no offline camera height: {e}")
        logger.info("Sequence %s: offline camera height %.4f", sequence_id, offline)
    return start_sequence(sequence_id, settings.mode, settings.unfreeze_epoch, offline)


def run_sequence(
    sequence_id: str,
    frames: Sequence[FrameInputs],
    intr: Intrinsics,
    config: PipelineConfig,
    epochs: Optional[int] = None,
    state: Optional[SequenceState] = None,
    ledger=None,
) -> SequenceReport:
    """Optimize the pseudo camera height of one sequence for `epochs` epochs."""
    epochs = epochs or config.epochs
    report = SequenceReport(sequence_id=sequence_id)

    def measure(frame: FrameInputs):
        try:
            return measure_frame(frame, intr), None
        except CamHeightError as e:
            logger.debug("Frame %s unusable: %s", frame.frame_id, e)
            return None, str(e)

    def photometric_or_none(frame: FrameInputs):
        try:
            return photometric_terms(frame, intr, config)
        except CamHeightError as e:
            logger.warning("Frame %s: photometric terms skipped: %s", frame.frame_id, e)
            return None, None

    measured = parallel_map(measure, list(frames), config.threads)
    measurements = [m for m, _ in measured]
    for frame, (measurement, error) in zip(frames, measured):
        if measurement is None:
            report.errors.append({"frame_id": frame.frame_id, "error": error})
    if all(m is None for m in measurements):
        raise PipelineError(f"Sequence {sequence_id}: no frame is usable")

    photometric = parallel_map(photometric_or_none, list(frames), config.threads)
    if state is None:
        state = _initial_state(sequence_id, frames, measurements, intr, config)

    for tau in range(state.epoch + 1, state.epoch + epochs + 1):
        h_star = supervision_for_epoch(state, tau)
        schedule_tau = tau - 1

        def evaluate(index: int) -> dict:
            frame, measurement = frames[index], measurements[index]
            row = {"sequence_id": sequence_id, "epoch": tau, "frame_id": frame.frame_id}
            if measurement is None:
                row.update(status="unusable", error=measured[index][1])
                return row
            row["camera_height_unscaled"] = measurement.camera_height.value
            inliers: FrozenSet[int] = frozenset()
            try:
                result = scale_frame(frame, measurement, intr, h_star, config.filter.threshold)
                inliers = result.inliers
                row.update(status="ok", scale=result.scale.s, inliers=len(inliers), scaled_height=result.scaled_height)
            except FrameUnusableError as e:
                row.update(status="no_scale", inliers=0, error=str(e))
            breakdown = frame_losses(
                frame, measurement, intr, config, h_star, inliers, schedule_tau, photometric[index]
            )
            row.update(breakdown.to_dict())
            return row

        rows = parallel_map(evaluate, list(range(len(frames))), config.threads)
        records = [
            FrameRecord(row["frame_id"], sequence_id, row.get("scaled_height"), row.get("inliers") or 0)
            for row in rows
        ]
        state = close_epoch(state, records)
        used = sum(1 for row in rows if row["status"] == "ok")
        latest = state.history[-1]
        report.frame_rows.extend(rows)
        report.epoch_rows.append(
            {
                "sequence_id": sequence_id,
                "epoch": latest.epoch,
                "frames_used": used,
                "frames_skipped": len(rows) - used,
                "epoch_height": latest.epoch_height,
                "moving_height": latest.moving_height,
                "h_star": latest.h_star,
            }
        )
        if ledger is not None:
            record_epoch(ledger, state, rows, frames_skipped=len(rows) - used)

    report.state = state
    return report


def run_pipeline(
    manifests: Sequence[SequenceManifest],
    config: PipelineConfig,
    out_dir: str,
    epochs: Optional[int] = None,
    state_path: Optional[str] = None,
    history_db: Optional[str] = None,
    plot: bool = True,
) -> PipelineReport:
    """Run every sequence and write frames.csv, epochs.csv and h_star.svg to `out_dir`.

    With `state_path`, stored states are resumed and the updated states saved.
    """
    os.makedirs(out_dir, exist_ok=True)
    states = load_states(state_path) if state_path else {}
    ledger = init_database(history_db) if history_db else None
    report = PipelineReport()

    for manifest in manifests:
        frames, intr, errors = load_frames(manifest, config)
        frames = select_frames(frames, config)
        required = max(1, config.supervision.min_frames)
        if len(frames) < required:
            logger.warning("Sequence %s has %d usable frames, %d required", manifest.sequence_id, len(frames), required)
            report.sequences.append(
                SequenceReport(sequence_id=manifest.sequence_id, status="too_short", errors=errors)
            )
            continue

        sequence = run_sequence(
            manifest.sequence_id,
            frames,
            intr,
            config,
            epochs=epochs,
            state=states.get(manifest.sequence_id),
            ledger=ledger,
        )
        sequence.errors = errors + sequence.errors
        sequence.truth = manifest.camera_height
        states[manifest.sequence_id] = sequence.state
        report.sequences.append(sequence)

    if not any(s.status == "ok" for s in report.sequences):
        raise PipelineError("No sequence could be optimized")

    frames_path = os.path.join(out_dir, "frames.csv")
    epochs_path = os.path.join(out_dir, "epochs.csv")
    write_csv(frames_path, FRAME_COLUMNS, (row for s in report.sequences for row in s.frame_rows))
    write_csv(epochs_path, EPOCH_COLUMNS, (row for s in report.sequences for row in s.epoch_rows))
    report.files = {"frames": frames_path, "epochs": epochs_path}

    if plot:
        series = {s.sequence_id: [row["h_star"] for row in s.epoch_rows] for s in report.sequences if s.epoch_rows}
        truths = {s.truth for s in report.sequences if s.truth is not None}
        plot_path = os.path.join(out_dir, "h_star.svg")
        write_h_star_plot(plot_path, series, truth=truths.pop() if len(truths) == 1 else None)
        report.files["plot"] = plot_path

    if state_path:
        save_states(state_path, [s for s in states.values() if s is not None])
    return report


# Evaluation


def evaluate_losses(
    frames: Sequence[FrameInputs],
    intr: Intrinsics,
    config: PipelineConfig,
    epoch: int = 1,
    h_star: Optional[float] = None,
    gradient: bool = False,
) -> List[dict]:
    """Loss breakdown of every frame while training the 1-based `epoch` against `h_star`.

    With `gradient`, each row also carries the derivative of the scale terms
    with respect to a global log-scale on the frame's depth.
    """
    if epoch < 1:
        raise InvalidInputError(f"Epochs are numbered from 1, got {epoch}")

    def evaluate(frame: FrameInputs) -> dict:
        row = {"frame_id": frame.frame_id}
        try:
            measurement = measure_frame(frame, intr)
        except CamHeightError as e:
            row.update(status="unusable", error=str(e))
            return row
        row["status"] = "ok"
        try:
            inliers = select_inliers(frame, measurement, intr, h_star, config.filter.threshold)
        except FrameUnusableError as e:
            logger.debug("Frame %s has no inlier objects: %s", frame.frame_id, e)
            inliers = frozenset()
            row.update(status="no_scale", error=str(e))
        try:
            photometric = photometric_terms(frame, intr, config)
        except CamHeightError as e:
            logger.warning("Frame %s: photometric terms skipped: %s", frame.frame_id, e)
            photometric = (None, None)
            row.setdefault("error", str(e))
        breakdown = frame_losses(frame, measurement, intr, config, h_star, inliers, epoch - 1, photometric)
        row.update(inliers=len(inliers), **breakdown.to_dict())
        if gradient:
            options = config.loss_options
            inputs = ScaleLossInputs(
                intr=intr,
                road_mask=frame.annotation.road_mask,
                h_star=h_star if options.use_camera_loss else None,
                instances=[i for i in frame.annotation.instances if i.id in inliers] if options.use_aux_loss else [],
                priors=measurement.priors,
                lambda_cam=breakdown.lambda_cam,
                lambda_aux=breakdown.lambda_aux,
                weights=config.losses,
            )
            try:
                row["d_log_scale"] = loss_gradient(frame.depth, inputs, GradientMode.GLOBAL_LOG_SCALE)
            except UndefinedLossError as e:
                logger.debug("Frame %s has no scale gradient: %s", frame.frame_id, e)
        return row

    return parallel_map(evaluate, list(frames), config.threads)


def evaluate_depth(
    frames: Iterable[FrameInputs],
    config: PipelineConfig,
    scale: float = 1.0,
    valid_mask: Optional[np.ndarray] = None,
    median_scaling: bool = False,
) -> Tuple[List[Tuple[str, MetricsReport]], Optional[MetricsReport]]:
    """Per-frame metrics of `scale * depth` against ground truth, and their mean.

    Without an explicit mask the configured evaluation crop, if any, is applied.
    """
    per_frame = []
    for frame in frames:
        if frame.gt_depth is None:
            continue
        mask = valid_mask
        try:
            if mask is None and config.camera.eval_crop is not None:
                mask = center_crop_mask(frame.gt_depth.shape, config.camera.eval_crop)
            metrics = compute_depth_metrics(
                frame.depth.scaled(scale),
                frame.gt_depth,
                valid_mask=mask,
                depth_cap=config.metrics.depth_cap,
                min_depth=config.metrics.min_depth,
                median_scaling=median_scaling,
            )
        except CamHeightError as e:
            logger.warning("Frame %s not evaluated: %s", frame.frame_id, e)
            continue
        per_frame.append((frame.frame_id, metrics))

    if not per_frame:
        return per_frame, None
    reports = [m for _, m in per_frame]
    mean = MetricsReport(
        **{
            key: float(np.mean([getattr(r, key) for r in reports]))
            for key in ("abs_rel", "sq_rel", "rmse", "rmse_log", "a1", "a2", "a3")
        },
        count=sum(r.count for r in reports),
    )
    return per_frame, mean


# Refine


def _refine_terms(frames: Sequence[FrameInputs], intr: Intrinsics, config: PipelineConfig, h_star: Optional[float]):
    tau = config.refine.epoch if config.refine.epoch is not None else config.losses.tau_mid
    lambda_aux, lambda_cam = loss_weight_schedule(
        tau,
        config.losses.tau_mid,
        config.losses.epsilon,
        literal_aux_sign=config.loss_options.literal_aux_sign,
        fix_camera_weight=config.supervision.mode is not SupervisionMode.ONLINE,
        balance_weights=config.loss_options.balance_weights,
    )
    use_cam = config.loss_options.use_camera_loss and h_star is not None

    terms = []
    for frame in frames:
        try:
            measurement = measure_frame(frame, intr)
            inliers = select_inliers(frame, measurement, intr, h_star, config.filter.threshold)
            inputs = ScaleLossInputs(
                intr=intr,
                road_mask=frame.annotation.road_mask,
                h_star=h_star if use_cam else None,
                instances=[i for i in frame.annotation.instances if i.id in inliers]
                if config.loss_options.use_aux_loss
                else [],
                priors=measurement.priors,
                lambda_cam=lambda_cam,
                lambda_aux=lambda_aux,
                weights=config.losses,
            )
            terms.append(log_scale_terms(frame.depth, inputs))
        except (FrameUnusableError, UndefinedLossError) as e:
            logger.debug("Frame %s left out of refine: %s", frame.frame_id, e)
    return terms


def estimate_sequence_height(frames: Sequence[FrameInputs], intr: Intrinsics, config: PipelineConfig) -> float:
    """Median scaled camera height over the frames, without outlier filtering."""
    records = []
    for frame in frames:
        try:
            result = scale_frame(frame, measure_frame(frame, intr), intr, None, config.filter.threshold)
        except FrameUnusableError:
            continue
        records.append(FrameRecord(frame.frame_id, "refine", result.scaled_height, len(result.inliers)))
    return estimate_offline_height(records)


def scale_recovery_refine(
    frames: Sequence[FrameInputs],
    intr: Intrinsics,
    config: PipelineConfig,
    h_star: Optional[float] = None,
) -> RefineResult:
    """Descend on one global log-scale s applied to every depth map of the sequence.

    The objective is the mean over frames of alpha*lambda_cam*L_cam +
    beta*lambda_aux*L_aux. Without `h_star` the sequence's own estimate is used,
    falling back to the auxiliary term alone.
    """
    if h_star is None:
        try:
            h_star = estimate_sequence_height(frames, intr, config)
        except EpochSkippedError:
            logger.warning("No camera height estimate; refining on the auxiliary term only")

    terms = _refine_terms(frames, intr, config, h_star)
    if not terms:
        raise PipelineError("No frame provides a scale loss to refine")

    def objective(s: float) -> float:
        return float(np.mean([t.loss(s) for t in terms]))

    def derivative(s: float) -> float:
        return float(np.mean([t.derivative(s) for t in terms]))

    settings = config.refine
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    s, m, v = 0.0, 0.0, 0.0
    moment_age = 0
    lr = settings.learning_rate
    previous_g = 0.0
    losses = [objective(s)]
    best_s, best_loss = s, losses[0]
    increases = 0
    converged = False
    step = 0
    for step in range(1, settings.steps + 1):
        g = derivative(s)
        if g * previous_g < 0:
            # Crossed the minimum: shorter steps and fresh momentum.
            lr *= 0.5
            m, moment_age = 0.0, 0
        elif step > 1 and lr < settings.max_learning_rate:
            lr = min(lr * settings.growth, settings.max_learning_rate)
        previous_g = g

        if settings.optimizer == "adam":
            moment_age += 1
            m = beta1 * m + (1 - beta1) * g
            v = beta2 * v + (1 - beta2) * g * g
            m_hat = m / (1 - beta1**moment_age)
            v_hat = v / (1 - beta2**step)
            delta = lr * m_hat / (math.sqrt(v_hat) + eps)
        else:
            delta = lr * g
        s -= delta

        loss = objective(s)
        if not math.isfinite(loss) or not math.isfinite(s):
            raise NumericalError(f"Refine produced a non-finite value at step {step}")
        increases = increases + 1 if loss > losses[-1] else 0
        losses.append(loss)
        if loss < best_loss:
            best_s, best_loss = s, loss
        if increases >= settings.patience:
            raise DivergenceError(
                f"Loss increased for {increases} consecutive steps",
                diagnostics={"step": step, "log_scale": s, "scale": math.exp(s), "recent_losses": losses[-11:]},
            )
        if abs(delta) < settings.tolerance:
            converged = True
            break

    if converged:
        logger.info("Refine converged after %d steps: scale %.5f, loss %.6g", step, math.exp(best_s), best_loss)
    else:
        logger.warning(
            "Refine did not converge in %d steps (last step %.3g); returning the best scale %.5f",
            step,
            abs(delta),
            math.exp(best_s),
        )
    return RefineResult(
        scale=math.exp(best_s),
        log_scale=best_s,
        steps=step,
        losses=losses,
        h_star=h_star,
        loss=best_loss,
        converged=converged,
    )
