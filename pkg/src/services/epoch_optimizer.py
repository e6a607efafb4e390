"""
Per-sequence pseudo camera height: epoch aggregation, the weighted moving
average across epochs and the supervision each epoch trains against.

Two epoch conventions meet here. Moving-average epochs are numbered from 1
(`SequenceState.epoch` is the last completed one). The loss weight schedule
uses the zero-based training epoch, i.e. moving-average epoch minus one.
"""

import logging
from dataclasses import replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from src.errors import EpochSkippedError, InvalidInputError
from src.models.supervision import EpochHistory, FrameRecord, SequenceState, SupervisionMode, parse_mode

logger = logging.getLogger(__name__)


def start_sequence(
    sequence_id: str,
    mode: Union[str, SupervisionMode] = "online",
    unfreeze_epoch: Optional[int] = None,
    offline_height: Optional[float] = None,
) -> SequenceState:
    """Fresh state for a sequence; `mode` may be a string such as `finetune:20`."""
    if isinstance(mode, SupervisionMode):
        parsed, unfreeze = mode, unfreeze_epoch
    else:
        parsed, unfreeze = parse_mode(mode)
    if parsed is SupervisionMode.FINETUNE and unfreeze is None:
        raise InvalidInputError("Fine-tune mode needs an unfreeze epoch")
    if offline_height is not None and not offline_height > 0:
        raise InvalidInputError(f"Offline height must be positive, got {offline_height}")
    return SequenceState(
        sequence_id=sequence_id,
        mode=parsed,
        unfreeze_epoch=unfreeze,
        offline_height=offline_height,
        h_star=None if parsed is SupervisionMode.ONLINE else offline_height,
    )


def _present_heights(records: Iterable[FrameRecord]) -> Sequence[float]:
    return [r.scaled_height for r in records if r.scaled_height is not None]


def epoch_camera_height(records: Iterable[FrameRecord]) -> float:
    """Median of the scaled heights of one sequence in one epoch."""
    heights = _present_heights(records)
    if not heights:
        raise EpochSkippedError("No frame produced a scaled camera height this epoch")
    return float(np.median(heights))


def estimate_offline_height(records: Iterable[FrameRecord]) -> float:
    """Fixed pseudo camera height from a pre-pass over the sequence."""
    heights = _present_heights(records)
    if not heights:
        raise EpochSkippedError("Pre-pass produced no scaled camera height")
    return float(np.median(heights))


def weighted_moving_average(previous: Optional[float], height: float, k: int) -> float:
    """k-th update of the linearly weighted average; k starts at 1."""
    if k < 1:
        raise InvalidInputError(f"Update index starts at 1, got {k}")
    if k == 1 or previous is None:
        return height
    return (k * (k - 1) / 2 * previous + k * height) / (k * (k + 1) / 2)


def closed_form_average(heights: Sequence[float]) -> float:
    """sum(k * H_k) / sum(k) over applied updates."""
    values = np.asarray(heights, dtype=np.float64)
    if values.size == 0:
        raise InvalidInputError("Need at least one epoch height")
    k = np.arange(1, values.size + 1, dtype=np.float64)
    return float(np.dot(k, values) / k.sum())


def _supervision_after(state: SequenceState, completed: int, moving: Optional[float]) -> Optional[float]:
    if state.mode is SupervisionMode.ONLINE:
        return moving
    if state.mode is SupervisionMode.OFFLINE:
        return state.offline_height
    if completed < state.unfreeze_epoch or moving is None:
        return state.offline_height
    return moving


def skip_epoch(state: SequenceState) -> SequenceState:
    """Close an epoch with no usable frames: the epoch counter advances, H* does not change."""
    completed = state.epoch + 1
    h_star = _supervision_after(state, completed, state.moving_height)
    entry = EpochHistory(epoch=completed, epoch_height=None, moving_height=state.moving_height, h_star=h_star)
    logger.info("Sequence %s: epoch %d skipped", state.sequence_id, completed)
    return replace(state, epoch=completed, h_star=h_star, history=state.history + (entry,))


def update_supervision(state: SequenceState, epoch_height: Optional[float]) -> SequenceState:
    """Close an epoch with its representative height."""
    if epoch_height is None or not epoch_height > 0:
        if epoch_height is not None:
            logger.warning("Sequence %s: rejected epoch height %s", state.sequence_id, epoch_height)
        return skip_epoch(state)

    completed = state.epoch + 1
    updates = state.updates + 1
    moving = weighted_moving_average(state.moving_height, float(epoch_height), updates)
    h_star = _supervision_after(state, completed, moving)
    entry = EpochHistory(epoch=completed, epoch_height=float(epoch_height), moving_height=moving, h_star=h_star)
    logger.info(
        "Sequence %s: epoch %d height %.4f, moving %.4f, supervision %s",
        state.sequence_id,
        completed,
        epoch_height,
        moving,
        "none" if h_star is None else f"{h_star:.4f}",
    )
    return replace(
        state,
        epoch=completed,
        updates=updates,
        moving_height=moving,
        h_star=h_star,
        history=state.history + (entry,),
    )


def close_epoch(state: SequenceState, records: Iterable[FrameRecord]) -> SequenceState:
    """Aggregate one epoch's records and update the state."""
    try:
        height = epoch_camera_height(records)
    except EpochSkippedError:
        return skip_epoch(state)
    return update_supervision(state, height)


def supervision_for_epoch(state: SequenceState, tau: int) -> Optional[float]:
    """H* used while training epoch tau (1-based); None when nothing is available."""
    if tau < 1:
        raise InvalidInputError(f"Epochs are numbered from 1, got {tau}")
    if tau == 1:
        return None if state.mode is SupervisionMode.ONLINE else state.offline_height
    for entry in state.history:
        if entry.epoch == tau - 1:
            return entry.h_star
    return None
