"""
Tests for the per-sequence pseudo camera height across epochs.
"""

import numpy as np
import pytest

from src.errors import ConfigError, EpochSkippedError, InvalidInputError
from src.models.supervision import FrameRecord, SequenceState, SupervisionMode, parse_mode
from src.services.epoch_optimizer import (
    close_epoch,
    closed_form_average,
    epoch_camera_height,
    estimate_offline_height,
    skip_epoch,
    start_sequence,
    supervision_for_epoch,
    update_supervision,
    weighted_moving_average,
)


def _records(*heights):
    return [FrameRecord(frame_id=f"{i:06d}", sequence_id="seq", scaled_height=h) for i, h in enumerate(heights)]


class TestParseMode:
    """Test supervision mode strings."""

    def test_modes(self):
        assert parse_mode("online") == (SupervisionMode.ONLINE, None)
        assert parse_mode("OFFLINE") == (SupervisionMode.OFFLINE, None)
        assert parse_mode("finetune:20") == (SupervisionMode.FINETUNE, 20)

    @pytest.mark.parametrize("text", ["batch", "finetune", "finetune:x", "finetune:-1", "online:3"])
    def test_invalid(self, text):
        with pytest.raises(ConfigError):
            parse_mode(text)


class TestEpochCameraHeight:
    """Test the per-epoch median."""

    def test_odd_count(self):
        assert epoch_camera_height(_records(1.6, 1.5, 1.7)) == 1.6

    def test_even_count_midpoint(self):
        assert epoch_camera_height(_records(1.5, 1.6, 1.7, 1.8)) == pytest.approx(1.65)

    def test_frames_without_height_are_ignored(self):
        records = _records(1.5, 1.7) + [FrameRecord(frame_id="x", sequence_id="seq")]
        assert epoch_camera_height(records) == pytest.approx(1.6)

    def test_no_height(self):
        with pytest.raises(EpochSkippedError):
            epoch_camera_height([FrameRecord(frame_id="x", sequence_id="seq")])

    def test_record_rejects_nonpositive_height(self):
        with pytest.raises(InvalidInputError, match="positive"):
            FrameRecord(frame_id="x", sequence_id="seq", scaled_height=0.0)


class TestWeightedMovingAverage:
    """Test the linearly weighted running average."""

    def test_first_update(self):
        assert weighted_moving_average(None, 1.5, 1) == 1.5

    def test_second_update(self):
        assert weighted_moving_average(1.5, 1.8, 2) == pytest.approx(1.7)

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_closed_form(self, seed):
        heights = np.random.default_rng(seed).uniform(0.5, 3.0, size=30)
        running = None
        for k, height in enumerate(heights, start=1):
            running = weighted_moving_average(running, float(height), k)
            assert running == pytest.approx(closed_form_average(heights[:k]), abs=1e-12)

    def test_closed_form_accepts_lists_and_arrays(self):
        heights = [1.5, 1.8, 1.2]
        expected = (1.5 + 2 * 1.8 + 3 * 1.2) / 6
        assert closed_form_average(heights) == pytest.approx(expected, abs=1e-15)
        assert closed_form_average(np.array(heights)) == pytest.approx(expected, abs=1e-15)
        assert closed_form_average(np.array([1.65])) == 1.65

    def test_empty_array_closed_form(self):
        with pytest.raises(InvalidInputError):
            closed_form_average(np.array([]))

    def test_constant_is_fixed_point(self):
        running = None
        for k in range(1, 30):
            running = weighted_moving_average(running, 1.65, k)
        assert running == pytest.approx(1.65, abs=1e-12)

    def test_index_starts_at_one(self):
        with pytest.raises(InvalidInputError):
            weighted_moving_average(1.5, 1.5, 0)

    def test_empty_closed_form(self):
        with pytest.raises(InvalidInputError):
            closed_form_average([])


class TestOnlineSupervision:
    """Test state updates in online mode."""

    def test_start(self):
        state = start_sequence("seq")
        assert state.epoch == 0 and state.updates == 0
        assert state.h_star is None
        assert supervision_for_epoch(state, 1) is None

    def test_two_epochs(self):
        state = close_epoch(start_sequence("seq"), _records(1.4, 1.5, 1.6))
        assert state.h_star == pytest.approx(1.5)
        state = close_epoch(state, _records(1.8))
        assert state.epoch == 2 and state.updates == 2
        assert state.h_star == pytest.approx(1.7)
        assert supervision_for_epoch(state, 2) == pytest.approx(1.5)
        assert supervision_for_epoch(state, 3) == pytest.approx(1.7)
        assert [entry.epoch for entry in state.history] == [1, 2]

    def test_two_epoch_state_example(self):
        """Median heights 1.70 then 1.68 give H* = (1.70 + 2 * 1.68) / 3."""
        state = close_epoch(close_epoch(start_sequence("sim-00"), _records(1.70)), _records(1.68))
        assert round(state.h_star, 4) == 1.6867
        assert round(state.moving_height, 4) == 1.6867

    def test_skipped_epoch_keeps_weights(self):
        """A skipped epoch advances the epoch count but not the update index."""
        state = close_epoch(start_sequence("seq"), _records(1.5))
        state = close_epoch(state, [FrameRecord(frame_id="x", sequence_id="seq")])
        assert state.epoch == 2 and state.updates == 1
        assert state.h_star == pytest.approx(1.5)
        assert state.history[-1].epoch_height is None
        state = close_epoch(state, _records(1.8))
        assert state.h_star == pytest.approx(1.7)

    def test_finetune_trains_on_offline_height_through_unfreeze_epoch(self):
        """finetune:N keeps the offline height for epochs 1 to N and follows the average from N + 1."""
        state = start_sequence("seq", "finetune:2", offline_height=1.6)
        for height in (1.5, 1.8, 1.9):
            state = close_epoch(state, _records(height))
        assert [supervision_for_epoch(state, tau) for tau in (1, 2)] == [1.6, 1.6]
        assert supervision_for_epoch(state, 3) == pytest.approx(1.7)
        assert supervision_for_epoch(state, 4) == pytest.approx((1.5 + 2 * 1.8 + 3 * 1.9) / 6)

    def test_skip_before_any_height(self):
        state = skip_epoch(start_sequence("seq"))
        assert state.epoch == 1
        assert state.h_star is None
        assert supervision_for_epoch(state, 2) is None

    def test_rejected_height(self):
        state = update_supervision(start_sequence("seq"), -1.0)
        assert state.updates == 0 and state.epoch == 1

    def test_epochs_numbered_from_one(self):
        with pytest.raises(InvalidInputError):
            supervision_for_epoch(start_sequence("seq"), 0)

    def test_future_epoch(self):
        assert supervision_for_epoch(close_epoch(start_sequence("seq"), _records(1.5)), 5) is None


class TestOfflineAndFinetune:
    """Test fixed and delayed supervision."""

    def test_offline_height_is_constant(self):
        offline = estimate_offline_height(_records(1.5, 1.6, 1.7))
        state = start_sequence("seq", "offline", offline_height=offline)
        assert supervision_for_epoch(state, 1) == pytest.approx(1.6)
        for height in (1.2, 2.0, 1.9):
            state = close_epoch(state, _records(height))
            assert state.h_star == pytest.approx(1.6)
        assert state.moving_height is not None

    def test_finetune_switches_at_unfreeze_epoch(self):
        state = start_sequence("seq", "finetune:2", offline_height=1.6)
        assert state.unfreeze_epoch == 2
        state = close_epoch(state, _records(1.5))
        assert state.h_star == pytest.approx(1.6)
        state = close_epoch(state, _records(1.8))
        assert state.h_star == pytest.approx(1.7)

    def test_finetune_needs_epoch(self):
        with pytest.raises(InvalidInputError):
            start_sequence("seq", SupervisionMode.FINETUNE)

    def test_offline_height_positive(self):
        with pytest.raises(InvalidInputError):
            start_sequence("seq", "offline", offline_height=0.0)

    def test_offline_prepass_without_heights(self):
        with pytest.raises(EpochSkippedError):
            estimate_offline_height([])


class TestStateSerialization:
    """Test the persisted form of a sequence state."""

    def test_dict_round_trip(self):
        state = close_epoch(start_sequence("seq", "finetune:3", offline_height=1.6), _records(1.5, 1.55))
        restored = SequenceState.from_dict(state.to_dict())
        assert restored == state
        assert restored.mode is SupervisionMode.FINETUNE

    def test_history_is_json_friendly(self):
        data = close_epoch(start_sequence("seq"), _records(1.5)).to_dict()
        assert data["history"] == [{"epoch": 1, "epoch_height": 1.5, "moving_height": 1.5, "h_star": 1.5}]
