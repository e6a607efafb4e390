"""
Per-sequence pseudo camera height state and the per-frame records that feed it.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

from src.errors import ConfigError, InvalidInputError


class SupervisionMode(str, Enum):
    ONLINE = "online"
    OFFLINE = "offline"
    FINETUNE = "finetune"


def parse_mode(text: str) -> Tuple[SupervisionMode, Optional[int]]:
    """Parse `online`, `offline` or `finetune:N` into (mode, unfreeze_epoch)."""
    name, _, arg = text.strip().partition(":")
    try:
        mode = SupervisionMode(name.lower())
    except ValueError:
        raise ConfigError(f"Unknown supervision mode '{text}' (expected online, offline or finetune:N)")

    if mode is SupervisionMode.FINETUNE:
        try:
            unfreeze = int(arg)
        except ValueError:
            raise ConfigError(f"Fine-tune mode needs an unfreeze epoch, e.g. finetune:20 (got '{text}')")
        if unfreeze < 0:
            raise ConfigError("Unfreeze epoch must be nonnegative")
        return mode, unfreeze

    if arg:
        raise ConfigError(f"Mode '{name}' takes no argument")
    return mode, None


@dataclass(frozen=True)
class FrameRecord:
    """Outcome of one frame in one epoch."""

    frame_id: str
    sequence_id: str
    scaled_height: Optional[float] = None
    inlier_count: int = 0

    def __post_init__(self):
        if self.scaled_height is not None and not self.scaled_height > 0:
            raise InvalidInputError(f"Scaled height must be positive, got {self.scaled_height}")


@dataclass(frozen=True)
class EpochHistory:
    """One completed epoch: representative height, moving average and supervision for the next epoch."""

    epoch: int
    epoch_height: Optional[float]
    moving_height: Optional[float]
    h_star: Optional[float]

    def to_dict(self):
        return {
            "epoch": self.epoch,
            "epoch_height": self.epoch_height,
            "moving_height": self.moving_height,
            "h_star": self.h_star,
        }


@dataclass(frozen=True)
class SequenceState:
    """Pseudo camera height of one sequence.

    `epoch` counts completed epochs (1-based epochs, so it equals the index of
    the last finished one). `updates` counts applied moving-average updates
    and is the weight index of the next one; skipped epochs advance `epoch`
    only. `h_star` is the supervision for epoch `epoch + 1`.
    """

    sequence_id: str
    mode: SupervisionMode = SupervisionMode.ONLINE
    unfreeze_epoch: Optional[int] = None
    offline_height: Optional[float] = None
    epoch: int = 0
    updates: int = 0
    moving_height: Optional[float] = None
    h_star: Optional[float] = None
    history: Tuple[EpochHistory, ...] = field(default_factory=tuple)

    def to_dict(self):
        return {
            "sequence_id": self.sequence_id,
            "mode": self.mode.value,
            "unfreeze_epoch": self.unfreeze_epoch,
            "offline_height": self.offline_height,
            "epoch": self.epoch,
            "updates": self.updates,
            "moving_height": self.moving_height,
            "h_star": self.h_star,
            "history": [entry.to_dict() for entry in self.history],
        }

    @classmethod
    def from_dict(cls, data) -> "SequenceState":
        return cls(
            sequence_id=str(data["sequence_id"]),
            mode=SupervisionMode(data.get("mode", "online")),
            unfreeze_epoch=data.get("unfreeze_epoch"),
            offline_height=data.get("offline_height"),
            epoch=int(data.get("epoch", 0)),
            updates=int(data.get("updates", 0)),
            moving_height=data.get("moving_height"),
            h_star=data.get("h_star"),
            history=tuple(EpochHistory(**entry) for entry in data.get("history", [])),
        )
