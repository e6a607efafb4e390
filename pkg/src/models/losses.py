"""
Loss weights and the per-frame loss breakdown.
"""

import math
from dataclasses import dataclass

from src.errors import ConfigError


@dataclass(frozen=True)
class LossWeights:
    """Published constants of the photometric and scale losses."""

    lambda_pe: float = 0.85
    alpha: float = 0.01
    beta: float = 0.5
    epsilon: float = 0.005
    tau_mid: int = 20

    def __post_init__(self):
        if not 0.0 < self.lambda_pe < 1.0:
            raise ConfigError(f"lambda_pe must lie in (0, 1), got {self.lambda_pe}")
        for name in ("alpha", "beta", "epsilon"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be positive, got {value}")
        if int(self.tau_mid) != self.tau_mid or self.tau_mid < 1:
            raise ConfigError(f"tau_mid must be an integer >= 1, got {self.tau_mid}")


@dataclass(frozen=True)
class LossOptions:
    """Switches for ablations and the printed-sign variant of the aux schedule."""

    use_camera_loss: bool = True
    use_aux_loss: bool = True
    balance_weights: bool = True
    literal_aux_sign: bool = False
    automask: bool = True


@dataclass(frozen=True)
class LossBreakdown:
    """Loss terms of one frame at one epoch; absent terms are recorded as None."""

    rec: float
    sm: float
    cam: float
    aux: float
    lambda_aux: float
    lambda_cam: float
    total: float
    rec_present: bool = True
    sm_present: bool = True
    cam_present: bool = True
    aux_present: bool = True

    def to_dict(self):
        return {
            "L_rec": self.rec if self.rec_present else None,
            "L_sm": self.sm if self.sm_present else None,
            "L_cam": self.cam if self.cam_present else None,
            "L_aux": self.aux if self.aux_present else None,
            "lambda_aux": self.lambda_aux,
            "lambda_cam": self.lambda_cam,
            "total": self.total,
        }
