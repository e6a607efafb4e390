"""
Application configuration.
"""

import os
import sys
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple

from dotenv import load_dotenv

from src.errors import ConfigError
from src.models.losses import LossOptions, LossWeights
from src.models.supervision import SupervisionMode, parse_mode

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

load_dotenv()


class Config:
    """Base configuration class."""

    # Runtime configuration
    THREADS = int(os.getenv("CAMH_THREADS", os.cpu_count() or 1))
    LOG_LEVEL = os.getenv("CAMH_LOG_LEVEL", "INFO").upper()

    # Persistence configuration
    STATE_FILE = os.getenv("CAMH_STATE_FILE", "data/camh_state.jsonl")
    HISTORY_DATABASE_PATH = os.getenv("CAMH_HISTORY_DB", "")
    OUT_DIR = os.getenv("CAMH_OUT_DIR", "out")

    # Training schedule
    TAU_MID = 20
    EPOCHS = 55

    # Focal alignment and evaluation crop
    TARGET_FOCAL: Optional[float] = None
    CROP_SIZE: Optional[Tuple[int, int]] = None
    EVAL_CROP: Optional[Tuple[int, int]] = None

    # Sequence preparation
    FRAME_STRIDE = 1
    MIN_FRAMES = 1


class KittiConfig(Config):
    """KITTI raw training setup."""


class CityscapesConfig(Config):
    """Cityscapes setup: focal lengths aligned before cropping."""

    TAU_MID = 12
    EPOCHS = 30
    TARGET_FOCAL = 587.5
    CROP_SIZE = (512, 192)
    EVAL_CROP = (416, 128)


class MultiDatasetConfig(Config):
    """Mixed-dataset setup with per-sequence camera heights."""

    TAU_MID = 4
    EPOCHS = 10
    TARGET_FOCAL = 1000.0
    CROP_SIZE = (832, 512)
    FRAME_STRIDE = 2
    MIN_FRAMES = 2500


class TestingConfig(Config):
    """Testing configuration."""

    THREADS = 1
    EPOCHS = 5
    HISTORY_DATABASE_PATH = ":memory:"


# Configuration mapping
config = {
    "kitti": KittiConfig,
    "cityscapes": CityscapesConfig,
    "multi_dataset": MultiDatasetConfig,
    "testing": TestingConfig,
    "default": KittiConfig,
}


@dataclass(frozen=True)
class FilterSettings:
    threshold: float = 0.2


@dataclass(frozen=True)
class PriorSettings:
    fixed_height: float = 1.59
    dimension_table: Optional[str] = None
    fallback_height: Optional[float] = None


@dataclass(frozen=True)
class StaticFilterSettings:
    enabled: bool = False
    pixel_threshold: float = 0.03
    count_fraction: float = 0.05
    stride: int = 1


@dataclass(frozen=True)
class SupervisionSettings:
    mode: SupervisionMode = SupervisionMode.ONLINE
    unfreeze_epoch: Optional[int] = None
    offline_height: Optional[float] = None
    min_frames: int = 1


@dataclass(frozen=True)
class RefineSettings:
    steps: int = 200
    learning_rate: float = 0.02
    optimizer: str = "adam"
    growth: float = 1.2
    max_learning_rate: float = 0.5
    tolerance: float = 1e-7
    patience: int = 10
    epoch: Optional[int] = None


@dataclass(frozen=True)
class MetricsSettings:
    depth_cap: float = 80.0
    min_depth: float = 1e-3


@dataclass(frozen=True)
class CameraSettings:
    target_focal: Optional[float] = None
    crop_size: Optional[Tuple[int, int]] = None
    eval_crop: Optional[Tuple[int, int]] = None


@dataclass(frozen=True)
class PipelineConfig:
    """Runtime configuration of a pipeline run."""

    preset: str = "default"
    epochs: int = 55
    seed: int = 0
    threads: int = 1
    losses: LossWeights = field(default_factory=LossWeights)
    loss_options: LossOptions = field(default_factory=LossOptions)
    filter: FilterSettings = field(default_factory=FilterSettings)
    prior: PriorSettings = field(default_factory=PriorSettings)
    static_filter: StaticFilterSettings = field(default_factory=StaticFilterSettings)
    supervision: SupervisionSettings = field(default_factory=SupervisionSettings)
    refine: RefineSettings = field(default_factory=RefineSettings)
    metrics: MetricsSettings = field(default_factory=MetricsSettings)
    camera: CameraSettings = field(default_factory=CameraSettings)

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if not self.filter.threshold > 0:
            raise ConfigError("filter.threshold must be positive")
        if not (self.static_filter.pixel_threshold > 0 and 0 < self.static_filter.count_fraction <= 1):
            raise ConfigError("static_filter thresholds must be positive (count_fraction <= 1)")
        if self.static_filter.stride < 1:
            raise ConfigError("static_filter.stride must be >= 1")
        if self.refine.steps < 1 or not self.refine.learning_rate > 0:
            raise ConfigError("refine.steps and refine.learning_rate must be positive")
        if self.refine.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"refine.optimizer must be 'adam' or 'sgd', got '{self.refine.optimizer}'")
        if self.refine.growth < 1.0 or not self.refine.max_learning_rate > 0 or not self.refine.tolerance > 0:
            raise ConfigError("refine.growth must be at least 1; max_learning_rate and tolerance must be positive")
        if not self.metrics.depth_cap > 0:
            raise ConfigError("metrics.depth_cap must be positive")
        if self.supervision.mode is SupervisionMode.FINETUNE and self.supervision.unfreeze_epoch is None:
            raise ConfigError("finetune supervision needs unfreeze_epoch")

    @classmethod
    def from_preset(cls, name: str = "default") -> "PipelineConfig":
        """Build the configuration a named preset describes."""
        try:
            preset = config[name]
        except KeyError:
            raise ConfigError(f"Unknown preset '{name}' (choose from {', '.join(sorted(config))})")

        return cls(
            preset=name,
            epochs=preset.EPOCHS,
            threads=max(1, int(preset.THREADS)),
            losses=LossWeights(tau_mid=preset.TAU_MID),
            static_filter=StaticFilterSettings(stride=preset.FRAME_STRIDE),
            supervision=SupervisionSettings(min_frames=preset.MIN_FRAMES),
            camera=CameraSettings(
                target_focal=preset.TARGET_FOCAL,
                crop_size=preset.CROP_SIZE,
                eval_crop=preset.EVAL_CROP,
            ),
        )

    def with_mode(self, text: str) -> "PipelineConfig":
        mode, unfreeze = parse_mode(text)
        supervision = replace(self.supervision, mode=mode, unfreeze_epoch=unfreeze)
        return replace(self, supervision=supervision)


_SECTIONS = {
    "losses": ("losses", LossWeights),
    "filter": ("filter", FilterSettings),
    "prior": ("prior", PriorSettings),
    "static_filter": ("static_filter", StaticFilterSettings),
    "supervision": ("supervision", SupervisionSettings),
    "refine": ("refine", RefineSettings),
    "metrics": ("metrics", MetricsSettings),
    "camera": ("camera", CameraSettings),
}
_TOP_LEVEL = {"preset", "epochs", "seed", "threads"}


def _apply_section(current, cls, values: Dict[str, Any], section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"Unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    converted = {}
    for key, value in values.items():
        if key == "mode":
            mode, unfreeze = parse_mode(str(value))
            converted["mode"] = mode
            if unfreeze is not None:
                converted["unfreeze_epoch"] = unfreeze
        elif isinstance(value, list):
            converted[key] = tuple(value)
        else:
            converted[key] = value
    try:
        return replace(current, **converted)
    except TypeError as e:
        raise ConfigError(f"Invalid value in [{section}]: {e}")


def config_from_mapping(data: Dict[str, Any], base: Optional[PipelineConfig] = None) -> PipelineConfig:
    """Overlay a parsed TOML mapping on a preset configuration."""
    data = dict(data)
    # The scene table belongs to the simulator and may share the file.
    data.pop("scene", None)

    preset = data.pop("preset", None)
    if base is None or preset is not None:
        base = PipelineConfig.from_preset(preset or "default")

    top = {key: data.pop(key) for key in list(data) if key in _TOP_LEVEL}

    loss_option_names = {f.name for f in fields(LossOptions)}
    changes: Dict[str, Any] = {}
    for section, values in data.items():
        if section not in _SECTIONS:
            raise ConfigError(f"Unknown config section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        attr, cls = _SECTIONS[section]
        if section == "losses":
            option_values = {k: v for k, v in values.items() if k in loss_option_names}
            values = {k: v for k, v in values.items() if k not in loss_option_names}
            changes["loss_options"] = _apply_section(base.loss_options, LossOptions, option_values, section)
        changes[attr] = _apply_section(getattr(base, attr), cls, values, section)

    try:
        return replace(base, **top, **changes)
    except TypeError as e:
        raise ConfigError(f"Invalid top-level config value: {e}")


def load_pipeline_config(path: Optional[str] = None, preset: str = "default") -> PipelineConfig:
    """Load a TOML config file over the named preset."""
    base = PipelineConfig.from_preset(preset)
    if not path:
        return base
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid TOML: {e}")
    return config_from_mapping(data, base)
