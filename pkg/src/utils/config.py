"""
Specrec Configuration
ScenarioConfig: every case-study parameter, loaded from a sectioned YAML file
"""

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from src.channel.attack import AttackMode, AttackScenario
from src.channel.channel_model import ChannelParams, GridSpec, Transmitter
from src.data.normalization import NormalizationSpec
from src.recovery.denoiser import DenoiserConfig, TrainConfig
from src.recovery.diffusion import GuidanceConfig, NoiseSchedule
from src.utils.errors import ConfigError, MissingFileError, SpecRecError
from src.utils.helpers import PathLike

logger = logging.getLogger(__name__)

DEFAULT_PROBABILITIES = (0.3, 0.4, 0.5, 0.6, 0.7)


@dataclass(frozen=True)
class DenoiserSection:
    """Denoiser sizes as configured; the image size comes from the grid"""
    base_channels: int = 64
    channel_mults: Tuple[int, ...] = (1, 2, 2, 4)
    num_res_blocks: int = 2
    attention_resolutions: Tuple[int, ...] = (16,)
    time_emb_dim: int = 256
    groups: int = 8
    num_heads: int = 4


@dataclass(frozen=True)
class EvaluationConfig:
    """Scenario grid swept by the evaluator"""
    modes: Tuple[AttackMode, ...] = (AttackMode.GROUND, AttackMode.AIRBORNE)
    probabilities: Tuple[float, ...] = DEFAULT_PROBABILITIES
    seeds: int = 10

    def __post_init__(self):
        if self.seeds < 1:
            raise ConfigError(f"evaluation.seeds must be at least 1, got {self.seeds}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full generative description of a case-study run"""
    grid: GridSpec = field(default_factory=GridSpec)
    tx: Transmitter = field(default_factory=Transmitter)
    channel: ChannelParams = field(default_factory=ChannelParams)
    attack: AttackScenario = field(default_factory=AttackScenario)
    normalization: NormalizationSpec = field(default_factory=NormalizationSpec)
    schedule: NoiseSchedule = field(default_factory=NoiseSchedule)
    diffusion: GuidanceConfig = field(default_factory=GuidanceConfig)
    denoiser: DenoiserSection = field(default_factory=DenoiserSection)
    training: TrainConfig = field(default_factory=TrainConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    dataset_count: int = 4096
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Cross-field consistency"""
        n = self.diffusion.lowpass_factor
        if self.grid.rows % n or self.grid.cols % n:
            raise ConfigError(f"diffusion.lowpass_factor {n} does not divide grid {self.grid.rows}x{self.grid.cols}")
        if self.diffusion.t_star > self.schedule.timesteps:
            raise ConfigError(
                f"diffusion.t_star {self.diffusion.t_star} exceeds diffusion.timesteps {self.schedule.timesteps}"
            )
        if self.dataset_count < 1:
            raise ConfigError(f"dataset.count must be at least 1, got {self.dataset_count}")

    def denoiser_config(self) -> DenoiserConfig:
        """Architecture for this grid; the U-Net needs a square grid"""
        if self.grid.rows != self.grid.cols:
            raise ConfigError(f"The denoiser needs a square grid, got {self.grid.rows}x{self.grid.cols}")
        try:
            return DenoiserConfig(image_size=self.grid.rows, **asdict(self.denoiser))
        except SpecRecError as e:
            raise ConfigError(f"denoiser: {e}") from e

    def override(self, section: str, **values: Any) -> "ScenarioConfig":
        """Copy with some keys of one section replaced; None values are ignored"""
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        try:
            return replace(self, **{section: replace(getattr(self, section), **values)})
        except (AttributeError, TypeError, ValueError) as e:
            raise ConfigError(f"{section}: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        """Plain nested dict in the config-file layout"""
        data = {
            "grid": grid_to_dict(self.grid),
            "transmitter": _plain(asdict(self.tx)),
            "channel": asdict(self.channel),
            "attack": _plain(asdict(self.attack)),
            "normalization": self.normalization.to_dict(),
            "diffusion": {**self.schedule.to_dict(), **asdict(self.diffusion)},
            "denoiser": _plain(asdict(self.denoiser)),
            "training": asdict(self.training),
            "dataset": {"count": self.dataset_count},
            "evaluation": _plain(asdict(self.evaluation)),
            "seed": self.seed,
        }
        data["attack"].pop("seed", None)
        return data

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def summary(self) -> str:
        return (
            f"grid {self.grid.rows}x{self.grid.cols}@{self.grid.cell_size_m}m alt {self.grid.sampling_altitude_m}m | "
            f"tx {self.tx.power_dbm}dBm {self.tx.frequency_hz / 1e9:g}GHz | "
            f"attack {self.attack.label} | T={self.schedule.timesteps} t*={self.diffusion.t_star} "
            f"K={self.diffusion.rounds} N={self.diffusion.lowpass_factor} "
            f"guidance={'on' if self.diffusion.guidance_enabled else 'off'} | seed {self.seed}"
        )

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "ScenarioConfig":
        """Build from the config-file layout; unknown keys are rejected"""
        data = dict(data or {})
        known = {"project", "grid", "transmitter", "channel", "attack", "normalization",
                 "diffusion", "denoiser", "training", "dataset", "evaluation", "seed"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown config sections: {', '.join(sorted(unknown))}")

        diffusion = _section(data, "diffusion")
        schedule_keys = {"timesteps", "beta_start", "beta_end"}
        schedule_part = {k: v for k, v in diffusion.items() if k in schedule_keys}
        guidance_part = {k: v for k, v in diffusion.items() if k not in schedule_keys}

        attack = _section(data, "attack")
        if "mode" in attack:
            attack["mode"] = _enum(AttackMode, attack["mode"], "attack.mode")
        if attack.get("ground_position_m") is not None:
            attack["ground_position_m"] = tuple(float(v) for v in attack["ground_position_m"])

        transmitter = _section(data, "transmitter")
        if "position_m" in transmitter:
            transmitter["position_m"] = tuple(float(v) for v in transmitter["position_m"])

        evaluation = _section(data, "evaluation")
        if "modes" in evaluation:
            evaluation["modes"] = tuple(_enum(AttackMode, m, "evaluation.modes") for m in evaluation["modes"])
        if "probabilities" in evaluation:
            evaluation["probabilities"] = tuple(float(p) for p in evaluation["probabilities"])

        denoiser = _section(data, "denoiser")
        for key in ("channel_mults", "attention_resolutions"):
            if key in denoiser:
                denoiser[key] = tuple(int(v) for v in denoiser[key])

        dataset = _section(data, "dataset")
        unknown = set(dataset) - {"count"}
        if unknown:
            raise ConfigError(f"Unknown keys in dataset: {', '.join(sorted(unknown))}")

        try:
            return cls(
                grid=grid_from_dict(_section(data, "grid")),
                tx=_build(Transmitter, "transmitter", transmitter),
                channel=_build(ChannelParams, "channel", _section(data, "channel")),
                attack=_build(AttackScenario, "attack", attack),
                normalization=_build(NormalizationSpec, "normalization", _section(data, "normalization")),
                schedule=_build(NoiseSchedule, "diffusion", schedule_part),
                diffusion=_build(GuidanceConfig, "diffusion", guidance_part),
                denoiser=_build(DenoiserSection, "denoiser", denoiser),
                training=_build(TrainConfig, "training", _section(data, "training")),
                evaluation=_build(EvaluationConfig, "evaluation", evaluation),
                dataset_count=int(dataset.get("count", 4096)),
                seed=int(data.get("seed", 0)),
            )
        except (TypeError, ValueError) as e:
            if isinstance(e, SpecRecError):
                raise ConfigError(str(e)) from e
            raise ConfigError(f"Invalid config value: {e}") from e

    @classmethod
    def load(cls, path: PathLike) -> "ScenarioConfig":
        """Read a YAML config file"""
        path = Path(path)
        if not path.exists():
            raise MissingFileError(f"Config file not found: {path}")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: malformed YAML ({e})") from e
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping of sections")
        config = cls.from_dict(data)
        logger.debug("Loaded config from %s", path)
        return config


def grid_to_dict(grid: GridSpec) -> Dict[str, Any]:
    data = asdict(grid)
    data["origin_m"] = [float(v) for v in grid.origin_m]
    return data


def grid_from_dict(data: Dict[str, Any]) -> GridSpec:
    data = dict(data)
    if "origin_m" in data:
        data["origin_m"] = tuple(float(v) for v in data["origin_m"])
    return _build(GridSpec, "grid", data)


def _section(data: Dict[str, Any], name: str) -> Dict[str, Any]:
    section = data.get(name) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"Section '{name}' must be a mapping")
    return dict(section)


def _build(cls, name: str, values: Dict[str, Any]):
    types = {f.name: f.type for f in fields(cls) if f.init}
    unknown = set(values) - set(types)
    if unknown:
        raise ConfigError(f"Unknown keys in {name}: {', '.join(sorted(unknown))}")
    try:
        # YAML reads "1e-4" as a string
        values = {
            k: float(v) if types[k] is float and isinstance(v, (str, int)) and not isinstance(v, bool) else v
            for k, v in values.items()
        }
        return cls(**values)
    except SpecRecError as e:
        raise ConfigError(f"{name}: {e}") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name}: invalid value ({e})") from e


def _enum(enum_cls, value, name: str):
    try:
        return enum_cls(str(value).lower())
    except ValueError as e:
        choices = ", ".join(m.value for m in enum_cls)
        raise ConfigError(f"{name}: '{value}' is not one of {choices}") from e


def _plain(value):
    """Enums to their values and tuples to lists, recursively"""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value
