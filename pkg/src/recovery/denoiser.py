"""
Specrec Denoiser
Time-conditioned U-Net noise predictor with self-attention, and the
checkpoint container that carries it between training and inference
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from src.data.normalization import NormalizationSpec
from src.recovery.diffusion import NoiseSchedule
from src.utils.errors import DimensionMismatchError, DomainError, ModelMismatchError, MissingFileError
from src.utils.helpers import PathLike, atomic_write

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class DenoiserConfig:
    """Architecture sizes; every level after the first halves the feature map"""
    image_size: int = 128
    base_channels: int = 64
    channel_mults: Tuple[int, ...] = (1, 2, 2, 4)
    num_res_blocks: int = 2
    attention_resolutions: Tuple[int, ...] = (16,)
    time_emb_dim: int = 256
    groups: int = 8
    num_heads: int = 4
    zero_init_output: bool = True

    def __post_init__(self):
        object.__setattr__(self, "channel_mults", tuple(int(m) for m in self.channel_mults))
        object.__setattr__(self, "attention_resolutions", tuple(int(r) for r in self.attention_resolutions))
        if self.base_channels < 1 or self.num_res_blocks < 1 or self.time_emb_dim < 2:
            raise DomainError("Denoiser sizes must be positive")
        if self.time_emb_dim % 2:
            raise DomainError(f"time_emb_dim must be even, got {self.time_emb_dim}")
        if self.image_size % (2 ** (len(self.channel_mults) - 1)):
            raise DomainError(
                f"image_size {self.image_size} cannot be halved {len(self.channel_mults) - 1} times"
            )
        for mult in self.channel_mults:
            channels = self.base_channels * mult
            if channels % self.groups or channels % self.num_heads:
                raise DomainError(
                    f"{channels} channels not divisible by groups={self.groups} / heads={self.num_heads}"
                )

    @property
    def resolutions(self) -> List[int]:
        return [self.image_size // 2 ** i for i in range(len(self.channel_mults))]

    def to_dict(self) -> dict:
        data = asdict(self)
        data["channel_mults"] = list(self.channel_mults)
        data["attention_resolutions"] = list(self.attention_resolutions)
        return data


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and bookkeeping settings; ema_decay of 0 disables the EMA copy"""
    steps: int = 30000
    batch_size: int = 16
    learning_rate: float = 2e-4
    ema_decay: float = 0.999
    seed: int = 0
    checkpoint_every: int = 1000

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1 or self.checkpoint_every < 1:
            raise DomainError("steps, batch_size and checkpoint_every must be positive")
        if self.learning_rate <= 0:
            raise DomainError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.ema_decay < 1.0:
            raise DomainError(f"ema_decay must lie in [0, 1), got {self.ema_decay}")


def _conv3x3(in_ch: int, out_ch: int, stride: int = 1) -> nn.Conv2d:
    # reflect padding keeps a spatially constant map constant
    return nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, padding_mode="reflect")


class SinusoidalTimeEmbedding(nn.Module):
    """Transformer-style sinusoidal encoding of the timestep"""

    def __init__(self, dim: int):
        super().__init__()
        self.dim = dim

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        half = self.dim // 2
        freqs = torch.exp(
            -math.log(10000.0) * torch.arange(half, device=t.device, dtype=torch.float64) / half
        )
        angles = t.to(torch.float64)[:, None] * freqs[None, :]
        return torch.cat([torch.sin(angles), torch.cos(angles)], dim=1)


class ResidualBlock(nn.Module):
    """GroupNorm-SiLU-conv twice, with the time embedding added in between"""

    def __init__(self, in_ch: int, out_ch: int, time_dim: int, groups: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(groups, in_ch)
        self.conv1 = _conv3x3(in_ch, out_ch)
        self.time_proj = nn.Linear(time_dim, out_ch)
        self.norm2 = nn.GroupNorm(groups, out_ch)
        self.conv2 = _conv3x3(out_ch, out_ch)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: torch.Tensor, t_emb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(t_emb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class AttentionBlock(nn.Module):
    """Multi-head self-attention over all spatial positions"""

    def __init__(self, channels: int, num_heads: int, groups: int):
        super().__init__()
        self.norm = nn.GroupNorm(groups, channels)
        self.attn = nn.MultiheadAttention(channels, num_heads, batch_first=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, h, w = x.shape
        tokens = self.norm(x).reshape(b, c, h * w).transpose(1, 2)
        out, _ = self.attn(tokens, tokens, tokens, need_weights=False)
        return x + out.transpose(1, 2).reshape(b, c, h, w)


class Downsample(nn.Module):
    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.conv = _conv3x3(in_ch, out_ch, stride=2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(x)


class Upsample(nn.Module):
    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.conv = _conv3x3(in_ch, out_ch)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(F.interpolate(x, scale_factor=2, mode="nearest"))


class UNet(nn.Module):
    """
    Encoder-decoder noise predictor

    Each encoder level runs num_res_blocks residual blocks (attention after each
    one at the configured resolutions) and keeps its output as a skip. The
    bottleneck is residual-attention-residual. The decoder mirrors the encoder.
    """

    def __init__(self, config: DenoiserConfig):
        super().__init__()
        self.config = config
        chs = [config.base_channels * m for m in config.channel_mults]
        time_dim = config.time_emb_dim
        groups = config.groups

        self.time_embed = SinusoidalTimeEmbedding(time_dim)
        self.time_mlp = nn.Sequential(
            nn.Linear(time_dim, time_dim),
            nn.SiLU(),
            nn.Linear(time_dim, time_dim),
        )
        self.in_conv = _conv3x3(1, chs[0])

        self.downs = nn.ModuleList()
        for i, (ch, res) in enumerate(zip(chs, config.resolutions)):
            level = nn.ModuleDict({
                "blocks": nn.ModuleList([ResidualBlock(ch, ch, time_dim, groups) for _ in range(config.num_res_blocks)]),
                "attn": nn.ModuleList([
                    AttentionBlock(ch, config.num_heads, groups) if res in config.attention_resolutions else nn.Identity()
                    for _ in range(config.num_res_blocks)
                ]),
                "down": Downsample(ch, chs[i + 1]) if i < len(chs) - 1 else nn.Identity(),
            })
            self.downs.append(level)

        self.mid1 = ResidualBlock(chs[-1], chs[-1], time_dim, groups)
        self.mid_attn = AttentionBlock(chs[-1], config.num_heads, groups)
        self.mid2 = ResidualBlock(chs[-1], chs[-1], time_dim, groups)

        self.ups = nn.ModuleList()
        for i in reversed(range(len(chs))):
            ch, res = chs[i], config.resolutions[i]
            level = nn.ModuleDict({
                "up": Upsample(chs[i + 1], ch) if i < len(chs) - 1 else nn.Identity(),
                "blocks": nn.ModuleList(
                    [ResidualBlock(ch * 2, ch, time_dim, groups)]
                    + [ResidualBlock(ch, ch, time_dim, groups) for _ in range(config.num_res_blocks - 1)]
                ),
                "attn": nn.ModuleList([
                    AttentionBlock(ch, config.num_heads, groups) if res in config.attention_resolutions else nn.Identity()
                    for _ in range(config.num_res_blocks)
                ]),
            })
            self.ups.append(level)

        self.out_norm = nn.GroupNorm(groups, chs[0])
        self.out_conv = _conv3x3(chs[0], 1)
        if config.zero_init_output:
            nn.init.zeros_(self.out_conv.weight)
            nn.init.zeros_(self.out_conv.bias)

    def forward(self, x: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        """
        x: (B, 1, H, W) noisy unit-range grids
        t: (B,) integer timesteps
        """
        t_emb = self.time_mlp(self.time_embed(t).to(x.dtype))
        h = self.in_conv(x)

        skips = []
        for level in self.downs:
            for block, attn in zip(level["blocks"], level["attn"]):
                h = attn(block(h, t_emb))
            skips.append(h)
            h = level["down"](h)

        h = self.mid2(self.mid_attn(self.mid1(h, t_emb)), t_emb)

        for level in self.ups:
            h = level["up"](h)
            h = torch.cat([h, skips.pop()], dim=1)
            for block, attn in zip(level["blocks"], level["attn"]):
                h = attn(block(h, t_emb))

        return self.out_conv(F.silu(self.out_norm(h)))


@dataclass
class DenoiserModel:
    """A U-Net bundled with the schedule and normalization it was trained for"""
    network: UNet
    schedule: NoiseSchedule
    normalization: NormalizationSpec = field(default_factory=NormalizationSpec)
    trained_steps: int = 0

    @classmethod
    def create(
        cls,
        config: DenoiserConfig,
        schedule: NoiseSchedule,
        normalization: Optional[NormalizationSpec] = None,
        seed: int = 0,
    ) -> "DenoiserModel":
        """Freshly initialized model; parameters depend only on (config, seed)"""
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            network = UNet(config)
        network.eval()
        return cls(network, schedule, normalization or NormalizationSpec())

    @property
    def config(self) -> DenoiserConfig:
        return self.network.config

    @property
    def image_shape(self) -> Tuple[int, int]:
        return (self.config.image_size, self.config.image_size)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.network.parameters())

    def predict_noise(self, x_t: Union[np.ndarray, torch.Tensor], t: int) -> np.ndarray:
        return predict_noise(self, x_t, t)

    def save(self, path: PathLike) -> Path:
        return save_checkpoint(self, path)


def predict_noise(model: DenoiserModel, x_t: Union[np.ndarray, torch.Tensor], t: int) -> np.ndarray:
    """
    Predicted noise for a grid (H, W) or stack (B, H, W) at timestep t

    Raises:
        DimensionMismatchError: if the grid size differs from the model's
        DomainError: if t lies outside [1, T]
    """
    if not 1 <= t <= model.schedule.T:
        raise DomainError(f"Timestep {t} outside [1, {model.schedule.T}]")
    x = torch.as_tensor(np.asarray(x_t), dtype=torch.float32)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or tuple(x.shape[-2:]) != model.image_shape:
        raise DimensionMismatchError(f"Model expects {model.image_shape} grids, got {tuple(x.shape)}")

    model.network.eval()
    with torch.no_grad():
        timesteps = torch.full((x.shape[0],), int(t), dtype=torch.long)
        eps = model.network(x[:, None], timesteps)[:, 0]
    eps = eps.numpy().astype(np.float64)
    return eps[0] if single else eps


def save_checkpoint(model: DenoiserModel, path: PathLike, extra: Optional[dict] = None) -> Path:
    """Write the model container atomically"""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "state_dict": {k: v.detach().clone() for k, v in model.network.state_dict().items()},
        "shapes": {k: list(v.shape) for k, v in model.network.state_dict().items()},
        "schedule": model.schedule.to_dict(),
        "schedule_hash": model.schedule.fingerprint(),
        "normalization": model.normalization.to_dict(),
        "trained_steps": int(model.trained_steps),
    }
    if extra:
        payload.update(extra)
    return atomic_write(path, lambda tmp: torch.save(payload, tmp))


def load_checkpoint(path: PathLike, schedule: Optional[NoiseSchedule] = None) -> DenoiserModel:
    """
    Rebuild a model from a checkpoint

    Args:
        path: Checkpoint file
        schedule: Schedule the caller intends to use; must hash-match the stored one

    Raises:
        MissingFileError: if the file does not exist
        ModelMismatchError: on format or schedule mismatch
    """
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"Checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise ModelMismatchError(f"{path}: unreadable checkpoint ({e})") from e
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ModelMismatchError(f"{path}: unsupported checkpoint version {payload.get('format_version')}")

    stored_schedule = NoiseSchedule(**payload["schedule"])
    if stored_schedule.fingerprint() != payload["schedule_hash"]:
        raise ModelMismatchError(f"{path}: schedule hash does not match its stored tables")
    if schedule is not None and schedule.fingerprint() != payload["schedule_hash"]:
        raise ModelMismatchError(
            f"{path}: trained with schedule {payload['schedule_hash']}, requested {schedule.fingerprint()}"
        )

    network = UNet(DenoiserConfig(**payload["config"]))
    network.load_state_dict(payload["state_dict"])
    network.eval()
    model = DenoiserModel(
        network=network,
        schedule=stored_schedule,
        normalization=NormalizationSpec(**payload["normalization"]),
        trained_steps=int(payload.get("trained_steps", 0)),
    )
    logger.info("Loaded %s (%d parameters, %d steps)", path, model.parameter_count(), model.trained_steps)
    return model
