"""
Specrec Diffusion
DDPM noise schedule, forward corruption, reverse denoising and the guided
multi-round reconstruction of attacked feature spectra
"""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np

from src.utils.errors import DimensionMismatchError, DomainError, ModelMismatchError
from src.utils.helpers import derive_seed, rng_for

logger = logging.getLogger(__name__)


class NoisePredictor(Protocol):
    """Anything that predicts the injected noise of x_t"""

    image_shape: tuple

    def predict_noise(self, x_t: np.ndarray, t: int) -> np.ndarray:
        ...


@dataclass(frozen=True)
class NoiseSchedule:
    """
    Linear-beta DDPM tables indexed by timestep 0..T

    Index 0 is the clean-data convention: beta_0 = 0 and alpha_bar_0 = 1.
    """
    timesteps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    beta: np.ndarray = field(init=False, repr=False, compare=False)
    alpha: np.ndarray = field(init=False, repr=False, compare=False)
    alpha_bar: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.timesteps < 1:
            raise DomainError(f"Schedule needs at least one step, got {self.timesteps}")
        if not 0.0 < self.beta_start < self.beta_end < 1.0:
            raise DomainError(f"Need 0 < beta_start < beta_end < 1, got {self.beta_start}, {self.beta_end}")

        beta = np.concatenate([[0.0], np.linspace(self.beta_start, self.beta_end, self.timesteps)])
        alpha = 1.0 - beta
        alpha_bar = np.cumprod(alpha)
        for name, table in (("beta", beta), ("alpha", alpha), ("alpha_bar", alpha_bar)):
            table.setflags(write=False)
            object.__setattr__(self, name, table)

    @property
    def T(self) -> int:
        return self.timesteps

    def posterior_variance(self, t: int) -> float:
        """beta_tilde_t = beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)"""
        return float(self.beta[t] * (1.0 - self.alpha_bar[t - 1]) / (1.0 - self.alpha_bar[t]))

    def fingerprint(self) -> str:
        """Stable hash of the tables, stored with checkpoints"""
        digest = hashlib.sha256()
        digest.update(np.int64(self.timesteps).tobytes())
        digest.update(np.ascontiguousarray(self.beta, dtype="<f8").tobytes())
        return digest.hexdigest()[:16]

    def to_dict(self) -> dict:
        return {"timesteps": self.timesteps, "beta_start": self.beta_start, "beta_end": self.beta_end}


@dataclass(frozen=True)
class GuidanceConfig:
    """How the attacked spectrum is pushed through the diffusion chain"""
    t_star: int = 400
    rounds: int = 2
    lowpass_factor: int = 4
    guidance_enabled: bool = True

    def __post_init__(self):
        if self.t_star < 0:
            raise DomainError(f"t_star must be non-negative, got {self.t_star}")
        if self.rounds < 1:
            raise DomainError(f"rounds must be at least 1, got {self.rounds}")
        n = self.lowpass_factor
        if n < 1 or n & (n - 1):
            raise DomainError(f"lowpass_factor must be a power of two, got {n}")

    def validate_for(self, schedule: NoiseSchedule, shape: tuple) -> None:
        if self.t_star > schedule.T:
            raise DomainError(f"t_star {self.t_star} exceeds schedule length {schedule.T}")
        if any(size % self.lowpass_factor for size in shape[-2:]):
            raise DomainError(f"lowpass_factor {self.lowpass_factor} does not divide grid {shape[-2:]}")


def _check_step(t: int, schedule: NoiseSchedule, lowest: int) -> None:
    if not lowest <= t <= schedule.T:
        raise DomainError(f"Timestep {t} outside [{lowest}, {schedule.T}]")


def forward_sample(x0: np.ndarray, t: int, noise: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps"""
    _check_step(t, schedule, 0)
    if np.shape(noise) != np.shape(x0):
        raise DimensionMismatchError(f"Noise shape {np.shape(noise)} does not match {np.shape(x0)}")
    if t == 0:
        return np.array(x0, dtype=np.float64, copy=True)
    a_bar = schedule.alpha_bar[t]
    return np.sqrt(a_bar) * x0 + np.sqrt(1.0 - a_bar) * noise


def reverse_step(
    x_t: np.ndarray,
    t: int,
    eps_hat: np.ndarray,
    schedule: NoiseSchedule,
    z: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    One ancestral DDPM step x_t -> x_{t-1}

    mean = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_t),
    plus sqrt(beta_tilde_t) z; no noise is added at t = 1.
    """
    _check_step(t, schedule, 1)
    beta_t = schedule.beta[t]
    mean = (x_t - beta_t / np.sqrt(1.0 - schedule.alpha_bar[t]) * eps_hat) / np.sqrt(schedule.alpha[t])
    if t == 1 or z is None:
        return mean
    return mean + np.sqrt(schedule.posterior_variance(t)) * z


def lowpass(grid: np.ndarray, n: int) -> np.ndarray:
    """
    Area-mean downsample by n, then nearest-neighbour upsample back

    Works on (H, W) grids and on stacks (..., H, W).
    """
    grid = np.asarray(grid, dtype=np.float64)
    rows, cols = grid.shape[-2:]
    if n < 1 or rows % n or cols % n:
        raise DomainError(f"Low-pass factor {n} does not divide grid {rows}x{cols}")
    if n == 1:
        return grid.copy()
    lead = grid.shape[:-2]
    blocks = grid.reshape(*lead, rows // n, n, cols // n, n).mean(axis=(-3, -1))
    return np.repeat(np.repeat(blocks, n, axis=-2), n, axis=-1)


def _item_seeds(seed: int, batch: int):
    if batch == 1:
        return [seed]
    return [derive_seed(seed, "item", b) for b in range(batch)]


def _draw(seeds, stream: str, round_index: int, t: int, shape) -> np.ndarray:
    """Standard normals for every item, each from its (seed, stream, round, t) stream"""
    return np.stack([rng_for(s, stream, round_index, t).standard_normal(shape) for s in seeds])


def guided_reconstruct(
    y: np.ndarray,
    model: NoisePredictor,
    schedule: NoiseSchedule,
    cfg: GuidanceConfig,
    seed: int,
    progress: Optional[Callable[[int], None]] = None,
) -> np.ndarray:
    """
    Reconstruct attack-free spectra from attacked ones

    Every round noises the current estimate to t_star and walks the reverse chain
    back to 0. With guidance on, each reverse step swaps the low-frequency content
    of the estimate for that of the attacked input noised to the same level.

    Args:
        y: Attacked unit-range grid (H, W) or stack (B, H, W)
        model: Trained noise predictor
        schedule: Noise schedule the model was trained with
        cfg: Depth, rounds and guidance settings
        seed: Base seed for every noise draw
        progress: Called with the number of reverse steps just completed

    Returns:
        Reconstructed grid(s) in [0, 1], same shape as y
    """
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 2
    batch = y[None] if single else y
    if batch.ndim != 3:
        raise DimensionMismatchError(f"Expected (H, W) or (B, H, W) input, got shape {y.shape}")
    if tuple(batch.shape[-2:]) != tuple(model.image_shape):
        raise ModelMismatchError(f"Model expects {tuple(model.image_shape)} grids, got {batch.shape[-2:]}")
    cfg.validate_for(schedule, batch.shape)

    item_shape = batch.shape[1:]
    seeds = _item_seeds(seed, batch.shape[0])
    x = batch.copy()
    for k in range(cfg.rounds):
        if cfg.t_star == 0:
            break
        x = forward_sample(x, cfg.t_star, _draw(seeds, "forward", k, cfg.t_star, item_shape), schedule)
        for t in range(cfg.t_star, 0, -1):
            eps_hat = model.predict_noise(x, t)
            z = _draw(seeds, "reverse", k, t, item_shape) if t > 1 else None
            x = reverse_step(x, t, eps_hat, schedule, z)
            if cfg.guidance_enabled:
                y_t = forward_sample(batch, t - 1, _draw(seeds, "guidance", k, t, item_shape), schedule)
                x = x - lowpass(x, cfg.lowpass_factor) + lowpass(y_t, cfg.lowpass_factor)
            if progress is not None:
                progress(1)
        logger.debug("Round %d/%d finished", k + 1, cfg.rounds)

    x = np.clip(x, 0.0, 1.0)
    return x[0] if single else x
