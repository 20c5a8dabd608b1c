"""
Specrec Trainer
Pretrains the denoiser on clean feature spectra with the epsilon-prediction objective
"""

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F

from src.data.corpus import Manifest, load_normalized_clean
from src.recovery.denoiser import DenoiserConfig, DenoiserModel, TrainConfig, UNet, save_checkpoint
from src.recovery.diffusion import NoiseSchedule
from src.utils.errors import ModelMismatchError, TrainingError
from src.utils.helpers import PathLike, atomic_write

logger = logging.getLogger(__name__)

SANITY_WINDOW = 1000


@dataclass
class TrainResult:
    """Trained model plus the per-step loss trace"""
    model: DenoiserModel
    losses: List[float] = field(default_factory=list)

    @property
    def improved(self) -> bool:
        """Mean loss over the last window is below the mean over the first"""
        window = min(SANITY_WINDOW, max(1, len(self.losses) // 2))
        return float(np.mean(self.losses[-window:])) < float(np.mean(self.losses[:window]))


def schedule_tensors(schedule: NoiseSchedule, dtype: torch.dtype = torch.float32):
    """sqrt(alpha_bar) and sqrt(1 - alpha_bar) lookup tables, indexed by t"""
    return (
        torch.as_tensor(np.sqrt(schedule.alpha_bar), dtype=dtype),
        torch.as_tensor(np.sqrt(1.0 - schedule.alpha_bar), dtype=dtype),
    )


def diffusion_loss(
    network: UNet,
    x0: torch.Tensor,
    t: torch.Tensor,
    eps: torch.Tensor,
    sqrt_ab: torch.Tensor,
    sqrt_one_minus_ab: torch.Tensor,
) -> torch.Tensor:
    """Mean squared error between injected and predicted noise"""
    x_t = sqrt_ab[t].view(-1, 1, 1, 1) * x0 + sqrt_one_minus_ab[t].view(-1, 1, 1, 1) * eps
    return F.mse_loss(network(x_t, t), eps)


def _update_ema(ema: UNet, network: UNet, decay: float) -> None:
    with torch.no_grad():
        for target, source in zip(ema.parameters(), network.parameters()):
            target.mul_(decay).add_(source, alpha=1.0 - decay)
        for target, source in zip(ema.buffers(), network.buffers()):
            target.copy_(source)


def save_loss_trace(losses: List[float], path: PathLike) -> Path:
    """Per-step losses as CSV"""
    frame = pd.DataFrame({"step": np.arange(1, len(losses) + 1), "loss": losses})
    return atomic_write(path, lambda tmp: frame.to_csv(tmp, index=False, float_format="%.8g"))


def train(
    manifest: Manifest,
    schedule: NoiseSchedule,
    cfg: TrainConfig,
    denoiser_config: DenoiserConfig,
    checkpoint_path: Optional[PathLike] = None,
    progress: Optional[Callable[[int], None]] = None,
) -> TrainResult:
    """
    Fit the noise predictor on the clean maps of a corpus

    Args:
        manifest: Corpus of clean maps
        schedule: Noise schedule shared with inference
        cfg: Optimizer settings and seed
        denoiser_config: Architecture
        checkpoint_path: Where to save checkpoints (every cfg.checkpoint_every steps and at the end)
        progress: Called once per optimizer step

    Returns:
        TrainResult with the inference model (EMA weights when enabled) and losses

    Raises:
        TrainingError: on an empty corpus or a non-finite loss
        ModelMismatchError: if the corpus grid does not fit the architecture
    """
    if manifest.count == 0:
        raise TrainingError(f"{manifest.root}: corpus is empty")
    if manifest.grid.shape != (denoiser_config.image_size, denoiser_config.image_size):
        raise ModelMismatchError(
            f"Corpus grid {manifest.grid.shape} does not match model image size {denoiser_config.image_size}"
        )

    data = torch.from_numpy(load_normalized_clean(manifest))
    generator = torch.Generator().manual_seed(cfg.seed)
    model = DenoiserModel.create(denoiser_config, schedule, manifest.normalization, seed=cfg.seed)
    network = model.network
    network.train()
    ema = copy.deepcopy(network) if cfg.ema_decay > 0 else None
    optimizer = torch.optim.Adam(network.parameters(), lr=cfg.learning_rate)
    sqrt_ab, sqrt_one_minus_ab = schedule_tensors(schedule)

    logger.info(
        "Training %d parameters on %d maps for %d steps (batch %d, lr %g)",
        model.parameter_count(), manifest.count, cfg.steps, cfg.batch_size, cfg.learning_rate,
    )

    def snapshot(step: int) -> DenoiserModel:
        weights = ema if ema is not None else network
        return DenoiserModel(weights, schedule, manifest.normalization, trained_steps=step)

    losses: List[float] = []
    for step in range(1, cfg.steps + 1):
        index = torch.randint(0, manifest.count, (cfg.batch_size,), generator=generator)
        x0 = data[index][:, None]
        t = torch.randint(1, schedule.T + 1, (cfg.batch_size,), generator=generator)
        eps = torch.randn(x0.shape, generator=generator)

        loss = diffusion_loss(network, x0, t, eps, sqrt_ab, sqrt_one_minus_ab)
        value = float(loss.item())
        if not np.isfinite(value):
            raise TrainingError(
                f"Loss became {value} at step {step} (last finite loss {losses[-1] if losses else 'n/a'})"
            )
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()
        if ema is not None:
            _update_ema(ema, network, min(cfg.ema_decay, (1.0 + step) / (10.0 + step)))
        losses.append(value)

        if step % cfg.checkpoint_every == 0:
            logger.info("step %d loss %.5f", step, float(np.mean(losses[-cfg.checkpoint_every:])))
            if checkpoint_path is not None:
                save_checkpoint(snapshot(step), checkpoint_path)
        if progress is not None:
            progress(1)

    result_model = snapshot(cfg.steps)
    result_model.network.eval()
    result = TrainResult(result_model, losses)
    if not result.improved:
        logger.warning("Loss did not decrease between the first and last %d steps", SANITY_WINDOW)
    if checkpoint_path is not None:
        save_checkpoint(result_model, checkpoint_path)
        save_loss_trace(losses, loss_trace_path(checkpoint_path))
    return result


def loss_trace_path(checkpoint_path: PathLike) -> Path:
    path = Path(checkpoint_path)
    return path.with_name(f"{path.stem}.loss.csv")
