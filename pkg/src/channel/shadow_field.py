"""
Specrec Shadow Field
Spatially correlated log-normal shadowing sampled by 2D circulant embedding
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple

import numpy as np

from src.utils.errors import DomainError
from src.utils.helpers import rng_for

logger = logging.getLogger(__name__)

# Largest tolerated share of spectral mass lost to clamping negative eigenvalues
CLAMP_TOLERANCE = 1e-3
PADDING_FACTORS = (2, 4, 8)


@dataclass
class ShadowField:
    """Zero-mean Gaussian shadow fading in dB over a grid"""
    values_db: np.ndarray = field(repr=False)
    sigma_db: float
    dcorr_m: float
    seed: int
    padding: int = 2
    clamped_mass: float = 0.0

    @classmethod
    def zeros(cls, shape: Tuple[int, int], dcorr_m: float = 50.0) -> "ShadowField":
        """A field with no shadowing at all"""
        return cls(np.zeros(shape), sigma_db=0.0, dcorr_m=dcorr_m, seed=0, padding=0)


def covariance(d_m, sigma_db: float, dcorr_m: float):
    """
    Exponential covariance sigma^2 exp(-d / dcorr) in dB^2

    Args:
        d_m: Lag distance(s) in meters, non-negative
        sigma_db: Shadowing standard deviation
        dcorr_m: Decorrelation distance

    Returns:
        Covariance with the shape of d_m
    """
    d = np.asarray(d_m, dtype=np.float64)
    if np.any(d < 0):
        raise DomainError(f"Lag distance must be non-negative, got {d_m}")
    value = sigma_db ** 2 * np.exp(-d / dcorr_m)
    if value.ndim == 0:
        return float(value)
    return value


@lru_cache(maxsize=16)
def _embedding_spectrum(rows: int, cols: int, cell_size_m: float, dcorr_m: float, padding: int):
    """Square-rooted, clamped eigenvalues of the unit-variance block-circulant embedding"""
    size_r, size_c = padding * rows, padding * cols
    lag_r = np.minimum(np.arange(size_r), size_r - np.arange(size_r)) * cell_size_m
    lag_c = np.minimum(np.arange(size_c), size_c - np.arange(size_c)) * cell_size_m
    distance = np.hypot(lag_r[:, None], lag_c[None, :])
    base = covariance(distance, 1.0, dcorr_m)

    eigenvalues = np.real(np.fft.fft2(base))
    negative = eigenvalues < 0
    clamped_mass = float(-eigenvalues[negative].sum() / np.abs(eigenvalues).sum())
    eigenvalues[negative] = 0.0

    scale = np.sqrt(eigenvalues / (size_r * size_c))
    scale.setflags(write=False)
    return scale, clamped_mass


def _spectrum_for(rows: int, cols: int, cell_size_m: float, dcorr_m: float):
    """Pick the smallest padding whose embedding is close enough to non-negative definite"""
    for padding in PADDING_FACTORS:
        scale, clamped_mass = _embedding_spectrum(rows, cols, float(cell_size_m), float(dcorr_m), padding)
        if clamped_mass < CLAMP_TOLERANCE:
            return scale, clamped_mass, padding
        logger.debug("Embedding at padding %d clamps %.2e of the spectrum", padding, clamped_mass)
    logger.warning(
        "Circulant embedding still clamps %.2e of the spectrum at padding %d", clamped_mass, padding
    )
    return scale, clamped_mass, padding


def sample_field(
    rows: int,
    cols: int,
    cell_size_m: float,
    sigma_db: float,
    dcorr_m: float,
    seed: int,
) -> ShadowField:
    """
    Stationary Gaussian field with exponential correlation

    The field is the real part of a complex Gaussian synthesis on a padded torus,
    cropped to rows x cols. Scaling by sigma_db is applied last, so the output is
    exactly linear in sigma_db for a fixed seed.

    Raises:
        DomainError: if dcorr_m is not positive or sigma_db is negative
    """
    if dcorr_m <= 0:
        raise DomainError(f"Decorrelation distance must be positive, got {dcorr_m}")
    if sigma_db < 0:
        raise DomainError(f"Shadowing standard deviation must be non-negative, got {sigma_db}")

    scale, clamped_mass, padding = _spectrum_for(rows, cols, cell_size_m, dcorr_m)
    rng = rng_for(seed, "shadow")
    noise = rng.standard_normal(scale.shape) + 1j * rng.standard_normal(scale.shape)
    unit = np.real(np.fft.fft2(scale * noise))[:rows, :cols]

    return ShadowField(
        values_db=sigma_db * unit,
        sigma_db=sigma_db,
        dcorr_m=dcorr_m,
        seed=seed,
        padding=padding,
        clamped_mass=clamped_mass,
    )
