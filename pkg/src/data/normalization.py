"""
Specrec Normalization
Maps dBm feature spectra onto the unit range the diffusion model works in
"""

from dataclasses import dataclass

import numpy as np

from src.utils.errors import DomainError


@dataclass(frozen=True)
class NormalizationSpec:
    """Clipping bounds mapping [min_dbm, max_dbm] onto [0, 1]"""
    min_dbm: float = -110.0
    max_dbm: float = -40.0

    def __post_init__(self):
        if not self.min_dbm < self.max_dbm:
            raise DomainError(f"min_dbm ({self.min_dbm}) must be below max_dbm ({self.max_dbm})")

    @property
    def span_db(self) -> float:
        return self.max_dbm - self.min_dbm

    def to_dict(self) -> dict:
        return {"min_dbm": float(self.min_dbm), "max_dbm": float(self.max_dbm)}


def normalize(values_dbm: np.ndarray, spec: NormalizationSpec) -> np.ndarray:
    """v -> clamp((v - min) / (max - min), 0, 1)"""
    values = np.asarray(values_dbm, dtype=np.float64)
    return np.clip((values - spec.min_dbm) / spec.span_db, 0.0, 1.0)


def denormalize(unit: np.ndarray, spec: NormalizationSpec) -> np.ndarray:
    """Inverse of normalize on [min_dbm, max_dbm]"""
    return spec.min_dbm + np.asarray(unit, dtype=np.float64) * spec.span_db
