"""
Specrec Attack Injector
Ground-based and airborne jammers: per-cell attack masks, interference maps
and power-domain superposition onto clean feature spectra
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from src.channel.channel_model import (
    ChannelParams,
    GridSpec,
    MapKind,
    RssiMap,
    Transmitter,
    path_loss_db,
    received_power_dbm,
    sample_los_mask,
)
from src.channel.shadow_field import sample_field
from src.utils.errors import DimensionMismatchError, DomainError
from src.utils.helpers import derive_seed, rng_for

logger = logging.getLogger(__name__)


class AttackMode(Enum):
    """Where the jammer operates"""
    GROUND = "ground"
    AIRBORNE = "airborne"


@dataclass(frozen=True)
class AttackScenario:
    """
    One jammer and how often it corrupts a cell reading

    The airborne jammer follows the eVTOL at standoff_m on a LoS link, so its
    received level depends on standoff_m only. jammer_altitude_m is informational:
    it round-trips through the config file but does not enter the channel.
    """
    mode: AttackMode = AttackMode.GROUND
    jammer_power_dbm: float = 10.0
    attack_probability: float = 0.3
    ground_position_m: Optional[Tuple[float, float, float]] = None
    standoff_m: float = 50.0
    jammer_altitude_m: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.attack_probability <= 1.0:
            raise DomainError(f"Attack probability must lie in [0, 1], got {self.attack_probability}")
        if self.standoff_m <= 0:
            raise DomainError(f"standoff_m must be positive, got {self.standoff_m}")

    @property
    def label(self) -> str:
        return f"{self.mode.value}@p={self.attack_probability:g}"

    def with_seed(self, seed: int) -> "AttackScenario":
        return replace(self, seed=seed)


@dataclass
class AttackMask:
    """Cells whose reading was corrupted during acquisition"""
    attacked: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.attacked = np.asarray(self.attacked, dtype=bool)

    @property
    def attacked_fraction(self) -> float:
        return float(self.attacked.mean())


def sample_attack_mask(p: float, grid: GridSpec, seed: int) -> AttackMask:
    """
    Per-cell Bernoulli(p) corruption

    The same seed thresholds the same uniforms, so masks for increasing p are nested.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"Attack probability must lie in [0, 1], got {p}")
    uniforms = rng_for(seed, "attack-mask").random(grid.shape)
    return AttackMask(uniforms < p)


def ground_jammer_position(scenario: AttackScenario, grid: GridSpec) -> Tuple[float, float, float]:
    """Configured ground position, or a uniformly random cell center drawn from the scenario seed"""
    if scenario.ground_position_m is not None:
        return tuple(float(v) for v in scenario.ground_position_m)
    rng = rng_for(scenario.seed, "jammer-position")
    row = int(rng.integers(grid.rows))
    col = int(rng.integers(grid.cols))
    x, y = grid.cell_center(row, col)
    return (x, y, 0.0)


def interference_map(
    scenario: AttackScenario,
    grid: GridSpec,
    tx: Transmitter,
    params: ChannelParams,
) -> np.ndarray:
    """
    Received jammer power at every sampling point, in dBm

    Ground mode runs the full channel (LoS draw, exponents, its own shadow field)
    from the jammer position. Airborne mode follows the eVTOL at a fixed LoS
    standoff, so every cell sees the same power.

    Args:
        scenario: Attack description
        grid: Sampling grid
        tx: Legitimate transmitter (its carrier frequency is shared by the jammer)
        params: Channel parameters

    Returns:
        rows x cols array; -inf where the jammer is silent
    """
    if scenario.mode is AttackMode.AIRBORNE:
        if math.isinf(scenario.jammer_power_dbm) and scenario.jammer_power_dbm < 0:
            return np.full(grid.shape, -np.inf)
        level = scenario.jammer_power_dbm - path_loss_db(scenario.standoff_m, params.n_los, tx, params)
        return np.full(grid.shape, level)

    position = ground_jammer_position(scenario, grid)
    jammer = Transmitter(position_m=position, power_dbm=scenario.jammer_power_dbm, frequency_hz=tx.frequency_hz)
    logger.debug("Ground jammer at (%.1f, %.1f) m, %.1f dBm", position[0], position[1], scenario.jammer_power_dbm)

    mask = sample_los_mask(jammer, grid, params, derive_seed(scenario.seed, "jammer-los"))
    shadow = sample_field(
        grid.rows, grid.cols, grid.cell_size_m, params.sf_sigma_db, params.sf_dcorr_m,
        derive_seed(scenario.seed, "jammer-shadow"),
    )
    return received_power_dbm(jammer, grid, params, mask, shadow)


def inject(clean: RssiMap, mask: AttackMask, interference: np.ndarray) -> RssiMap:
    """
    Superpose interference power onto the attacked cells

    attacked cell: v' = 10 log10(10^(v/10) + 10^(I/10)); other cells keep v.

    Raises:
        DimensionMismatchError: if mask or interference do not match the map
    """
    interference = np.asarray(interference, dtype=np.float64)
    if mask.attacked.shape != clean.values_dbm.shape:
        raise DimensionMismatchError(
            f"Attack mask shape {mask.attacked.shape} does not match map {clean.values_dbm.shape}"
        )
    if interference.shape != clean.values_dbm.shape:
        raise DimensionMismatchError(
            f"Interference shape {interference.shape} does not match map {clean.values_dbm.shape}"
        )

    values = clean.values_dbm
    scale = math.log(10.0) / 10.0
    combined = np.logaddexp(values * scale, interference * scale) / scale
    # superposition never lowers a reading
    combined = np.maximum(combined, values)
    return RssiMap(np.where(mask.attacked, combined, values), clean.grid, MapKind.ATTACKED)


def attack_map(
    clean: RssiMap,
    scenario: AttackScenario,
    tx: Transmitter,
    params: ChannelParams,
) -> Tuple[RssiMap, AttackMask]:
    """Sample the mask and interference for a scenario and corrupt a clean map"""
    mask = sample_attack_mask(scenario.attack_probability, clean.grid, scenario.seed)
    interference = interference_map(scenario, clean.grid, tx, params)
    return inject(clean, mask, interference), mask
