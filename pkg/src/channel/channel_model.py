"""
Specrec Channel Model
Air-to-ground propagation: geometry, LoS probability, log-distance path loss
and clean RSSI map synthesis over the eVTOL sampling plane
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Tuple, Union

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from src.utils.errors import DimensionMismatchError, DomainError
from src.utils.helpers import rng_for

if TYPE_CHECKING:
    from src.channel.shadow_field import ShadowField

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class GridSpec:
    """Measurement grid laid out on the plane at sampling_altitude_m"""
    rows: int = 128
    cols: int = 128
    cell_size_m: float = 4.0
    origin_m: Tuple[float, float] = (0.0, 0.0)
    sampling_altitude_m: float = 100.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise DomainError(f"Grid must have at least one row and column, got {self.rows}x{self.cols}")
        if self.cell_size_m <= 0:
            raise DomainError(f"cell_size_m must be positive, got {self.cell_size_m}")
        if self.sampling_altitude_m <= 0:
            raise DomainError(f"sampling_altitude_m must be positive, got {self.sampling_altitude_m}")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    def cell_center(self, row: int, col: int) -> Tuple[float, float]:
        """Ground (x, y) of a cell center; columns run along x, rows along y"""
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise DomainError(f"Cell ({row}, {col}) outside {self.rows}x{self.cols} grid")
        return (
            self.origin_m[0] + col * self.cell_size_m,
            self.origin_m[1] + row * self.cell_size_m,
        )

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """(x, y) coordinate grids, each rows x cols"""
        xs = self.origin_m[0] + np.arange(self.cols) * self.cell_size_m
        ys = self.origin_m[1] + np.arange(self.rows) * self.cell_size_m
        return np.meshgrid(xs, ys)


@dataclass(frozen=True)
class Transmitter:
    """Ground base station (or any emitter reusing the same channel)"""
    position_m: Tuple[float, float, float] = (256.0, 256.0, 0.0)
    power_dbm: float = 20.0
    frequency_hz: float = 1.8e9

    def __post_init__(self):
        if self.frequency_hz <= 0:
            raise DomainError(f"frequency_hz must be positive, got {self.frequency_hz}")


@dataclass(frozen=True)
class ChannelParams:
    """LoS sigmoid coefficients, path-loss exponents and shadowing statistics"""
    a_los: float = 9.61
    b_los: float = 0.16
    n_los: float = 2.2
    n_nlos: float = 3.8
    ref_distance_m: float = 1.0
    sf_sigma_db: float = 6.0
    sf_dcorr_m: float = 50.0

    def __post_init__(self):
        for name in ("a_los", "b_los", "n_los", "n_nlos", "ref_distance_m", "sf_sigma_db", "sf_dcorr_m"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_nlos < self.n_los:
            raise DomainError(f"n_nlos ({self.n_nlos}) must not be below n_los ({self.n_los})")


class MapKind(Enum):
    """What an RSSI map represents"""
    CLEAN = "clean"
    ATTACKED = "attacked"
    RECONSTRUCTED = "reconstructed"


@dataclass
class RssiMap:
    """Feature spectrum: RSSI in dBm for every grid cell"""
    values_dbm: np.ndarray
    grid: GridSpec
    kind: MapKind = MapKind.CLEAN

    def __post_init__(self):
        self.values_dbm = np.asarray(self.values_dbm, dtype=np.float64)
        if self.values_dbm.shape != self.grid.shape:
            raise DimensionMismatchError(
                f"Map shape {self.values_dbm.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values_dbm)):
            raise DomainError("RSSI map contains non-finite values")


@dataclass
class LosMask:
    """Per-cell propagation state, True where the link is line-of-sight"""
    states: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=bool)

    @property
    def los_fraction(self) -> float:
        return float(self.states.mean())


def free_space_intercept_db(tx: Transmitter, params: ChannelParams) -> float:
    """PL0: free-space loss at the reference distance"""
    return 20.0 * math.log10(4.0 * math.pi * params.ref_distance_m * tx.frequency_hz / SPEED_OF_LIGHT)


def horizontal_distance_map(tx: Transmitter, grid: GridSpec) -> np.ndarray:
    """Ground-projected distance from the transmitter to every cell center"""
    xs, ys = grid.cell_centers()
    return np.hypot(xs - tx.position_m[0], ys - tx.position_m[1])


def slant_distance_map(tx: Transmitter, grid: GridSpec) -> np.ndarray:
    """3D distance from the transmitter to every cell center on the sampling plane"""
    dz = grid.sampling_altitude_m - tx.position_m[2]
    return np.hypot(horizontal_distance_map(tx, grid), dz)


def elevation_angle_deg(tx: Transmitter, cell: Tuple[int, int], grid: GridSpec) -> float:
    """
    Elevation of a cell center as seen from the transmitter

    Args:
        tx: Transmitter
        cell: (row, col) grid index
        grid: Grid geometry

    Returns:
        Angle in degrees; 90 when the cell is straight above the transmitter
    """
    x, y = grid.cell_center(*cell)
    horizontal = math.hypot(x - tx.position_m[0], y - tx.position_m[1])
    dz = grid.sampling_altitude_m - tx.position_m[2]
    if horizontal == 0.0:
        return 90.0
    return math.degrees(math.atan(dz / horizontal))


def elevation_angle_map(tx: Transmitter, grid: GridSpec) -> np.ndarray:
    """Vectorized elevation_angle_deg over every cell"""
    dz = grid.sampling_altitude_m - tx.position_m[2]
    horizontal = horizontal_distance_map(tx, grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        angles = np.degrees(np.arctan(dz / horizontal))
    return np.where(horizontal == 0.0, 90.0, angles)


def los_probability(theta_deg: ArrayLike, params: ChannelParams) -> ArrayLike:
    """
    Sigmoid air-to-ground LoS probability P = 1 / (1 + a exp(-b (theta - a)))

    Args:
        theta_deg: Elevation angle(s) in [0, 90] degrees
        params: Channel coefficients

    Returns:
        LoS probability with the same shape as theta_deg
    """
    theta = np.asarray(theta_deg, dtype=np.float64)
    if np.any(np.isnan(theta)) or np.any(theta < 0.0) or np.any(theta > 90.0):
        raise DomainError(f"Elevation angle must lie in [0, 90] degrees, got {theta_deg}")
    with np.errstate(over="ignore"):
        probability = 1.0 / (1.0 + params.a_los * np.exp(-params.b_los * (theta - params.a_los)))
    if probability.ndim == 0:
        return float(probability)
    return probability


def path_loss_db(distance_m: ArrayLike, exponent: float, tx: Transmitter, params: ChannelParams) -> ArrayLike:
    """
    Log-distance path loss PL(d) = PL0 + 10 n log10(d / d0)

    Raises:
        DomainError: if any distance is below the reference distance
    """
    distance = np.asarray(distance_m, dtype=np.float64)
    if np.any(np.isnan(distance)) or np.any(distance < params.ref_distance_m):
        raise DomainError(
            f"Distance must be at least the reference distance {params.ref_distance_m} m"
        )
    loss = free_space_intercept_db(tx, params) + 10.0 * exponent * np.log10(distance / params.ref_distance_m)
    if loss.ndim == 0:
        return float(loss)
    return loss


def sample_los_mask(tx: Transmitter, grid: GridSpec, params: ChannelParams, seed: int) -> LosMask:
    """
    Independent per-cell Bernoulli LoS draws

    Each row uses its own (seed, "los", row) stream so rows can be drawn in any order.
    """
    probability = los_probability(elevation_angle_map(tx, grid), params)
    states = np.empty(grid.shape, dtype=bool)
    for row in range(grid.rows):
        states[row] = rng_for(seed, "los", row).random(grid.cols) < probability[row]
    return LosMask(states)


def received_power_dbm(
    tx: Transmitter,
    grid: GridSpec,
    params: ChannelParams,
    mask: LosMask,
    shadow: "ShadowField",
) -> np.ndarray:
    """Raw received power grid; NLoS cells also lose the shadow-fading sample"""
    if mask.states.shape != grid.shape:
        raise DimensionMismatchError(f"LoS mask shape {mask.states.shape} does not match grid {grid.shape}")
    if shadow.values_db.shape != grid.shape:
        raise DimensionMismatchError(
            f"Shadow field shape {shadow.values_db.shape} does not match grid {grid.shape}"
        )

    distance = np.maximum(slant_distance_map(tx, grid), params.ref_distance_m)
    exponent = np.where(mask.states, params.n_los, params.n_nlos)
    loss = free_space_intercept_db(tx, params) + 10.0 * exponent * np.log10(distance / params.ref_distance_m)
    shadowing = np.where(mask.states, 0.0, shadow.values_db)
    return tx.power_dbm - loss - shadowing


def synthesize_rssi_map(
    tx: Transmitter,
    grid: GridSpec,
    params: ChannelParams,
    mask: LosMask,
    shadow: "ShadowField",
) -> RssiMap:
    """
    Clean feature spectrum RSSI = P_tx - PL(d3D; n by LoS state) [- shadow on NLoS]

    Args:
        tx: Ground base station
        grid: Sampling grid
        params: Channel parameters
        mask: LoS states per cell
        shadow: Shadow-fading field (applied on NLoS cells only)

    Returns:
        RssiMap of kind CLEAN
    """
    return RssiMap(received_power_dbm(tx, grid, params, mask, shadow), grid, MapKind.CLEAN)
