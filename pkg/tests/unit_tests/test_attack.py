import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from src.channel.attack import (
    AttackMask,
    AttackMode,
    AttackScenario,
    attack_map,
    ground_jammer_position,
    inject,
    interference_map,
    sample_attack_mask,
)
from src.channel.channel_model import (
    ChannelParams,
    GridSpec,
    MapKind,
    RssiMap,
    Transmitter,
    sample_los_mask,
    synthesize_rssi_map,
)
from src.channel.shadow_field import sample_field
from src.utils.errors import DimensionMismatchError, DomainError

GRID = GridSpec()
TX = Transmitter()
PARAMS = ChannelParams()

probabilities = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def flat_map(value=-90.0, grid=GRID):
    return RssiMap(np.full(grid.shape, value), grid)


def test_mask_extremes():
    assert not sample_attack_mask(0.0, GRID, seed=1).attacked.any()
    assert sample_attack_mask(1.0, GRID, seed=1).attacked.all()


@given(probabilities, probabilities, st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_masks_are_nested_in_p(p1, p2, seed):
    grid = GridSpec(rows=16, cols=16)
    low, high = min(p1, p2), max(p1, p2)
    small = sample_attack_mask(low, grid, seed).attacked
    large = sample_attack_mask(high, grid, seed).attacked
    assert not np.any(small & ~large)


@pytest.mark.parametrize("p", [0.3, 0.5, 0.7])
def test_mask_fraction_tracks_p(p):
    assert sample_attack_mask(p, GRID, seed=4).attacked_fraction == pytest.approx(p, abs=0.02)


@pytest.mark.parametrize("p", [-0.1, 1.5])
def test_invalid_probability_rejected(p):
    with pytest.raises(DomainError):
        sample_attack_mask(p, GRID, seed=0)
    with pytest.raises(DomainError):
        AttackScenario(attack_probability=p)


def test_scenario_label():
    assert AttackScenario(mode=AttackMode.AIRBORNE, attack_probability=0.4).label == "airborne@p=0.4"


def test_inject_adds_power_on_attacked_cells_only():
    mask = sample_attack_mask(0.5, GRID, seed=2)
    attacked = inject(flat_map(-70.0), mask, np.full(GRID.shape, -70.0))

    assert attacked.kind is MapKind.ATTACKED
    np.testing.assert_allclose(attacked.values_dbm[mask.attacked], -70.0 + 10.0 * np.log10(2.0))
    np.testing.assert_array_equal(attacked.values_dbm[~mask.attacked], -70.0)


@given(
    st.floats(min_value=-150.0, max_value=0.0),
    st.floats(min_value=-150.0, max_value=30.0),
)
def test_inject_never_lowers_a_reading(value, interference):
    grid = GridSpec(rows=2, cols=2)
    mask = AttackMask(np.ones(grid.shape, dtype=bool))
    out = inject(flat_map(value, grid), mask, np.full(grid.shape, interference))
    assert np.all(out.values_dbm >= value)
    assert np.all(out.values_dbm >= interference - 1e-9)


def test_silent_jammer_changes_nothing():
    mask = AttackMask(np.ones(GRID.shape, dtype=bool))
    out = inject(flat_map(-80.0), mask, np.full(GRID.shape, -np.inf))
    np.testing.assert_array_equal(out.values_dbm, -80.0)


def test_inject_rejects_mismatched_shapes():
    mask = AttackMask(np.ones((8, 8), dtype=bool))
    with pytest.raises(DimensionMismatchError):
        inject(flat_map(), mask, np.zeros(GRID.shape))
    with pytest.raises(DimensionMismatchError):
        inject(flat_map(), sample_attack_mask(0.5, GRID, 0), np.zeros((8, 8)))


def test_airborne_interference_is_constant_standoff_level():
    scenario = AttackScenario(mode=AttackMode.AIRBORNE)
    level = interference_map(scenario, GRID, TX, PARAMS)
    assert level.shape == GRID.shape
    np.testing.assert_allclose(level, -64.93, atol=0.01)


def test_airborne_level_ignores_jammer_altitude():
    low = AttackScenario(mode=AttackMode.AIRBORNE, jammer_altitude_m=50.0)
    high = AttackScenario(mode=AttackMode.AIRBORNE, jammer_altitude_m=300.0)
    np.testing.assert_array_equal(interference_map(low, GRID, TX, PARAMS), interference_map(high, GRID, TX, PARAMS))


def test_airborne_interference_silent_at_minus_infinity():
    scenario = AttackScenario(mode=AttackMode.AIRBORNE, jammer_power_dbm=-np.inf)
    assert np.all(np.isneginf(interference_map(scenario, GRID, TX, PARAMS)))


def test_ground_jammer_peaks_at_its_position():
    scenario = AttackScenario(mode=AttackMode.GROUND, ground_position_m=(100.0, 400.0, 0.0), seed=3)
    level = interference_map(scenario, GRID, TX, PARAMS)
    # row 100 -> y = 400 m, col 25 -> x = 100 m
    assert level[100, 25] > np.median(level)
    # straight above the jammer the link is line-of-sight at 100 m
    assert level[100, 25] == pytest.approx(10.0 - 81.55, abs=0.01)


def test_ground_jammer_position_is_drawn_from_seed():
    scenario = AttackScenario(mode=AttackMode.GROUND, seed=21)
    position = ground_jammer_position(scenario, GRID)
    assert position == ground_jammer_position(scenario, GRID)
    assert position[2] == 0.0
    assert 0.0 <= position[0] <= 127 * GRID.cell_size_m and 0.0 <= position[1] <= 127 * GRID.cell_size_m


def test_ground_interference_is_reproducible():
    scenario = AttackScenario(mode=AttackMode.GROUND, seed=8)
    np.testing.assert_array_equal(
        interference_map(scenario, GRID, TX, PARAMS), interference_map(scenario, GRID, TX, PARAMS)
    )


@pytest.mark.parametrize("mode", list(AttackMode))
def test_attack_with_zero_probability_is_identity(mode):
    clean = flat_map(-95.0)
    attacked, mask = attack_map(clean, AttackScenario(mode=mode, attack_probability=0.0, seed=1), TX, PARAMS)
    assert mask.attacked_fraction == 0.0
    np.testing.assert_array_equal(attacked.values_dbm, clean.values_dbm)


def test_airborne_attack_raises_weak_cells_to_jammer_level():
    clean = flat_map(-105.0)
    attacked, mask = attack_map(
        clean, AttackScenario(mode=AttackMode.AIRBORNE, attack_probability=1.0), TX, PARAMS
    )
    assert mask.attacked.all()
    np.testing.assert_allclose(attacked.values_dbm, -64.93, atol=0.01)


@pytest.mark.parametrize("mode", list(AttackMode))
@given(st.floats(min_value=-40.0, max_value=40.0), st.floats(min_value=0.0, max_value=30.0))
def test_louder_jammer_never_lowers_a_cell(mode, power, extra):
    grid = GridSpec(rows=16, cols=16)
    clean = RssiMap(np.linspace(-110.0, -50.0, 256).reshape(16, 16), grid)
    mask = sample_attack_mask(0.5, grid, seed=6)
    quiet = AttackScenario(mode=mode, jammer_power_dbm=power, ground_position_m=(20.0, 20.0, 0.0), seed=6)
    loud = AttackScenario(mode=mode, jammer_power_dbm=power + extra, ground_position_m=(20.0, 20.0, 0.0), seed=6)

    low = inject(clean, mask, interference_map(quiet, grid, TX, PARAMS)).values_dbm
    high = inject(clean, mask, interference_map(loud, grid, TX, PARAMS)).values_dbm
    assert np.all(high >= low - 1e-9)


def test_airborne_jammer_perturbs_more_than_ground_jammer():
    perturbation = {mode: [] for mode in AttackMode}
    for seed in range(20):
        clean = synthesize_rssi_map(
            TX, GRID, PARAMS, sample_los_mask(TX, GRID, PARAMS, seed),
            sample_field(GRID.rows, GRID.cols, GRID.cell_size_m, PARAMS.sf_sigma_db, PARAMS.sf_dcorr_m, seed),
        )
        for mode in AttackMode:
            attacked, mask = attack_map(clean, AttackScenario(mode=mode, attack_probability=0.5, seed=seed), TX, PARAMS)
            delta = attacked.values_dbm - clean.values_dbm
            perturbation[mode].append(delta[mask.attacked].mean())

    assert np.mean(perturbation[AttackMode.AIRBORNE]) >= np.mean(perturbation[AttackMode.GROUND])
