import math

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from src.recovery.diffusion import (
    GuidanceConfig,
    NoiseSchedule,
    forward_sample,
    guided_reconstruct,
    lowpass,
    reverse_step,
)
from src.utils.errors import DimensionMismatchError, DomainError, ModelMismatchError
from src.utils.helpers import derive_seed

SCHEDULE = NoiseSchedule()


def test_schedule_tables():
    assert len(SCHEDULE.beta) == SCHEDULE.T + 1
    assert SCHEDULE.alpha_bar[0] == 1.0
    assert SCHEDULE.beta[1] == pytest.approx(1e-4)
    assert SCHEDULE.beta[SCHEDULE.T] == pytest.approx(0.02)
    assert np.all(np.diff(SCHEDULE.alpha_bar) < 0)


def test_signal_is_submerged_at_final_step():
    assert SCHEDULE.alpha_bar[SCHEDULE.T] < 5e-5
    assert SCHEDULE.alpha_bar[SCHEDULE.T] == pytest.approx(math.prod(1.0 - b for b in SCHEDULE.beta[1:]), rel=1e-9)


def test_alpha_bar_recursion_is_exact():
    np.testing.assert_array_equal(SCHEDULE.alpha_bar[1:], SCHEDULE.alpha_bar[:-1] * SCHEDULE.alpha[1:])


def test_schedule_tables_are_read_only():
    with pytest.raises(ValueError):
        SCHEDULE.beta[3] = 0.5


def test_schedule_fingerprint():
    assert SCHEDULE.fingerprint() == NoiseSchedule().fingerprint()
    assert SCHEDULE.fingerprint() != NoiseSchedule(timesteps=500).fingerprint()


@pytest.mark.parametrize("kwargs", [{"timesteps": 0}, {"beta_start": 0.05, "beta_end": 0.01}, {"beta_end": 1.5}])
def test_invalid_schedules_rejected(kwargs):
    with pytest.raises(DomainError):
        NoiseSchedule(**kwargs)


def test_forward_at_zero_returns_input():
    x0 = np.random.default_rng(0).random((8, 8))
    out = forward_sample(x0, 0, np.ones_like(x0), SCHEDULE)
    np.testing.assert_array_equal(out, x0)
    assert out is not x0


def test_forward_at_one_inverts_with_known_noise():
    rng = np.random.default_rng(1)
    x0 = rng.random((16, 16))
    eps = rng.standard_normal((16, 16))
    x1 = forward_sample(x0, 1, eps, SCHEDULE)
    a_bar = SCHEDULE.alpha_bar[1]
    recovered = (x1 - np.sqrt(1.0 - a_bar) * eps) / np.sqrt(a_bar)
    assert np.max(np.abs(recovered - x0)) <= 1e-5


@pytest.mark.parametrize("t", [50, 500, 1000])
def test_forward_variance_law(t):
    eps = np.random.default_rng(t).standard_normal(10_000)
    x_t = forward_sample(np.full(10_000, 0.5), t, eps, SCHEDULE)
    a_bar = SCHEDULE.alpha_bar[t]
    assert x_t.mean() == pytest.approx(0.5 * np.sqrt(a_bar), abs=4.0 * np.sqrt((1 - a_bar) / 10_000) + 1e-12)
    assert x_t.var() == pytest.approx(1.0 - a_bar, rel=0.05)


@pytest.mark.parametrize("t", [-1, 1001])
def test_forward_rejects_out_of_range_timesteps(t):
    with pytest.raises(DomainError):
        forward_sample(np.zeros(4), t, np.zeros(4), SCHEDULE)


def test_forward_rejects_mismatched_noise():
    with pytest.raises(DimensionMismatchError):
        forward_sample(np.zeros((4, 4)), 3, np.zeros((4, 5)), SCHEDULE)


def test_reverse_step_with_true_noise_recovers_mean():
    rng = np.random.default_rng(2)
    x0 = rng.random((8, 8))
    eps = rng.standard_normal((8, 8))
    x1 = forward_sample(x0, 1, eps, SCHEDULE)
    # at t = 1 the posterior mean with the true noise is exactly x0
    np.testing.assert_allclose(reverse_step(x1, 1, eps, SCHEDULE), x0, atol=1e-10)


def test_reverse_step_ignores_noise_at_t1():
    x = np.ones((4, 4))
    z = np.full((4, 4), 10.0)
    np.testing.assert_array_equal(reverse_step(x, 1, np.zeros_like(x), SCHEDULE, z), reverse_step(x, 1, np.zeros_like(x), SCHEDULE))


def test_reverse_step_adds_posterior_noise():
    x = np.zeros((4, 4))
    z = np.ones((4, 4))
    out = reverse_step(x, 10, np.zeros_like(x), SCHEDULE, z)
    np.testing.assert_allclose(out, np.sqrt(SCHEDULE.posterior_variance(10)))


def scalar_reverse_step(x, eps, z, t, start=1e-4, end=0.02, steps=1000):
    betas = [start + (end - start) * i / (steps - 1) for i in range(steps)]
    alpha_bar = 1.0
    for beta in betas[:t]:
        alpha_bar *= 1.0 - beta
    beta_t = betas[t - 1]
    alpha_bar_prev = alpha_bar / (1.0 - beta_t)
    mean = (x - beta_t / math.sqrt(1.0 - alpha_bar) * eps) / math.sqrt(1.0 - beta_t)
    variance = beta_t * (1.0 - alpha_bar_prev) / (1.0 - alpha_bar)
    return mean + math.sqrt(variance) * z


def test_reverse_step_matches_scalar_computation_at_t500():
    x = np.array([0.9, -0.4, 0.1, 1.7])
    eps = np.array([0.3, -1.2, 0.0, 0.8])
    z = np.array([-0.5, 0.25, 1.0, -2.0])
    expected = [scalar_reverse_step(*args, t=500) for args in zip(x, eps, z)]
    np.testing.assert_allclose(reverse_step(x, 500, eps, SCHEDULE, z), expected, rtol=1e-10, atol=1e-12)


def test_reverse_step_rejects_t0():
    with pytest.raises(DomainError):
        reverse_step(np.zeros(4), 0, np.zeros(4), SCHEDULE)


def test_lowpass_keeps_constants():
    np.testing.assert_array_equal(lowpass(np.full((16, 16), 0.3), 4), np.full((16, 16), 0.3))


def test_lowpass_block_means():
    grid = np.arange(16, dtype=float).reshape(4, 4)
    out = lowpass(grid, 2)
    np.testing.assert_array_equal(out[:2, :2], np.full((2, 2), grid[:2, :2].mean()))
    np.testing.assert_array_equal(out[2:, 2:], np.full((2, 2), grid[2:, 2:].mean()))


@given(st.sampled_from([1, 2, 4, 8]), st.integers(min_value=0, max_value=1000))
def test_lowpass_is_idempotent(n, seed):
    grid = np.random.default_rng(seed).random((16, 16))
    once = lowpass(grid, n)
    np.testing.assert_allclose(lowpass(once, n), once, atol=1e-12)
    assert once.mean() == pytest.approx(grid.mean())


def test_lowpass_handles_stacks():
    stack = np.random.default_rng(0).random((3, 8, 8))
    out = lowpass(stack, 4)
    assert out.shape == stack.shape
    np.testing.assert_allclose(out[1], lowpass(stack[1], 4))


def test_lowpass_rejects_non_divisors():
    with pytest.raises(DomainError):
        lowpass(np.zeros((10, 10)), 4)


def test_guidance_config_validation():
    with pytest.raises(DomainError):
        GuidanceConfig(lowpass_factor=3)
    with pytest.raises(DomainError):
        GuidanceConfig(rounds=0)
    with pytest.raises(DomainError):
        GuidanceConfig(t_star=-1)
    with pytest.raises(DomainError):
        GuidanceConfig(t_star=2000).validate_for(SCHEDULE, (16, 16))


def attacked_grid(shape=(16, 16), seed=0):
    return 0.5 + 0.1 * np.random.default_rng(seed).uniform(-1.0, 1.0, shape)


def test_reconstruction_with_zero_depth_is_identity(zero_predictor):
    y = attacked_grid()
    model = zero_predictor(y.shape)
    out = guided_reconstruct(y, model, SCHEDULE, GuidanceConfig(t_star=0, lowpass_factor=4), seed=0)
    np.testing.assert_array_equal(out, y)
    assert model.calls == 0


def test_reconstruction_shape_range_and_step_count(zero_predictor):
    y = attacked_grid()
    model = zero_predictor(y.shape)
    steps = []
    cfg = GuidanceConfig(t_star=20, rounds=2, lowpass_factor=4)
    out = guided_reconstruct(y, model, SCHEDULE, cfg, seed=3, progress=steps.append)
    assert out.shape == y.shape
    assert out.min() >= 0.0 and out.max() <= 1.0
    assert model.calls == 40
    assert sum(steps) == 40


def test_reconstruction_is_seeded(zero_predictor):
    y = attacked_grid()
    model = zero_predictor(y.shape)
    cfg = GuidanceConfig(t_star=30, rounds=1, lowpass_factor=4)
    first = guided_reconstruct(y, model, SCHEDULE, cfg, seed=5)
    np.testing.assert_array_equal(first, guided_reconstruct(y, model, SCHEDULE, cfg, seed=5))
    assert not np.array_equal(first, guided_reconstruct(y, model, SCHEDULE, cfg, seed=6))


def test_guidance_pins_low_frequencies_to_the_input(zero_predictor):
    y = attacked_grid(seed=4)
    cfg = GuidanceConfig(t_star=5, rounds=2, lowpass_factor=4)
    out = guided_reconstruct(y, zero_predictor(y.shape), SCHEDULE, cfg, seed=1)
    np.testing.assert_allclose(lowpass(out, 4), lowpass(y, 4), atol=1e-9)


def test_guidance_switch_changes_the_result(zero_predictor):
    y = attacked_grid()
    model = zero_predictor(y.shape)
    on = guided_reconstruct(y, model, SCHEDULE, GuidanceConfig(t_star=50, rounds=1, lowpass_factor=4), seed=2)
    off = guided_reconstruct(
        y, model, SCHEDULE, GuidanceConfig(t_star=50, rounds=1, lowpass_factor=4, guidance_enabled=False), seed=2
    )
    assert not np.allclose(on, off)


def test_batched_items_match_single_reconstructions(zero_predictor):
    stack = np.stack([attacked_grid(seed=s) for s in range(3)])
    model = zero_predictor(stack.shape[1:])
    cfg = GuidanceConfig(t_star=10, rounds=1, lowpass_factor=4)
    batched = guided_reconstruct(stack, model, SCHEDULE, cfg, seed=9)
    assert batched.shape == stack.shape
    for b in range(3):
        single = guided_reconstruct(stack[b], model, SCHEDULE, cfg, seed=derive_seed(9, "item", b))
        np.testing.assert_allclose(batched[b], single, atol=1e-12)


def test_reconstruction_rejects_wrong_grid_size(zero_predictor):
    with pytest.raises(ModelMismatchError):
        guided_reconstruct(attacked_grid((16, 16)), zero_predictor((32, 32)), SCHEDULE, GuidanceConfig(), seed=0)


def test_reconstruction_rejects_bad_rank(zero_predictor):
    with pytest.raises(DimensionMismatchError):
        guided_reconstruct(np.zeros((2, 2, 16, 16)), zero_predictor((16, 16)), SCHEDULE, GuidanceConfig(), seed=0)


class GaussianPriorNoise:
    """Optimal noise predictor when the clean data is standard normal"""

    def __init__(self, shape):
        self.image_shape = tuple(shape)

    def predict_noise(self, x_t, t):
        return np.sqrt(1.0 - SCHEDULE.alpha_bar[t]) * np.asarray(x_t, dtype=np.float64)


def structured_attacked_grid(seed, shape=(16, 16)):
    rng = np.random.default_rng(seed)
    rows, cols = np.meshgrid(np.linspace(0.0, 1.0, shape[0]), np.linspace(0.0, 1.0, shape[1]), indexing="ij")
    slope = rng.uniform(-0.3, 0.3, size=2)
    grid = 0.5 + slope[0] * (rows - 0.5) + slope[1] * (cols - 0.5)
    spikes = rng.random(shape) < 0.3
    return np.clip(grid + spikes * rng.uniform(0.05, 0.2, shape), 0.0, 1.0)


def lowpass_correlation(a, b, n=4):
    return np.corrcoef(lowpass(a, n).ravel(), lowpass(b, n).ravel())[0, 1]


def test_guidance_keeps_low_frequencies_closer_to_the_input():
    model = GaussianPriorNoise((16, 16))
    guided_cfg = GuidanceConfig(t_star=100, rounds=1, lowpass_factor=4)
    free_cfg = GuidanceConfig(t_star=100, rounds=1, lowpass_factor=4, guidance_enabled=False)

    guided, free = [], []
    for seed in range(20):
        y = structured_attacked_grid(seed)
        guided.append(lowpass_correlation(guided_reconstruct(y, model, SCHEDULE, guided_cfg, seed=seed), y))
        free.append(lowpass_correlation(guided_reconstruct(y, model, SCHEDULE, free_cfg, seed=seed), y))

    assert np.mean(guided) > np.mean(free)
