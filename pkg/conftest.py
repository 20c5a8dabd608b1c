import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from src.channel.channel_model import GridSpec, Transmitter
from src.recovery.denoiser import DenoiserConfig, TrainConfig
from src.recovery.diffusion import GuidanceConfig, NoiseSchedule
from src.utils.config import DenoiserSection, EvaluationConfig, ScenarioConfig

settings.register_profile("ci", max_examples=200, deadline=None)
settings.register_profile("dev", max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the training-dependent case-study tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: trains a denoiser; only runs with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


class ZeroNoise:
    """Noise predictor that always answers zero"""

    def __init__(self, shape):
        self.image_shape = tuple(shape)
        self.calls = 0

    def predict_noise(self, x_t, t):
        self.calls += 1
        return np.zeros_like(np.asarray(x_t, dtype=np.float64))


@pytest.fixture
def zero_predictor():
    return ZeroNoise


@pytest.fixture
def tiny_denoiser_config():
    return DenoiserConfig(
        image_size=32,
        base_channels=8,
        channel_mults=(1, 2),
        num_res_blocks=1,
        attention_resolutions=(16,),
        time_emb_dim=16,
        groups=4,
        num_heads=2,
    )


@pytest.fixture
def small_config():
    """32x32 grid around a centered transmitter with a tiny denoiser and short schedule"""
    return ScenarioConfig(
        grid=GridSpec(rows=32, cols=32),
        tx=Transmitter(position_m=(64.0, 64.0, 0.0)),
        schedule=NoiseSchedule(timesteps=50),
        diffusion=GuidanceConfig(t_star=5, rounds=1, lowpass_factor=4),
        denoiser=DenoiserSection(
            base_channels=8,
            channel_mults=(1, 2),
            num_res_blocks=1,
            attention_resolutions=(16,),
            time_emb_dim=16,
            groups=4,
            num_heads=2,
        ),
        training=TrainConfig(steps=3, batch_size=2, checkpoint_every=2),
        evaluation=EvaluationConfig(seeds=1),
        dataset_count=4,
    )
