import numpy as np
import pytest

from tempr import generate_synthetic
from tempr.model import ModelConfig
from tempr.encoder import EncoderConfig
from tempr.tower import TowerConfig
from tempr.trainer import RunConfig


def tiny_model_config(**kw):
    """Smallest config that exercises every code path."""
    base = dict(
        num_classes=2,
        n_scales=2,
        strategy="increasing",
        frames=4,
        agg="adaptive",
        seed=0,
        encoder=EncoderConfig(in_channels=1, channels=8, grid=(2, 2, 2)),
        tower=TowerConfig(layers=1, latent_dim=2, channels=8, heads_cross=2,
                          heads_self=2, pe_bands=1),
    )
    base.update(kw)
    return ModelConfig(**base)


def tiny_run_config(**kw):
    base = dict(
        rho_list=[0.5],
        n_scales=2,
        frames=4,
        channels=8,
        grid=(2, 2, 2),
        latent_dim=2,
        layers=1,
        heads_cross=2,
        heads_self=2,
        pe_bands=1,
        epochs=1,
        base_lr=1e-3,
        batch_size=4,
        seed=0,
    )
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture(scope="session")
def tiny_dataset():
    return generate_synthetic(2, 5, T=8, H=8, W=8, seed=0)


def tiny_volumes(n_scales=2, n_batch=2, frames=4, seed=0):
    rng = np.random.default_rng(seed)
    return [rng.uniform(size=(n_batch, frames, 8, 8, 1)) for _ in range(n_scales)]
