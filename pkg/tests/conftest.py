"""Shared fixtures: tiny configs and datasets sized for fast tests."""

import numpy as np
import pytest

from dwnet import HcnConfig, SynthConfig, synth_generate
from dwnet.nn import SgdConfig


def tiny_hcn_config(**overrides) -> HcnConfig:
    """Smallest config exercising every layer: T=8, K=5, 3 classes."""
    sgd = overrides.pop("sgd", None) or SgdConfig(
        learning_rate=0.01, momentum=0.9, weight_decay=1e-4,
        epochs=4, batch_size=4, seed=0,
    )
    base = dict(
        t_frames=8, joints=5, persons=2, num_classes=3,
        channels=(4, 4, 4, 8, 8), feature_dim=8, dropout_rate=0.0,
        sgd=sgd,
    )
    base.update(overrides)
    return HcnConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def tiny_dataset():
    """12 sequences, 3 classes, 5 joints; shared read-only across tests."""
    config = SynthConfig(classes=3, sequences_per_class=4, joints=5,
                         persons=2, frames=12, noise_sigma=0.5, seed=0)
    return synth_generate(config)
