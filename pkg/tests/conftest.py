"""Shared fixtures: a small striped dataset and a model trained on it.

Both are session scoped because training, even at this scale, dominates
the suite's runtime if repeated per test.
"""

import pytest

from gabordefect import net, synth, train
from gabordefect.augment import GridSpec, NoiseSpec


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthds")
    synth.generate_dataset(
        root, size=32, period=8.0, n_train=16, n_test_normal=8,
        n_test_defect=8, seed=3,
    )
    return root


@pytest.fixture(scope="session")
def tiny_model(synth_root, tmp_path_factory):
    """Parameters and config of a briefly trained 32px model."""
    cfg = net.ModelConfig(
        image_size=32, base_width=8, depth=2, patch_size=8,
        embed_dim=32, num_heads=4,
    )
    tcfg = train.TrainConfig(
        epochs=8, batch_size=8, learning_rate=1e-3,
        grid=GridSpec(8), noise=NoiseSpec(0.05, 0.05, 0.5), seed=0,
    )
    out = tmp_path_factory.mktemp("tinyrun")
    params, _ = train.fit(
        net.init_params(cfg, seed=0), cfg, tcfg,
        synth_root / "train" / "good", out,
    )
    return params, cfg
