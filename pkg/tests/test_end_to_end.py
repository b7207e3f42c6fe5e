"""End-to-end experiment: generate, train, evaluate."""

import numpy as np
import pytest

from pyrgm.config import NetworkConfig, RgmConfig, SolverConfig, TrainConfig
from pyrgm.synth import make_dataset
from pyrgm.train import evaluate, train


@pytest.mark.slow()
@pytest.mark.parametrize("protocol", ["clean", "unseen"])
def test_train_then_evaluate(tmp_path, protocol):
    """Train a small network and evaluate it on held-out samples."""
    make_dataset(protocol, pairs=8, n_points=64, seed=0, out_dir=tmp_path / "train", role="train")
    make_dataset(protocol, pairs=4, n_points=64, seed=1, out_dir=tmp_path / "test", role="test")
    network = NetworkConfig(k=8, feature_dim=32, mlp_widths=[16, 32], graph_dim=32, heads=4)
    config = RgmConfig(network=network, train=TrainConfig(epochs=3, lr=1e-3))

    weights, log = train(config, tmp_path / "train", tmp_path / "checkpoints")
    assert len(log) == 3
    assert all(np.isfinite(record["mean_loss"]) for record in log)
    assert len(list((tmp_path / "checkpoints").glob("checkpoint_*.bin"))) == 3

    for estimator in ("svd", "ransac"):
        report = evaluate(tmp_path / "test", weights, SolverConfig(estimator=estimator, tau=0.0), workers=2)
        assert report["summary"]["samples"] == 4
        assert report["summary"]["failed"] == 0
        assert report["settings"]["estimator"] == estimator

    oracle = evaluate(tmp_path / "test", None, oracle=True)
    assert oracle["summary"]["recall"] == 100
