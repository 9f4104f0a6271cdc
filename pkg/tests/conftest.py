"""Shared fixtures: tiny datasets and a quickly trained model.

The session-scoped model is deliberately small (it backs the module
tests for registration and pipeline plumbing); the acceptance tests
train their own desk-scale models.
"""

import numpy as np
import pytest

from lutimlp import data, pipeline


def make_toy_dataset(seed=0, n_clouds=80, n_points=64):
    """Two linearly separable shape classes: flat disks vs thin rods."""
    rng = np.random.default_rng(seed)
    clouds = []
    for i in range(n_clouds):
        label = i % 2
        scale = [1.0, 1.0, 0.05] if label == 0 else [0.05, 0.05, 1.0]
        pts = rng.normal(0.0, 1.0, (n_points, 3)) * scale
        clouds.append(data.normalize_unit_sphere(data.PointCloud(pts, label)))
    return clouds


@pytest.fixture(scope="session")
def toy_dataset():
    return make_toy_dataset()


@pytest.fixture(scope="session")
def mini_shapes():
    """Small 8-class sample of the synthetic shape generator."""
    return data.synth_shapes(seed=11, n_per_class=10, n_points=192)


@pytest.fixture(scope="session")
def trained_toy_model(mini_shapes):
    """End-to-end irregular model, small but genuinely trained."""
    variant = pipeline.Variant("luti_irr_e2e", d=4, k=64)
    cfg = pipeline.TrainConfig(epochs=40, batch_size=16, seed=3)
    return pipeline.train(variant, mini_shapes, cfg)
