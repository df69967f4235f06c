"""Shared fixtures: one tiny analytic dataset reused across test modules."""

import numpy as np
import pytest

from matlight import oracle
from matlight.dataset import load_scene
from matlight.fields import FieldConfig


TINY_BRDF_CFG = FieldConfig(hidden_layers=2, width=24, skip_at=1,
                            pe_frequencies=4, pe_frequencies_dir=3)
TINY_LIGHT_CFG = FieldConfig(hidden_layers=2, width=24, skip_at=1,
                             pe_frequencies=4, pe_frequencies_dir=3,
                             output_activation="exponential")


@pytest.fixture(scope="session")
def tiny_scene_dir(tmp_path_factory):
    """4 views of the sphere-on-plane scene at 32x32, cheap spp."""
    out = tmp_path_factory.mktemp("scene") / "toy"
    scene = oracle.make_scene("sphere-plane", lights="env")
    oracle.generate_dataset(scene, str(out), views=4, resolution=32, spp=64, holdout_k=4)
    return str(out)


@pytest.fixture(scope="session")
def tiny_scene(tiny_scene_dir):
    return load_scene(tiny_scene_dir)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
