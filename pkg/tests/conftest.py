import numpy as np
import pytest

from evidential_nav.distributions import Discretization, traversability_discretizations
from evidential_nav.simulator.terrain import flat_map
from evidential_nav.utils.config_manager import load_experiment_config

TINY_OVERRIDES = [
    "workers=1",
    "terrain.size_m=16.0",
    "terrain.resolution=0.5",
    "collection.episodes_per_map=2",
    "collection.max_steps=15",
    "evidential.encoder_widths=[8, 4]",
    "evidential.decoder_hidden=4",
    "evidential.head_hidden=4",
    "evidential.latent_dim=2",
    "evidential.flow_layers=2",
    "evidential.flow_hidden=4",
    "evidential.epochs=2",
    "evidential.batch_size=16",
    "planner.n_rollouts=16",
    "planner.horizon=10",
    "planner.max_steps=20",
    "benchmark.n_maps=3",
    "benchmark.seeds=[0]",
    "benchmark.methods=['PIETRA', 'EVORA', 'Physics Prior']",
    "benchmark.nav_methods=['PIETRA', 'Physics Prior']",
    "benchmark.alphas=[0.6]",
    "benchmark.nav_maps=1",
    "benchmark.n_goal_pairs=1",
    "benchmark.goal_distance=5.0",
    "benchmark.nav_seeds=[0]",
    "benchmark.sweep.kappa=[0.5]",
    "benchmark.sweep.entropy_weight=[0.0]",
    "benchmark.sweep.learning_rate=[0.001]",
]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_disc():
    """Two bins centered exactly on 0 and 1."""
    return Discretization(2, -0.5, 1.5)


@pytest.fixture
def discs():
    return traversability_discretizations(12)


@pytest.fixture
def flat_terrain():
    return flat_map(size_m=10.0, resolution=0.25)


@pytest.fixture
def tiny_overrides(monkeypatch):
    """Overrides shrinking the packaged experiment to something a test can run end to end."""
    monkeypatch.delenv("EVIDENTIAL_NAV_WORKERS", raising=False)
    monkeypatch.delenv("EVIDENTIAL_NAV_CONFIG", raising=False)
    return list(TINY_OVERRIDES)


@pytest.fixture
def tiny_config(tiny_overrides):
    return load_experiment_config(overrides=tiny_overrides)
