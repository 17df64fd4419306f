"""Shared fixtures for the checker test suite."""

from pathlib import Path
from typing import Optional

import numpy as np
import pytest

from config import config
from gcn_model import GcnConfig, GcnModel
from graph_builder import GraphTensors, build_gui_graph, renormalize
from layout_parser import filter_visible, read_layout
from utils.db import bind_engine

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def fresh_config():
    """Undo --config / --seed / attribute overrides made by a test."""
    yield
    config.reset()


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def nav_layout_path() -> Path:
    return FIXTURES / "nav_layout.xml"


@pytest.fixture
def nav_tree(nav_layout_path):
    return filter_visible(read_layout(nav_layout_path))


@pytest.fixture
def nav_graph(nav_tree):
    return build_gui_graph(nav_tree)


@pytest.fixture
def database(tmp_path):
    """A throwaway SQLite database bound to the session factory."""
    url = f"sqlite:///{tmp_path}/findings.db"
    bind_engine(url)
    return url


@pytest.fixture
def tiny_config() -> GcnConfig:
    """Small architecture that still exercises pooling and the FC layer."""
    return GcnConfig(
        hidden_dims=(8, 6),
        fc_dim=6,
        self_dim=4,
        epochs=40,
        learning_rate=0.2,
        seed=3,
        optimizer="gd",
    )


def constant_model(class_index: int, n_nodes: int = 37) -> GcnModel:
    """A model whose FC bias alone decides: every node gets class_index."""
    model = GcnModel.initialize(GcnConfig(n_nodes=n_nodes))
    model.fc_weight[...] = 0.0
    model.fc_bias[...] = 0.0
    model.fc_bias[class_index] = 10.0
    return model


@pytest.fixture
def make_constant_model():
    return constant_model


def random_tensors(
    n_real: int,
    n_nodes: int,
    seed: int = 0,
    n_components: Optional[int] = None,
    in_dim: int = 14,
    density: float = 0.5,
) -> GraphTensors:
    """Random weighted symmetric graph with labeled components, zero-padded."""
    rng = np.random.default_rng(seed)
    n_components = n_real if n_components is None else n_components

    upper = np.triu(rng.random((n_real, n_real)) < density, k=1)
    weights = np.where(upper, rng.uniform(0.1, 1.0, (n_real, n_real)), 0.0)
    adjacency = np.zeros((n_nodes, n_nodes))
    adjacency[:n_real, :n_real] = weights + weights.T

    features = np.zeros((n_nodes, in_dim))
    features[:n_components] = rng.random((n_components, in_dim))

    labels = np.full(n_nodes, -1, dtype=np.int64)
    labels[:n_components] = rng.integers(0, 5, n_components)

    real_mask = np.zeros(n_nodes, dtype=bool)
    real_mask[:n_real] = True
    component_mask = np.zeros(n_nodes, dtype=bool)
    component_mask[:n_components] = True

    return GraphTensors(
        adjacency=adjacency,
        renormalized=renormalize(adjacency),
        features=features,
        labels=labels,
        real_mask=real_mask,
        component_mask=component_mask,
    )


@pytest.fixture
def make_tensors():
    return random_tensors
