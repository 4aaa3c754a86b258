import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bnnsat.factoring import BipartiteGraph
from bnnsat.model import BnnModel

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def bits_matrix(*neuron_rows):
    """Weight-bit matrix from one row per neuron (inputs as columns, bias first)."""
    return np.array(neuron_rows, dtype=np.uint8).T


@pytest.fixture
def fig2_bits():
    # neurons 1,2 agree exactly on inputs {0,2}; neurons 2,3 exactly on {1,3,4,5}
    return bits_matrix(
        [1, 0, 1, 0, 0, 0],
        [1, 1, 1, 1, 1, 1],
        [0, 1, 0, 1, 1, 1],
    )


@pytest.fixture
def fig3_bits():
    # input 3 starts with I = {1,2,3}; after intersecting with input 0, I = {1,2}
    return bits_matrix(
        [1, 0, 1, 0],
        [1, 1, 1, 0],
        [0, 0, 0, 0],
    )


@pytest.fixture
def fig4_graph():
    edges = {(1, 4), (1, 6), (1, 8), (2, 6), (2, 8), (2, 5), (3, 7), (3, 5)}
    return BipartiteGraph((1, 2, 3), (4, 5, 6, 7, 8), frozenset(edges))


@pytest.fixture
def table1_model():
    w = np.array([[-1], [1], [-1], [-1], [1]], dtype=np.int8)
    return BnnModel((4, 1), (w,))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
