import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from infogcl.graph import Graph

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def path_graph():
    """Four nodes in a line with two attribute columns."""
    return Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)], np.arange(8, dtype=float).reshape(4, 2))


def random_graph(rng, n, p=0.4, d=3):
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return Graph.from_edges(n, edges, rng.uniform(-1, 1, (n, d)))
