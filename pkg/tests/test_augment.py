import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from infogcl.augment import (AugmentationSpec, align_views, apply_augmentation, make_view_pair, round_half_up)
from infogcl.graph import Graph, validate_graph
from infogcl.rng import STREAM_CONSTANT, SplitMix64

from conftest import random_graph

MASK = (1 << 64) - 1
FIXTURE_EDGES = [(0, 1), (0, 3), (1, 2), (1, 5), (2, 3), (2, 6), (3, 4), (4, 7), (5, 6), (6, 7)]


class Transcript:
    """Independent replay of the normative draw sequence."""

    def __init__(self, seed):
        self.s = seed

    def u64(self):
        self.s = (self.s + 0x9E3779B97F4A7C15) & MASK
        z = self.s
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def below(self, n):
        limit = 2 ** 64 - 2 ** 64 % n
        while True:
            x = self.u64()
            if x < limit:
                return x % n


def replay_edge_perturb(edges, n, ratio, seed):
    t = Transcript(seed)
    m = len(edges)
    k = int(ratio * m + 0.5)
    pool = list(range(m))
    for i in range(k):
        j = i + t.below(m - i)
        pool[i], pool[j] = pool[j], pool[i]
    dropped = set(pool[:k])
    added = []
    while len(added) < k:
        u, v = t.below(n), t.below(n)
        pair = (min(u, v), max(u, v))
        if u != v and pair not in edges and pair not in added:
            added.append(pair)
    return sorted([e for i, e in enumerate(edges) if i not in dropped] + added)


def test_edge_perturb_matches_transcript():
    g = Graph.from_edges(8, FIXTURE_EDGES)
    view = apply_augmentation(g, AugmentationSpec("edge_perturb", 0.3), 7)
    expected = replay_edge_perturb(FIXTURE_EDGES, 8, 0.3, 7)
    assert view.graph.edge_list() == expected
    # frozen from the replay above
    assert expected == [(0, 3), (1, 2), (1, 3), (1, 5), (1, 6), (2, 6), (3, 4), (4, 6), (5, 6), (6, 7)]


def test_node_drop_count():
    g = Graph.from_edges(10, [(i, i + 1) for i in range(9)])
    assert apply_augmentation(g, AugmentationSpec("node_drop", 0.2), 0).graph.node_count == 8


@pytest.mark.parametrize("kind", ["identity", "node_drop", "edge_perturb", "attr_mask", "subgraph"])
def test_zero_ratio_is_identity(path_graph, kind):
    view = apply_augmentation(path_graph, AugmentationSpec(kind, 0.0), 3)
    assert view.graph.equals(path_graph)
    assert view.origin_nodes.tolist() == [0, 1, 2, 3]


def test_identity_pair_and_determinism(path_graph):
    a, b = make_view_pair(path_graph, AugmentationSpec(), AugmentationSpec(), 1)
    assert a.graph.equals(path_graph) and b.graph.equals(path_graph)
    spec_i, spec_j = AugmentationSpec("node_drop", 0.3), AugmentationSpec("edge_perturb", 0.5)
    p1 = make_view_pair(path_graph, spec_i, spec_j, 11)
    p2 = make_view_pair(path_graph, spec_i, spec_j, 11)
    assert all(x.graph.equals(y.graph) for x, y in zip(p1, p2))


def test_second_view_uses_stream_constant(path_graph):
    spec = AugmentationSpec("attr_mask", 0.5)
    _, b = make_view_pair(path_graph, spec, spec, 21)
    assert b.graph.equals(apply_augmentation(path_graph, spec, 21 ^ STREAM_CONSTANT).graph)


def test_node_drop_subgraph_pair_on_twenty_nodes():
    g = Graph.from_edges(20, [(i, i + 1) for i in range(19)] + [(0, 10), (5, 15)])
    a, b = make_view_pair(g, AugmentationSpec("node_drop", 0.2), AugmentationSpec("subgraph", 0.5), 0)
    assert (a.graph.node_count, b.graph.node_count) == (16, 10)


def test_edge_perturb_on_edgeless_graph_warns(caplog):
    g = Graph.from_edges(3, [])
    with caplog.at_level(logging.WARNING):
        view = apply_augmentation(g, AugmentationSpec("edge_perturb", 0.5), 0)
    assert view.graph.equals(g) and "without edges" in caplog.text


def test_spec_validation():
    with pytest.raises(ValueError):
        AugmentationSpec("shuffle", 0.1)
    with pytest.raises(ValueError):
        AugmentationSpec("node_drop", 1.5)


graphs = st.builds(lambda seed, n: random_graph(SplitMix64(seed), n), st.integers(0, 2 ** 32), st.integers(2, 12))
ratios = st.floats(0.05, 0.9)
seeds = st.integers(0, 2 ** 40)


@given(graphs, ratios, seeds)
def test_edge_perturb_invariants(g, ratio, seed):
    v = apply_augmentation(g, AugmentationSpec("edge_perturb", ratio), seed).graph
    assert v.edge_count == g.edge_count
    assert validate_graph(v) == []


@given(graphs, ratios, seeds)
def test_attr_mask_invariants(g, ratio, seed):
    v = apply_augmentation(g, AugmentationSpec("attr_mask", ratio), seed).graph
    assert (v.adjacency != g.adjacency).nnz == 0
    zero = np.all(v.attributes == 0, axis=1)
    assert zero.sum() == round_half_up(ratio * g.node_count)
    assert np.array_equal(v.attributes[~zero], g.attributes[~zero])


@given(graphs, ratios, seeds, st.sampled_from(["node_drop", "subgraph"]))
def test_origin_nodes_consistent(g, ratio, seed, kind):
    v = apply_augmentation(g, AugmentationSpec(kind, ratio), seed)
    o = v.origin_nodes
    assert np.array_equal(v.graph.dense(), g.dense()[np.ix_(o, o)])
    assert np.array_equal(v.graph.attributes, g.attributes[o])


def _reachable(g, start):
    seen, todo = {start}, [start]
    dense = g.dense()
    while todo:
        u = todo.pop()
        for w in np.nonzero(dense[u])[0].tolist():
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


@given(graphs, ratios, seeds)
def test_subgraph_is_connected(g, ratio, seed):
    v = apply_augmentation(g, AugmentationSpec("subgraph", ratio), seed).graph
    assert _reachable(v, 0) == set(range(v.node_count))


@given(graphs, seeds)
def test_alignment_pairs_same_source(g, seed):
    a, b = make_view_pair(g, AugmentationSpec("node_drop", 0.4), AugmentationSpec("subgraph", 0.7), seed)
    ia, ib = align_views(a, b)
    assert np.array_equal(a.origin_nodes[ia], b.origin_nodes[ib])
    assert set(a.origin_nodes[ia].tolist()) == set(a.origin_nodes.tolist()) & set(b.origin_nodes.tolist())
