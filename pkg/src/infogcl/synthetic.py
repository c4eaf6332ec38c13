"""Synthetic graph generators with known generative factors.

:class:`SyntheticProcess` describes a finite distribution over factors
``(y, r, u)`` (label, relevant bits, nuisance bits) and a deterministic
emitter to a :class:`~infogcl.graph.Graph`. Because the support is small and
fully enumerable, mutual information between any deterministic functions of
the emitted graph can be computed exactly.

The remaining generators build seeded benchmark-style datasets used by the
selection procedures, the ablation and the demos.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .graph import Graph, GraphDataset, NodeTaskDataset
from .rng import SplitMix64

MAX_SUPPORT = 4096

Factors = tuple[int, tuple[int, ...], tuple[int, ...]]


@dataclass(frozen=True, eq=False)
class SyntheticProcess:
    support: tuple[Factors, ...]
    probs: np.ndarray
    emit: Callable[[int, tuple[int, ...], tuple[int, ...]], Graph]
    name: str = "process"

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if len(self.support) == 0 or len(self.support) > MAX_SUPPORT:
            raise ValueError(f"support size must be in [1, {MAX_SUPPORT}], got {len(self.support)}")
        if probs.shape != (len(self.support),) or (probs < 0).any() or abs(probs.sum() - 1) > 1e-9:
            raise ValueError("probs must be a distribution over the support")
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "probs", probs)

    @property
    def support_size(self) -> int:
        return len(self.support)

    @property
    def class_count(self) -> int:
        return max(2, max(y for y, _, _ in self.support) + 1)

    def enumerate(self) -> Iterator[tuple[float, Factors, Graph]]:
        """Yield ``(probability, factors, graph)`` for every support point."""
        for p, f in zip(self.probs, self.support):
            if p > 0:
                yield float(p), f, self.emit(*f)


def generate_synthetic_graphs(process: SyntheticProcess, count: int, seed: int) -> GraphDataset:
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = SplitMix64(seed)
    cache: dict[int, Graph] = {}
    graphs, labels = [], []
    for _ in range(count):
        k = rng.choice_weighted(process.probs)
        if k not in cache:
            cache[k] = process.emit(*process.support[k])
        graphs.append(cache[k])
        labels.append(process.support[k][0])
    return GraphDataset(tuple(graphs), np.array(labels), process.class_count, name=process.name)


# ------------------------------------------------------------ two-factor process


def _label_structure(y: int) -> list[tuple[int, int]]:
    if y == 0:
        return [(i, (i + 1) % 6) for i in range(6)]  # hexagon
    return [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]  # two bridged triangles


def two_factor_process(nuisance_bits: int = 2, relevant_bits: int = 0, p_label: float = 0.5) -> SyntheticProcess:
    """Label in the topology, nuisance only in the node attributes.

    ``y = 0`` emits a hexagon and ``y = 1`` two triangles joined by a bridge;
    both have six nodes. Each relevant bit that is set hangs a pendant node
    off the base node with the same index, so it too lives in the topology.
    Attributes are two columns: a constant 1 and a nuisance value in
    ``{-1, +1}``, where base node ``k`` carries nuisance bit ``k mod
    nuisance_bits`` (all zero when there are no nuisance bits). Factors are
    independent and uniform except for ``P(y = 1) = p_label``.
    """
    if not 0 <= relevant_bits <= 6:
        raise ValueError("relevant_bits must be in [0, 6]")

    def emit(y: int, r: tuple[int, ...], u: tuple[int, ...]) -> Graph:
        edges = _label_structure(y)
        n = 6
        for k, bit in enumerate(r):
            if bit:
                edges.append((k, n))
                n += 1
        attrs = np.zeros((n, 2))
        attrs[:, 0] = 1.0
        if u:
            for k in range(6):
                attrs[k, 1] = 2.0 * u[k % len(u)] - 1.0
        return Graph.from_edges(n, edges, attrs)

    support, probs = [], []
    for y in (0, 1):
        for r in itertools.product((0, 1), repeat=relevant_bits):
            for u in itertools.product((0, 1), repeat=nuisance_bits):
                support.append((y, tuple(r), tuple(u)))
                probs.append((p_label if y else 1 - p_label) / 2 ** (relevant_bits + nuisance_bits))
    return SyntheticProcess(tuple(support), np.array(probs), emit, name="two-factor")


def drop_nuisance(g: Graph) -> Graph:
    """Zero the nuisance attribute column of a two-factor graph."""
    attrs = np.array(g.attributes)
    attrs[:, 1:] = 0.0
    return Graph(g.adjacency, attrs)


# ---------------------------------------------------------- benchmark generators


def marker_distance_dataset(count: int, seed: int, cycle: int = 12, noise: float = 0.1) -> GraphDataset:
    """Cycles with two marked nodes at distance 3 (``y = 0``) or 4 (``y = 1``).

    Every node's closed 1-hop neighbourhood sees at most one marker in both
    classes, so a single propagation step over constant-degree cycles cannot
    tell the classes apart; two steps can. A third attribute column of
    label-independent uniform noise makes every graph distinct, which gives
    instance-level contrast something to separate.
    """
    rng = SplitMix64(seed)
    graphs, labels = [], []
    for _ in range(count):
        y = rng.randbelow(2)
        start = rng.randbelow(cycle)
        dist = 3 + y
        attrs = np.zeros((cycle, 3))
        attrs[:, 0] = 1.0
        attrs[start, 1] = attrs[(start + dist) % cycle, 1] = 1.0
        attrs[:, 2] = rng.uniform(-noise, noise, (cycle,))
        graphs.append(Graph.from_edges(cycle, [(i, (i + 1) % cycle) for i in range(cycle)], attrs))
        labels.append(y)
    return GraphDataset(tuple(graphs), np.array(labels), 2, name="marker-distance")


def triangle_count_dataset(count: int, seed: int, few: int = 1, many: int = 4,
                           backbone: int = 14) -> GraphDataset:
    """Random trees with ``few`` (``y = 0``) or ``many`` (``y = 1``) planted triangles.

    Attributes are a constant column, so the label is a graph-level motif
    count that no single node's neighbourhood reveals.
    """
    rng = SplitMix64(seed)
    graphs, labels = [], []
    for _ in range(count):
        y = rng.randbelow(2)
        edges = [(i, rng.randbelow(i)) for i in range(1, backbone)]
        n = backbone
        for _ in range(many if y else few):
            anchor = rng.randbelow(backbone)
            edges += [(anchor, n), (anchor, n + 1), (n, n + 1)]
            n += 2
        # pad the few-triangle graphs with pendant pairs so sizes match
        for _ in range((many - few) * (1 - y)):
            anchor = rng.randbelow(backbone)
            edges += [(anchor, n), (n, n + 1)]
            n += 2
        graphs.append(Graph.from_edges(n, edges, np.ones((n, 1))))
        labels.append(y)
    return GraphDataset(tuple(graphs), np.array(labels), 2, name="triangle-count")


def dense_graph_dataset(count: int, seed: int, classes: int = 2, nodes: tuple[int, int] = (12, 20),
                        density: float = 0.5, attr_dim: int = 8, signal: float = 0.4) -> GraphDataset:
    """Dense random graphs whose node attributes carry a class-dependent mean.

    Attributes are Gaussian-like (sum of uniforms) noise around a class
    centroid; edges are independent with probability ``density``.
    """
    rng = SplitMix64(seed)
    centroids = rng.uniform(-1.0, 1.0, (classes, attr_dim))
    graphs, labels = [], []
    for _ in range(count):
        y = rng.randbelow(classes)
        n = nodes[0] + rng.randbelow(nodes[1] - nodes[0] + 1)
        coins = rng.random_array(n * n).reshape(n, n)
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if coins[i, j] < density]
        noise = rng.uniform(-1.0, 1.0, (n, attr_dim, 3)).sum(axis=2)
        attrs = signal * centroids[y] + noise
        graphs.append(Graph.from_edges(n, edges, attrs))
        labels.append(y)
    return GraphDataset(tuple(graphs), np.array(labels), classes, name="dense-synthetic")


def sparse_node_task(n: int = 600, classes: int = 3, vocab: int = 300, words: int = 4,
                     p_in: float = 0.012, p_out: float = 0.001, word_noise: float = 0.5,
                     train_per_class: int = 20, seed: int = 0) -> NodeTaskDataset:
    """Citation-style node task: sparse topology and sparse binary features.

    Nodes belong to planted communities (the labels). Each node switches on
    ``words`` vocabulary entries, drawn from its class's slice of the
    vocabulary with probability ``1 - word_noise`` and uniformly otherwise.
    """
    rng = SplitMix64(seed)
    y = np.array([rng.randbelow(classes) for _ in range(n)])
    coins = rng.random_array(n * (n - 1) // 2)
    edges, k = [], 0
    for i in range(n):
        for j in range(i + 1, n):
            if coins[k] < (p_in if y[i] == y[j] else p_out):
                edges.append((i, j))
            k += 1
    slice_len = vocab // classes
    x = np.zeros((n, vocab))
    for i in range(n):
        for _ in range(words):
            if rng.random() < word_noise:
                x[i, rng.randbelow(vocab)] = 1.0
            else:
                x[i, y[i] * slice_len + rng.randbelow(slice_len)] = 1.0
    order = rng.permutation(n)
    train, test = [], []
    per_class = {c: 0 for c in range(classes)}
    for i in order.tolist():
        if per_class[y[i]] < train_per_class:
            train.append(i)
            per_class[y[i]] += 1
        else:
            test.append(i)
    g = Graph.from_edges(n, edges, x)
    return NodeTaskDataset(g, y, np.array(sorted(train)), np.array(sorted(test)), classes, name="sparse-node-task")
