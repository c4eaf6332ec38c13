"""View augmentation: node dropping, edge perturbation, attribute masking,
random-walk subgraph sampling, and identity.

Every augmentation is a pure function of ``(graph, spec, seed)``; all
randomness comes from :class:`~infogcl.rng.SplitMix64`. Counts use
round-half-up, ``k = floor(ratio * size + 0.5)``.

Ratios mean "fraction removed" for ``node_drop``, ``edge_perturb`` and
``attr_mask``, and "fraction of nodes kept" for ``subgraph``. A ratio of 0
returns the input unchanged for every kind.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .rng import STREAM_CONSTANT, SplitMix64

log = logging.getLogger(__name__)

KINDS = ("identity", "node_drop", "edge_perturb", "attr_mask", "subgraph")


@dataclass(frozen=True)
class AugmentationSpec:
    kind: str = "identity"
    ratio: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown augmentation {self.kind!r}; expected one of {KINDS}")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"ratio must lie in [0, 1], got {self.ratio}")
        if self.kind == "identity" and self.ratio != 0.0:
            raise ValueError("identity takes ratio 0")
        if self.kind in ("node_drop", "subgraph") and self.ratio > 0.9:
            raise ValueError(f"{self.kind} ratio is capped at 0.9")

    @property
    def desc(self) -> str:
        return "identity" if self.kind == "identity" else f"{self.kind}({self.ratio:g})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "ratio": self.ratio}


IDENTITY = AugmentationSpec()


@dataclass(frozen=True, eq=False)
class View:
    graph: Graph
    origin_nodes: np.ndarray
    spec: AugmentationSpec
    seed: int


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _identity(g: Graph, spec: AugmentationSpec, seed: int) -> View:
    return View(g, np.arange(g.node_count), spec, seed)


def _node_drop(g: Graph, ratio: float, rng: SplitMix64) -> tuple[Graph, np.ndarray]:
    n = g.node_count
    k = min(round_half_up(ratio * n), n - 1)
    dropped = set(rng.sample(n, k).tolist())
    keep = np.array([i for i in range(n) if i not in dropped], dtype=np.int64)
    return g.induced(keep), keep


def _edge_perturb(g: Graph, ratio: float, rng: SplitMix64) -> Graph:
    edges = g.edge_list()
    n, m = g.node_count, len(edges)
    absent = n * (n - 1) // 2 - m
    k = min(round_half_up(ratio * m), absent)
    drop = set(rng.sample(m, k).tolist())
    present = set(edges)
    added: list[tuple[int, int]] = []
    chosen: set[tuple[int, int]] = set()
    while len(added) < k:
        u, v = rng.randbelow(n), rng.randbelow(n)
        if u == v:
            continue
        pair = (min(u, v), max(u, v))
        if pair in present or pair in chosen:
            continue
        chosen.add(pair)
        added.append(pair)
    kept = [e for i, e in enumerate(edges) if i not in drop]
    return Graph.from_edges(n, kept + added, g.attributes)


def _attr_mask(g: Graph, ratio: float, rng: SplitMix64) -> Graph:
    n = g.node_count
    k = round_half_up(ratio * n)
    masked = rng.sample(n, k)
    attrs = np.array(g.attributes)
    attrs[masked] = 0.0
    return Graph(g.adjacency, attrs)


def _subgraph(g: Graph, ratio: float, rng: SplitMix64) -> tuple[Graph, np.ndarray]:
    n = g.node_count
    target = max(1, math.ceil(ratio * n))
    adj = g.adjacency
    start = rng.randbelow(n)
    visited = {start}
    current = start
    steps = 0
    while len(visited) < target and steps < 10 * n:
        nbrs = adj.indices[adj.indptr[current]:adj.indptr[current + 1]]
        if len(nbrs) == 0:
            current = start
        else:
            current = int(nbrs[rng.randbelow(len(nbrs))])
            visited.add(current)
        steps += 1
    keep = np.array(sorted(visited), dtype=np.int64)
    return g.induced(keep), keep


def apply_augmentation(g: Graph, spec: AugmentationSpec, seed: int) -> View:
    """Draw one augmented view of ``g``.

    ``edge_perturb`` drops ``k`` existing edges and adds ``k`` absent,
    non-self-loop pairs (rejection-sampled from uniform ordered node pairs),
    so the edge count is preserved; on an edgeless graph it logs a warning
    and returns the input.
    """
    if spec.kind == "identity" or spec.ratio == 0.0:
        return _identity(g, spec, seed)
    rng = SplitMix64(seed)
    if spec.kind == "node_drop":
        graph, origin = _node_drop(g, spec.ratio, rng)
        return View(graph, origin, spec, seed)
    if spec.kind == "subgraph":
        graph, origin = _subgraph(g, spec.ratio, rng)
        return View(graph, origin, spec, seed)
    if spec.kind == "edge_perturb":
        if g.edge_count == 0:
            log.warning("edge_perturb on a graph without edges; returning it unchanged")
            return _identity(g, spec, seed)
        return View(_edge_perturb(g, spec.ratio, rng), np.arange(g.node_count), spec, seed)
    return View(_attr_mask(g, spec.ratio, rng), np.arange(g.node_count), spec, seed)


def make_view_pair(g: Graph, spec_i: AugmentationSpec, spec_j: AugmentationSpec, seed: int) -> tuple[View, View]:
    """Two views of ``g``; the second uses the stream ``seed ^ STREAM_CONSTANT``."""
    return apply_augmentation(g, spec_i, seed), apply_augmentation(g, spec_j, seed ^ STREAM_CONSTANT)


def align_views(view_i: View, view_j: View) -> tuple[np.ndarray, np.ndarray]:
    """Row indices of nodes present in both views, paired by source node."""
    _, idx_i, idx_j = np.intersect1d(view_i.origin_nodes, view_j.origin_nodes, return_indices=True)
    return idx_i, idx_j
