"""Contrastive modes, scoring functions, InfoNCE and the negative-free loss.

A contrastive mode turns the two views' representations into one or more
weighted :class:`ContrastBatch` objects. Each batch pairs anchor rows with a
candidate set; ``targets[n]`` is the candidate that is anchor ``n``'s
positive and every other candidate row is a negative. ``positives`` holds the
matched candidate for each anchor, row-aligned with ``anchors``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .augment import View, align_views
from .autodiff import Tensor
from .encoder import Representations
from .errors import AlignmentError, NeedNegativesError, ShapeError

MODES = ("global_global", "local_global", "local_local", "multi_scale", "hybrid")


@dataclass(frozen=True)
class ModeSpec:
    mode: str = "local_global"
    multi_scale_layer: int | None = None
    hybrid_weight: float = 0.5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not 0.0 <= self.hybrid_weight <= 1.0:
            raise ValueError("hybrid_weight must lie in [0, 1]")

    def layer_for(self, layer_count: int) -> int:
        """Intermediate layer used by multi_scale; defaults to ``layer_count - 2``."""
        if self.multi_scale_layer is None:
            return layer_count - 2 if layer_count >= 2 else 0
        if not 0 <= self.multi_scale_layer < layer_count:
            raise ValueError(f"multi_scale_layer {self.multi_scale_layer} not below layer_count {layer_count}")
        return self.multi_scale_layer

    @property
    def desc(self) -> str:
        if self.mode == "multi_scale" and self.multi_scale_layer is not None:
            return f"multi_scale(layer={self.multi_scale_layer})"
        if self.mode == "hybrid":
            return f"hybrid(w={self.hybrid_weight:g})"
        return self.mode

    def to_dict(self) -> dict:
        return {"mode": self.mode, "multi_scale_layer": self.multi_scale_layer, "hybrid_weight": self.hybrid_weight}


@dataclass
class ScoreFn:
    kind: str = "cosine_with_temperature"
    temperature: float = 0.5
    bilinear_matrix: Tensor | None = None

    def __post_init__(self):
        if self.kind not in ("cosine_with_temperature", "bilinear"):
            raise ValueError(f"unknown score kind {self.kind!r}")
        if self.kind == "cosine_with_temperature" and not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.kind == "bilinear" and self.bilinear_matrix is None:
            raise ValueError("bilinear score needs a matrix")

    def __call__(self, anchors: Tensor, candidates: Tensor) -> Tensor:
        """All-pairs score matrix, anchors by candidates."""
        if anchors.shape[1] != candidates.shape[1]:
            raise ShapeError(f"score: widths {anchors.shape[1]} and {candidates.shape[1]} differ")
        if self.kind == "bilinear":
            return ad.matmul(ad.matmul(anchors, self.bilinear_matrix), ad.transpose(candidates))
        a = ad.row_l2_normalize(anchors)
        c = ad.row_l2_normalize(candidates)
        return ad.scalar_mul(ad.matmul(a, ad.transpose(c)), 1.0 / self.temperature)


@dataclass(eq=False)
class ContrastBatch:
    anchors: Tensor
    positives: Tensor
    candidates: Tensor
    targets: np.ndarray
    pair_meta: str = ""

    def __post_init__(self):
        n = self.anchors.shape[0]
        if n < 1:
            raise ShapeError("a contrast batch needs at least one row")
        if self.positives.shape[0] != n or len(self.targets) != n:
            raise ShapeError("anchors, positives and targets must have equal row counts")

    @classmethod
    def paired(cls, anchors: Tensor, positives: Tensor, pair_meta: str = "") -> "ContrastBatch":
        """Row ``n`` of ``positives`` is anchor ``n``'s positive; other rows are negatives."""
        return cls(anchors, positives, positives, np.arange(anchors.shape[0]), pair_meta)

    @property
    def size(self) -> int:
        return self.anchors.shape[0]


WeightedBatches = list[tuple[float, ContrastBatch]]


def _node_vs_graph(nodes: Tensor, graph_index: np.ndarray, graphs: Tensor, meta: str) -> ContrastBatch:
    return ContrastBatch(nodes, ad.gather_rows(graphs, graph_index), graphs, np.asarray(graph_index), meta)


def batch_alignment(views_i: Sequence[View], views_j: Sequence[View]) -> tuple[np.ndarray, np.ndarray]:
    """Stacked-row indices of nodes that survive in both views of the same graph."""
    rows_i, rows_j = [], []
    off_i = off_j = 0
    for vi, vj in zip(views_i, views_j):
        a, b = align_views(vi, vj)
        rows_i.append(a + off_i)
        rows_j.append(b + off_j)
        off_i += vi.graph.node_count
        off_j += vj.graph.node_count
    if not rows_i:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(rows_i), np.concatenate(rows_j)


def apply_mode(spec: ModeSpec, reps_i: Representations, reps_j: Representations,
               alignment: tuple[np.ndarray, np.ndarray] | None = None) -> WeightedBatches:
    """Weighted contrast batches for one contrastive mode.

    ``reps_i`` and ``reps_j`` are stacked representations of the same graphs
    in the same order. Symmetrized modes return one batch per direction with
    half weight each.
    """
    if reps_i.graph_count != reps_j.graph_count:
        raise ShapeError("both views must cover the same graphs")
    mode = spec.mode
    if mode == "global_global":
        return [(1.0, ContrastBatch.paired(reps_i.graph_embedding, reps_j.graph_embedding, "graph_i~graph_j"))]
    if mode == "local_global":
        return [
            (0.5, _node_vs_graph(reps_i.projected_nodes, reps_i.graph_index, reps_j.graph_embedding, "node_i~graph_j")),
            (0.5, _node_vs_graph(reps_j.projected_nodes, reps_j.graph_index, reps_i.graph_embedding, "node_j~graph_i")),
        ]
    if mode == "local_local":
        if alignment is None or len(alignment[0]) == 0:
            raise AlignmentError("local_local needs at least one node present in both views")
        rows_i, rows_j = alignment
        a = ad.gather_rows(reps_i.projected_nodes, rows_i)
        p = ad.gather_rows(reps_j.projected_nodes, rows_j)
        return [(1.0, ContrastBatch.paired(a, p, "node_i~node_j"))]
    if mode == "multi_scale":
        layer = spec.layer_for(len(reps_i.per_layer))
        return [
            (0.5, _node_vs_graph(reps_j.per_layer[layer], reps_j.graph_index, reps_i.graph_embedding,
                                 f"layer{layer}_j~graph_i")),
            (0.5, _node_vs_graph(reps_i.per_layer[layer], reps_i.graph_index, reps_j.graph_embedding,
                                 f"layer{layer}_i~graph_j")),
        ]
    w = spec.hybrid_weight
    gg = apply_mode(ModeSpec("global_global"), reps_i, reps_j)
    lg = apply_mode(ModeSpec("local_global"), reps_i, reps_j)
    return [(w * wt, b) for wt, b in gg] + [((1.0 - w) * wt, b) for wt, b in lg]


def infonce_from_scores(scores: Tensor, targets) -> Tensor:
    """``-(1/N) sum_n log softmax(scores[n])[targets[n]]``."""
    if scores.shape[1] < 2:
        raise NeedNegativesError("InfoNCE needs at least two candidates; use negfree_loss")
    logp = ad.pick(ad.log_softmax_rows(scores), targets)
    return ad.scalar_mul(ad.sum_all(logp), -1.0 / scores.shape[0])


def infonce_loss(batch: ContrastBatch, score: ScoreFn) -> Tensor:
    if batch.candidates.shape[0] < 2:
        raise NeedNegativesError("InfoNCE needs at least two candidates; use negfree_loss")
    return infonce_from_scores(score(batch.anchors, batch.candidates), batch.targets)


def _neg_mean_cosine(a: Tensor, p: Tensor) -> Tensor:
    cos = ad.row_dot(ad.row_l2_normalize(a), ad.row_l2_normalize(p))
    return ad.scalar_mul(ad.sum_all(cos), -1.0 / a.shape[0])


def negfree_loss(batch: ContrastBatch, stop_gradient: bool = False) -> Tensor:
    """Negative mean cosine similarity of anchor/positive rows.

    With ``stop_gradient`` the loss is the average of the two one-sided
    versions, each blocking gradient through the other side; its value is
    unchanged.
    """
    if not stop_gradient:
        return _neg_mean_cosine(batch.anchors, batch.positives)
    left = _neg_mean_cosine(batch.anchors, batch.positives.detach())
    right = _neg_mean_cosine(batch.anchors.detach(), batch.positives)
    return ad.scalar_mul(ad.add(left, right), 0.5)


def contrastive_loss(batches: WeightedBatches, score: ScoreFn, loss: str = "infonce",
                     stop_gradient: bool = False) -> Tensor:
    total = None
    for weight, batch in batches:
        if weight == 0.0:
            continue
        term = infonce_loss(batch, score) if loss == "infonce" else negfree_loss(batch, stop_gradient)
        term = ad.scalar_mul(term, weight)
        total = term if total is None else ad.add(total, term)
    if total is None:
        return Tensor(0.0)
    return total
