"""View encoders: GCN or GIN backbones, a projection head and a readout.

Batches of graphs are encoded as one block-diagonal graph; ``graph_index``
maps every stacked node row back to its graph.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .augment import View
from .autodiff import Tensor
from .errors import ShapeError
from .graph import Graph
from .rng import SplitMix64

CHECKPOINT_FORMAT = "infogcl-ckpt-v1"

Params = dict[str, Tensor]


@dataclass(frozen=True)
class EncoderSpec:
    backbone: str = "gin"
    layer_count: int = 2
    hidden_dim: int = 32
    gin_epsilon: float = 0.0
    projection_layers: int = 2
    readout: str = "mean"

    def __post_init__(self):
        if self.backbone not in ("gcn", "gin"):
            raise ValueError(f"unknown backbone {self.backbone!r}")
        if not 1 <= self.layer_count <= 4:
            raise ValueError("layer_count must be in [1, 4]")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be positive")
        if not math.isfinite(self.gin_epsilon):
            raise ValueError("gin_epsilon must be finite")
        if self.projection_layers not in (0, 1, 2):
            raise ValueError("projection_layers must be 0, 1 or 2")
        if self.readout not in ("mean", "sum"):
            raise ValueError(f"unknown readout {self.readout!r}")

    @property
    def desc(self) -> str:
        return f"{self.backbone}-{self.layer_count}x{self.hidden_dim}-proj{self.projection_layers}-{self.readout}"

    def to_dict(self) -> dict:
        return {
            "backbone": self.backbone, "layer_count": self.layer_count, "hidden_dim": self.hidden_dim,
            "gin_epsilon": self.gin_epsilon, "projection_layers": self.projection_layers, "readout": self.readout,
        }


@dataclass(eq=False)
class Representations:
    """Encoder outputs for one graph or a stacked batch of graphs.

    ``node_embeddings`` is the last backbone layer before projection,
    ``projected_nodes`` the projection head applied to it, and
    ``graph_embedding`` (one row per graph) the readout of the projected
    nodes.
    """

    node_embeddings: Tensor
    per_layer: list[Tensor]
    projected_nodes: Tensor
    graph_embedding: Tensor
    graph_index: np.ndarray

    @property
    def graph_count(self) -> int:
        return self.graph_embedding.shape[0]


# ------------------------------------------------------------------ parameters


def _glorot(rng: SplitMix64, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, (fan_in, fan_out))


def parameter_shapes(spec: EncoderSpec, in_dim: int) -> dict[str, tuple[int, int]]:
    h = spec.hidden_dim
    shapes: dict[str, tuple[int, int]] = {}
    dim = in_dim
    for layer in range(spec.layer_count):
        if spec.backbone == "gcn":
            shapes[f"layer{layer}.W"] = (dim, h)
        else:
            shapes[f"layer{layer}.W1"] = (dim, h)
            shapes[f"layer{layer}.b1"] = (1, h)
            shapes[f"layer{layer}.W2"] = (h, h)
            shapes[f"layer{layer}.b2"] = (1, h)
        dim = h
    for k in range(spec.projection_layers):
        shapes[f"proj.W{k + 1}"] = (h, h)
        shapes[f"proj.b{k + 1}"] = (1, h)
    return shapes


def init_params(spec: EncoderSpec, in_dim: int, seed: int) -> Params:
    """Glorot-uniform weights drawn in name order from ``seed``; zero biases."""
    rng = SplitMix64(seed)
    params = {}
    for name, shape in parameter_shapes(spec, in_dim).items():
        if ".b" in name:
            value = np.zeros(shape)
        else:
            value = _glorot(rng, *shape)
        params[name] = Tensor(value, requires_grad=True, name=name)
    return params


def save_checkpoint(params: Params, path: str | Path, meta: dict | None = None) -> Path:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "meta": meta or {},
        "params": {
            name: {"shape": list(t.shape), "values": [float(v) for v in t.value.reshape(-1)]}
            for name, t in sorted(params.items())
        },
    }
    path = Path(path)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path: str | Path) -> tuple[Params, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not an {CHECKPOINT_FORMAT} checkpoint")
    params = {
        name: Tensor(np.array(entry["values"], dtype=np.float64).reshape(entry["shape"]), requires_grad=True, name=name)
        for name, entry in doc["params"].items()
    }
    return params, doc.get("meta", {})


# ---------------------------------------------------------------------- layers


def _csr(adjacency) -> sp.csr_array:
    if isinstance(adjacency, Graph):
        adjacency = adjacency.adjacency
    return sp.csr_array(adjacency, dtype=np.float64)


def gcn_propagation(adjacency) -> sp.csr_array:
    """Symmetric normalization with self-loops, ``D^-1/2 (A + I) D^-1/2``."""
    a = _csr(adjacency)
    a_hat = a + sp.eye_array(a.shape[0], format="csr")
    d = np.asarray(a_hat.sum(axis=1)).ravel()
    scale = sp.diags_array(1.0 / np.sqrt(d))
    return sp.csr_array(scale @ a_hat @ scale)


def gin_propagation(adjacency, epsilon: float) -> sp.csr_array:
    """``A + (1 + eps) I``: neighbour sum plus the scaled self term."""
    a = _csr(adjacency)
    return sp.csr_array(a + (1.0 + epsilon) * sp.eye_array(a.shape[0], format="csr"))


def gcn_layer_forward(adjacency, h: Tensor, w: Tensor, propagation=None) -> Tensor:
    """``ReLU(D^-1/2 (A + I) D^-1/2 H W)``."""
    if h.shape[1] != w.shape[0]:
        raise ShapeError(f"gcn layer: features {h.shape} vs weights {w.shape}")
    prop = gcn_propagation(adjacency) if propagation is None else propagation
    if prop.shape[0] != h.shape[0]:
        raise ShapeError(f"gcn layer: adjacency {prop.shape} vs features {h.shape}")
    return ad.relu(ad.spmm(prop, ad.matmul(h, w)))


def gin_layer_forward(adjacency, h: Tensor, epsilon: float, mlp_weights: Sequence[Tensor], propagation=None) -> Tensor:
    """``MLP((1 + eps) h_v + sum of neighbour h_u)`` with ReLU between the two MLP layers.

    ``mlp_weights`` is ``(W1, W2)`` or ``(W1, b1, W2, b2)``.
    """
    if len(mlp_weights) == 2:
        w1, w2 = mlp_weights
        b1 = b2 = None
    else:
        w1, b1, w2, b2 = mlp_weights
    if h.shape[1] != w1.shape[0]:
        raise ShapeError(f"gin layer: features {h.shape} vs weights {w1.shape}")
    prop = gin_propagation(adjacency, epsilon) if propagation is None else propagation
    if prop.shape[0] != h.shape[0]:
        raise ShapeError(f"gin layer: adjacency {prop.shape} vs features {h.shape}")
    z = ad.matmul(ad.spmm(prop, h), w1)
    if b1 is not None:
        z = ad.add(z, b1)
    z = ad.matmul(ad.relu(z), w2)
    if b2 is not None:
        z = ad.add(z, b2)
    return z


def _project(spec: EncoderSpec, params: Params, h: Tensor) -> Tensor:
    for k in range(spec.projection_layers):
        h = ad.add(ad.matmul(h, params[f"proj.W{k + 1}"]), params[f"proj.b{k + 1}"])
        if k + 1 < spec.projection_layers:
            h = ad.relu(h)
    return h


# --------------------------------------------------------------------- encode


def _stack(graphs: Sequence[Graph]):
    adj = sp.block_diag([g.adjacency for g in graphs], format="csr")
    x = np.concatenate([g.attributes for g in graphs], axis=0)
    sizes = np.array([g.node_count for g in graphs])
    graph_index = np.repeat(np.arange(len(graphs)), sizes)
    return adj, x, sizes, graph_index


def readout_matrix(graph_index: np.ndarray, graph_count: int, how: str) -> sp.csr_array:
    n = len(graph_index)
    pool = sp.csr_array((np.ones(n), (graph_index, np.arange(n))), shape=(graph_count, n))
    if how == "mean":
        counts = np.bincount(graph_index, minlength=graph_count).astype(np.float64)
        pool = sp.csr_array(sp.diags_array(1.0 / np.maximum(counts, 1)) @ pool)
    return pool


def encode_graphs(spec: EncoderSpec, params: Params, graphs: Sequence[Graph]) -> Representations:
    """Encode several graphs as one block-diagonal batch."""
    adj, x, sizes, graph_index = _stack(graphs)
    if spec.backbone == "gcn":
        prop = gcn_propagation(adj)
    else:
        prop = gin_propagation(adj, spec.gin_epsilon)
    h = Tensor(x)
    per_layer = []
    for layer in range(spec.layer_count):
        if spec.backbone == "gcn":
            h = gcn_layer_forward(adj, h, params[f"layer{layer}.W"], propagation=prop)
        else:
            weights = [params[f"layer{layer}.{k}"] for k in ("W1", "b1", "W2", "b2")]
            h = ad.relu(gin_layer_forward(adj, h, spec.gin_epsilon, weights, propagation=prop))
        per_layer.append(h)
    projected = _project(spec, params, h)
    pooled = ad.spmm(readout_matrix(graph_index, len(graphs), spec.readout), projected)
    return Representations(h, per_layer, projected, pooled, graph_index)


def encode(spec: EncoderSpec, params: Params, view: View | Graph) -> Representations:
    g = view.graph if isinstance(view, View) else view
    return encode_graphs(spec, params, [g])


def split_representations(reps: Representations) -> list[Representations]:
    """Cut a stacked batch back into one :class:`Representations` per graph."""
    out = []
    for k in range(reps.graph_count):
        rows = np.nonzero(reps.graph_index == k)[0]
        out.append(Representations(
            ad.gather_rows(reps.node_embeddings, rows),
            [ad.gather_rows(t, rows) for t in reps.per_layer],
            ad.gather_rows(reps.projected_nodes, rows),
            ad.gather_rows(reps.graph_embedding, [k]),
            np.zeros(len(rows), dtype=np.int64),
        ))
    return out


def encode_batch(spec: EncoderSpec, params: Params, views: Sequence[View | Graph]) -> list[Representations]:
    graphs = [v.graph if isinstance(v, View) else v for v in views]
    return split_representations(encode_graphs(spec, params, graphs))


def evaluation_embeddings(spec: EncoderSpec, params: Params, graphs: Sequence[Graph], chunk: int = 256) -> np.ndarray:
    """Frozen graph features for linear probing.

    Readouts of every backbone layer, concatenated (pre-projection).
    """
    rows = []
    for start in range(0, len(graphs), chunk):
        reps = encode_graphs(spec, params, graphs[start:start + chunk])
        pool = readout_matrix(reps.graph_index, reps.graph_count, spec.readout)
        rows.append(np.concatenate([np.asarray(pool @ t.value) for t in reps.per_layer], axis=1))
    return np.concatenate(rows, axis=0)


def node_evaluation_embeddings(spec: EncoderSpec, params: Params, graph: Graph) -> np.ndarray:
    reps = encode_graphs(spec, params, [graph])
    return np.concatenate([t.value for t in reps.per_layer], axis=1)
