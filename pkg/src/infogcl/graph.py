"""Graph data model, dataset containers and on-disk formats.

Two file layouts are supported:

* TU benchmark directories (``DS_A.txt``, ``DS_graph_indicator.txt``,
  ``DS_graph_labels.txt`` and optional node label / attribute files), read
  and written by :func:`parse_tu_dataset` and :func:`write_tu_dataset`.
* Single-graph node classification directories (``edges.tsv``,
  ``features.csv``, ``labels.csv``, ``split.json``), read by
  :func:`load_node_task`.

Node ids are 1-indexed in TU files and 0-indexed everywhere in memory.
"""

from __future__ import annotations

import json
from collections import Counter
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import FormatError, IngestError

log = logging.getLogger(__name__)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _as_csr(adj) -> sp.csr_array:
    if sp.issparse(adj):
        m = sp.csr_array(adj, dtype=np.int8, copy=True)
    else:
        m = sp.csr_array(np.asarray(adj).astype(np.int8))
    m.eliminate_zeros()
    m.sort_indices()
    for arr in (m.data, m.indices, m.indptr):
        arr.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected, unweighted graph with a dense node-attribute matrix.

    ``adjacency`` is held as a CSR matrix so that single-graph node tasks
    with tens of thousands of nodes stay cheap; :meth:`dense` gives the
    ordinary ``n x n`` array. Construction does not check invariants, so
    that :func:`validate_graph` can report on malformed inputs; use
    :meth:`from_edges` to build graphs that are valid by construction.
    """

    adjacency: sp.csr_array
    attributes: np.ndarray

    def __post_init__(self):
        adj = _as_csr(self.adjacency)
        attrs = np.asarray(self.attributes, dtype=np.float64)
        if attrs.ndim == 1:
            attrs = attrs.reshape(-1, 1) if attrs.size else attrs.reshape(adj.shape[0], 0)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "attributes", _frozen(attrs))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], attributes=None) -> "Graph":
        e = np.array([(u, v) for u, v in edges if u != v], dtype=np.int64).reshape(-1, 2)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        adj = sp.coo_array((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n)).tocsr()
        adj.data[:] = 1
        if attributes is None:
            attributes = np.ones((n, 1))
        return cls(adj, np.asarray(attributes, dtype=np.float64))

    @property
    def node_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def attr_dim(self) -> int:
        return self.attributes.shape[1]

    @property
    def edge_count(self) -> int:
        return int(sp.triu(self.adjacency, 1).count_nonzero())

    def dense(self) -> np.ndarray:
        return self.adjacency.toarray()

    def edge_list(self) -> list[tuple[int, int]]:
        """Undirected edges as ``(u, v)`` with ``u < v``, in row-major order."""
        upper = sp.triu(self.adjacency, 1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return list(zip(upper.row[order].tolist(), upper.col[order].tolist()))

    def edge_array(self) -> np.ndarray:
        return np.array(self.edge_list(), dtype=np.int64).reshape(-1, 2)

    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel().astype(np.int64)

    def induced(self, nodes: Sequence[int]) -> "Graph":
        idx = np.asarray(nodes, dtype=np.int64)
        return Graph(self.adjacency[idx][:, idx], self.attributes[idx])

    def permuted(self, perm: Sequence[int]) -> "Graph":
        """Relabel so that new node ``k`` is old node ``perm[k]``."""
        return self.induced(perm)

    def key(self) -> bytes:
        """Exact identity of the labeled graph, usable as a dict key."""
        n, d = self.attributes.shape
        head = np.array([n, d], dtype=np.int64).tobytes()
        return head + self.edge_array().tobytes() + self.attributes.tobytes()

    def equals(self, other: "Graph") -> bool:
        return (
            self.adjacency.shape == other.adjacency.shape
            and self.attributes.shape == other.attributes.shape
            and (self.adjacency != other.adjacency).nnz == 0
            and np.array_equal(self.attributes, other.attributes)
        )


def validate_graph(g: Graph) -> list[str]:
    """Describe every violated invariant of ``g``; empty when ``g`` is valid."""
    problems = []
    adj = g.adjacency
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        return [f"adjacency is not square: shape {adj.shape}"]
    n = adj.shape[0]
    if n < 1:
        problems.append("graph has no nodes")
    if np.any(adj.data != 1):
        problems.append("adjacency has entries other than 0 and 1")
    asym = (adj != adj.T).tocoo()
    if asym.nnz:
        problems.append(f"adjacency is asymmetric ({asym.nnz} entries, first at ({asym.row[0]}, {asym.col[0]}))")
    if n and np.any(adj.diagonal() != 0):
        problems.append("adjacency has self-loops on the diagonal")
    attrs = np.asarray(g.attributes)
    if attrs.ndim != 2 or attrs.shape[0] != n:
        problems.append(f"attributes have shape {attrs.shape}, expected {n} rows")
    elif not np.isfinite(attrs).all():
        problems.append("attributes contain non-finite values")
    return problems


@dataclass(frozen=True, eq=False)
class GraphDataset:
    graphs: tuple[Graph, ...]
    labels: np.ndarray
    class_count: int
    name: str = "dataset"

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", _frozen(labels))
        if len(labels) != len(self.graphs):
            raise ValueError(f"{len(labels)} labels for {len(self.graphs)} graphs")
        if self.class_count < 2:
            raise ValueError("a graph dataset needs at least two classes")
        if len(labels) and (labels.min() < 0 or labels.max() >= self.class_count):
            raise ValueError(f"labels must lie in [0, {self.class_count})")

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def attr_dim(self) -> int:
        return self.graphs[0].attr_dim if self.graphs else 0

    def subset(self, indices: Sequence[int]) -> "GraphDataset":
        idx = list(indices)
        return GraphDataset(tuple(self.graphs[i] for i in idx), self.labels[idx], self.class_count, self.name)

    def summary(self) -> dict:
        nodes = [g.node_count for g in self.graphs]
        edges = [g.edge_count for g in self.graphs]
        return {
            "name": self.name,
            "graphs": len(self.graphs),
            "avg_nodes": float(np.mean(nodes)) if nodes else 0.0,
            "avg_edges": float(np.mean(edges)) if edges else 0.0,
            "classes": self.class_count,
            "attr_dim": self.attr_dim,
        }


@dataclass(frozen=True, eq=False)
class NodeTaskDataset:
    graph: Graph
    labels: np.ndarray
    train_ids: np.ndarray
    test_ids: np.ndarray
    class_count: int
    name: str = "node-task"

    def __post_init__(self):
        for attr in ("labels", "train_ids", "test_ids"):
            object.__setattr__(self, attr, _frozen(np.asarray(getattr(self, attr), dtype=np.int64)))
        n = self.graph.node_count
        if len(self.labels) != n:
            raise ValueError(f"{len(self.labels)} labels for {n} nodes")
        if np.intersect1d(self.train_ids, self.test_ids).size:
            raise ValueError("train and test ids overlap")
        ids = np.concatenate([self.train_ids, self.test_ids])
        if ids.size and (ids.min() < 0 or ids.max() >= n):
            raise ValueError("split references a node outside the graph")
        if ids.size and (self.labels[ids] < 0).any():
            raise ValueError("split references an unlabeled node")

    def summary(self) -> dict:
        return {
            "name": self.name,
            "nodes": self.graph.node_count,
            "edges": self.graph.edge_count,
            "classes": self.class_count,
            "attr_dim": self.graph.attr_dim,
            "train": int(len(self.train_ids)),
            "test": int(len(self.test_ids)),
        }


# ---------------------------------------------------------------- TU format


def _read_lines(path: Path) -> list[tuple[int, str]]:
    with open(path, "r", encoding="utf-8") as fh:
        return [(i + 1, ln.strip()) for i, ln in enumerate(fh) if ln.strip()]


def _ints(path: Path, line_no: int, text: str, expected: int | None = None) -> list[int]:
    toks = [t.strip() for t in text.split(",")]
    try:
        vals = [int(t) for t in toks]
    except ValueError:
        raise FormatError(f"{path.name}:{line_no}: expected integers, got {text!r}") from None
    if expected is not None and len(vals) != expected:
        raise FormatError(f"{path.name}:{line_no}: expected {expected} values, got {len(vals)}")
    return vals


def _find_prefix(directory: Path) -> str:
    hits = sorted(directory.glob("*_A.txt"))
    if not hits:
        raise IngestError(f"no *_A.txt file in {directory}")
    return hits[0].name[: -len("_A.txt")]


def parse_tu_dataset(directory: str | Path) -> GraphDataset:
    """Read a TU benchmark directory into a :class:`GraphDataset`.

    Edges are symmetrized; duplicate edges and self-loops are dropped with a
    logged count. Node attributes come from ``DS_node_attributes.txt`` when
    present, else a one-hot of ``DS_node_labels.txt``, else a constant column.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestError(f"{directory} is not a directory")
    prefix = _find_prefix(directory)
    paths = {k: directory / f"{prefix}_{k}.txt" for k in ("A", "graph_indicator", "graph_labels", "node_labels", "node_attributes")}
    for req in ("A", "graph_indicator", "graph_labels"):
        if not paths[req].exists():
            raise IngestError(f"missing required file {paths[req].name}")

    indicator = [_ints(paths["graph_indicator"], ln, t, 1)[0] for ln, t in _read_lines(paths["graph_indicator"])]
    total_nodes = len(indicator)
    graph_ids = sorted(set(indicator))
    gid_index = {g: k for k, g in enumerate(graph_ids)}
    node_graph = np.array([gid_index[g] for g in indicator], dtype=np.int64)
    local = np.zeros(total_nodes, dtype=np.int64)
    sizes = np.zeros(len(graph_ids), dtype=np.int64)
    for i, g in enumerate(node_graph):
        local[i] = sizes[g]
        sizes[g] += 1

    edge_sets: list[set[tuple[int, int]]] = [set() for _ in graph_ids]
    seen: Counter = Counter()
    dropped_loops = 0
    for ln, text in _read_lines(paths["A"]):
        u, v = _ints(paths["A"], ln, text, 2)
        if not (1 <= u <= total_nodes and 1 <= v <= total_nodes):
            raise FormatError(f"{paths['A'].name}:{ln}: node id out of range 1..{total_nodes}")
        u, v = u - 1, v - 1
        if node_graph[u] != node_graph[v]:
            raise FormatError(f"{paths['A'].name}:{ln}: edge joins nodes of different graphs")
        if u == v:
            dropped_loops += 1
            continue
        seen[(u, v)] += 1
        a, b = sorted((int(local[u]), int(local[v])))
        edge_sets[node_graph[u]].add((a, b))
    # the symmetric listing of one edge is not a duplicate; repeats of (u, v) are
    dropped_dups = sum(c - 1 for c in seen.values())
    if dropped_loops or dropped_dups:
        log.warning("%s: dropped %d self-loops and %d duplicate edges", prefix, dropped_loops, dropped_dups)

    raw_labels = [_ints(paths["graph_labels"], ln, t, 1)[0] for ln, t in _read_lines(paths["graph_labels"])]
    if len(raw_labels) != len(graph_ids):
        raise FormatError(f"{len(raw_labels)} graph labels for {len(graph_ids)} graphs")
    classes = sorted(set(raw_labels))
    labels = np.array([classes.index(y) for y in raw_labels], dtype=np.int64)

    if paths["node_attributes"].exists():
        rows = []
        for ln, text in _read_lines(paths["node_attributes"]):
            try:
                rows.append([float(t) for t in text.split(",")])
            except ValueError:
                raise FormatError(f"{paths['node_attributes'].name}:{ln}: expected reals") from None
        if len(rows) != total_nodes or len({len(r) for r in rows}) > 1:
            raise FormatError(f"{paths['node_attributes'].name}: expected {total_nodes} rows of equal width")
        attrs = np.array(rows, dtype=np.float64)
    elif paths["node_labels"].exists():
        nl = [_ints(paths["node_labels"], ln, t)[0] for ln, t in _read_lines(paths["node_labels"])]
        if len(nl) != total_nodes:
            raise FormatError(f"{paths['node_labels'].name}: {len(nl)} rows for {total_nodes} nodes")
        values = sorted(set(nl))
        attrs = np.zeros((total_nodes, len(values)))
        attrs[np.arange(total_nodes), [values.index(x) for x in nl]] = 1.0
    else:
        attrs = np.ones((total_nodes, 1))

    graphs = []
    for g in range(len(graph_ids)):
        members = np.nonzero(node_graph == g)[0]
        graphs.append(Graph.from_edges(len(members), sorted(edge_sets[g]), attrs[members]))
    return GraphDataset(tuple(graphs), labels, max(len(classes), 2), name=prefix)


def write_tu_dataset(dataset: GraphDataset, directory: str | Path, name: str | None = None) -> Path:
    """Write ``dataset`` in TU layout; attributes go to ``DS_node_attributes.txt``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ds = name or dataset.name
    offset = 0
    with open(directory / f"{ds}_A.txt", "w", newline="\n") as fa, \
            open(directory / f"{ds}_graph_indicator.txt", "w", newline="\n") as fi, \
            open(directory / f"{ds}_node_attributes.txt", "w", newline="\n") as fx:
        for gi, g in enumerate(dataset.graphs):
            for u, v in g.edge_list():
                fa.write(f"{u + 1 + offset}, {v + 1 + offset}\n")
                fa.write(f"{v + 1 + offset}, {u + 1 + offset}\n")
            for row in g.attributes:
                fi.write(f"{gi + 1}\n")
                fx.write(", ".join(repr(float(x)) for x in row) + "\n")
            offset += g.node_count
    with open(directory / f"{ds}_graph_labels.txt", "w", newline="\n") as fl:
        fl.writelines(f"{int(y)}\n" for y in dataset.labels)
    return directory


# ---------------------------------------------------------- node-task format


def load_node_task(edges: str | Path, features: str | Path, labels: str | Path, split: str | Path,
                   name: str = "node-task") -> NodeTaskDataset:
    edges, features, labels, split = map(Path, (edges, features, labels, split))
    for p in (edges, features, labels, split):
        if not p.exists():
            raise IngestError(f"missing file {p}")
    try:
        x = np.loadtxt(features, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{features.name}: {exc}") from None
    y_rows = [t for _, t in _read_lines(labels)]
    try:
        y = np.array([int(t) for t in y_rows], dtype=np.int64)
    except ValueError:
        raise FormatError(f"{labels.name}: expected one integer per line") from None
    n = x.shape[0]
    if len(y) != n:
        raise FormatError(f"{features.name} has {n} rows but {labels.name} has {len(y)}")
    pairs = []
    for ln, text in _read_lines(edges):
        toks = text.split("\t")
        try:
            u, v = int(toks[0]), int(toks[1])
        except (ValueError, IndexError):
            raise FormatError(f"{edges.name}:{ln}: expected two tab-separated integers") from None
        if not (0 <= u < n and 0 <= v < n):
            raise FormatError(f"{edges.name}:{ln}: node id out of range 0..{n - 1}")
        pairs.append((u, v))
    with open(split) as fh:
        spec = json.load(fh)
    ids = {}
    for part in ("train", "test"):
        arr = np.asarray(spec.get(part, []), dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise FormatError(f"{split.name}: '{part}' references an unknown node")
        if arr.size and (y[arr] < 0).any():
            raise FormatError(f"{split.name}: '{part}' references an unlabeled node")
        ids[part] = arr
    if np.intersect1d(ids["train"], ids["test"]).size:
        raise FormatError(f"{split.name}: train and test overlap")
    graph = Graph.from_edges(n, pairs, x)
    classes = int(y.max()) + 1 if (y >= 0).any() else 0
    return NodeTaskDataset(graph, y, ids["train"], ids["test"], max(classes, 1), name=name)


def load_node_task_dir(directory: str | Path) -> NodeTaskDataset:
    d = Path(directory)
    return load_node_task(d / "edges.tsv", d / "features.csv", d / "labels.csv", d / "split.json", name=d.name)


def write_node_task(dataset: NodeTaskDataset, directory: str | Path) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "edges.tsv", "w", newline="\n") as fh:
        fh.writelines(f"{u}\t{v}\n" for u, v in dataset.graph.edge_list())
    with open(d / "features.csv", "w", newline="\n") as fh:
        for row in dataset.graph.attributes:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    with open(d / "labels.csv", "w", newline="\n") as fh:
        fh.writelines(f"{int(v)}\n" for v in dataset.labels)
    with open(d / "split.json", "w") as fh:
        json.dump({"train": dataset.train_ids.tolist(), "test": dataset.test_ids.tolist()}, fh)
    return d


def is_tu_directory(path: str | Path) -> bool:
    p = Path(path)
    return p.is_dir() and any(p.glob("*_A.txt"))
