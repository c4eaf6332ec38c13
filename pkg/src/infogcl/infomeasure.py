"""Mutual-information estimation, component selection and exact optimality checks.

Three kinds of quantity live here:

* exact plug-in MI of a discrete joint (:func:`discrete_mi`), used directly on
  enumerable synthetic processes and on discretized view summaries;
* the InfoNCE lower bound ``ln N - L`` and a small bilinear critic that
  trains it on samples from a known joint;
* a probe-based proxy for ``I(z; y)``: label entropy minus held-out
  cross-entropy of a logistic probe.

The selection procedures rank augmentation pairs, encoders and contrastive
modes with these estimates; the ``verify_corollary*`` functions enumerate a
:class:`~infogcl.synthetic.SyntheticProcess` and compute every quantity
exactly.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Hashable, Sequence

import numpy as np

from . import autodiff as ad
from .augment import AugmentationSpec, View, make_view_pair
from .autodiff import Tensor
from .contrast import ContrastBatch, ModeSpec, ScoreFn, infonce_loss
from .encoder import EncoderSpec
from .errors import DivergenceError, DomainError, NumericError
from .graph import Graph, GraphDataset, NodeTaskDataset
from .optim import AdamState, adam_step, fit_probe, probe_cross_entropy, stratified_folds
from .rng import SplitMix64, derive_seed
from .synthetic import SyntheticProcess

log = logging.getLogger(__name__)

MASS_TOL = 1e-9
EXACT_TOL = 1e-9
DEFAULT_BINS = 8
ATTR_CAP = 8


# ------------------------------------------------------------------ discrete MI


@dataclass(frozen=True, eq=False)
class DiscreteJoint:
    """Joint probability table of two discrete variables, rows U and columns V."""

    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=np.float64)
        if t.ndim != 2 or t.size == 0:
            raise DomainError(f"joint table must be a non-empty matrix, got shape {t.shape}")
        if not np.all(np.isfinite(t)) or (t < 0).any():
            raise DomainError("joint table has a negative or non-finite entry")
        if abs(t.sum() - 1.0) > MASS_TOL:
            raise DomainError(f"joint mass is {t.sum()!r}, expected 1")
        t.flags.writeable = False
        object.__setattr__(self, "table", t)

    @classmethod
    def from_samples(cls, u: Sequence[Hashable], v: Sequence[Hashable]) -> "DiscreteJoint":
        """Empirical joint of paired observations."""
        if len(u) != len(v) or len(u) == 0:
            raise DomainError("need the same positive number of samples for both variables")
        ui = _codes(u)
        vi = _codes(v)
        table = np.zeros((ui.max() + 1, vi.max() + 1))
        np.add.at(table, (ui, vi), 1.0)
        return cls(table / len(u))

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.table.sum(axis=1), self.table.sum(axis=0)


@dataclass(frozen=True)
class MiEstimate:
    nats: float
    estimator: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {"nats": self.nats, "estimator": self.estimator, "detail": self.detail}


def _codes(values: Sequence[Hashable]) -> np.ndarray:
    """Dense integer codes in order of first appearance."""
    index: dict[Hashable, int] = {}
    return np.array([index.setdefault(v, len(index)) for v in values], dtype=np.int64)


def entropy(p) -> float:
    """Shannon entropy in nats; zero-probability cells contribute nothing."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def discrete_mi(joint: DiscreteJoint) -> MiEstimate:
    """Plug-in mutual information ``sum p(u,v) ln[p(u,v) / (p(u) p(v))]``."""
    t = joint.table
    pu, pv = joint.marginals()
    nz = t > 0
    ratio = t[nz] / np.outer(pu, pv)[nz]
    value = float((t[nz] * np.log(ratio)).sum())
    return MiEstimate(max(value, 0.0), "plugin", f"support {t.shape[0]}x{t.shape[1]}")


def sample_mi(u: Sequence[Hashable], v: Sequence[Hashable]) -> float:
    return discrete_mi(DiscreteJoint.from_samples(u, v)).nats


def compute_ib_objective(i_dz: float, i_zy: float, beta: float) -> float:
    """Information-bottleneck trade-off ``-I(D;Z) + beta * I(Z;y)``."""
    return -i_dz + beta * i_zy


def mi_lower_bound_from_nce(loss: float, n: int) -> MiEstimate:
    """``ln n - loss``: the mutual-information lower bound certified by an InfoNCE loss on ``n`` candidates."""
    if n < 2:
        raise DomainError("the InfoNCE bound needs at least two candidates")
    if loss < 0:
        raise DomainError("an InfoNCE loss is never negative")
    return MiEstimate(math.log(n) - loss, "nce_bound", f"N={n}")


# ---------------------------------------------------------------- NCE critic


@dataclass
class CriticTrace:
    """Held-out bound after every evaluation interval of :func:`train_nce_critic`."""

    steps: list[int]
    bounds: list[float]
    batch_size: int
    exact: float

    @property
    def final(self) -> MiEstimate:
        return MiEstimate(self.bounds[-1], "nce_bound", f"N={self.batch_size}, bilinear critic, {self.steps[-1]} steps")


def _one_hot(codes: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros((len(codes), size))
    out[np.arange(len(codes)), codes] = 1.0
    return out


def train_nce_critic(joint: DiscreteJoint, batch_size: int = 64, steps: int = 300, lr: float = 0.05,
                     seed: int = 0, eval_every: int = 25, eval_batches: int = 50) -> CriticTrace:
    """Fit a bilinear critic ``h(u, v) = e_u^T W e_v`` by minimizing InfoNCE on sampled pairs.

    The held-out bound is the mean of ``ln N - L`` over ``eval_batches``
    fresh batches, recorded at step 0 and every ``eval_every`` steps.
    """
    rows, cols = joint.table.shape
    flat = joint.table.reshape(-1)
    rng = SplitMix64(seed)
    eval_rng = SplitMix64(seed ^ 0x5EED)
    w = Tensor(np.zeros((rows, cols)), requires_grad=True, name="critic")
    score = ScoreFn("bilinear", bilinear_matrix=w)
    state = AdamState()

    def draw(r: SplitMix64) -> ContrastBatch:
        cells = np.array([r.choice_weighted(flat) for _ in range(batch_size)])
        return ContrastBatch.paired(Tensor(_one_hot(cells // cols, rows)), Tensor(_one_hot(cells % cols, cols)))

    held_out = [draw(eval_rng) for _ in range(eval_batches)]

    def evaluate() -> float:
        losses = [infonce_loss(b, ScoreFn("bilinear", bilinear_matrix=Tensor(w.value))).item() for b in held_out]
        return mi_lower_bound_from_nce(float(np.mean(losses)), batch_size).nats

    trace_steps, bounds = [0], [evaluate()]
    for step in range(1, steps + 1):
        batch = draw(rng)
        with ad.Tape() as tape:
            loss = infonce_loss(batch, score)
        grads = ad.backward(tape, loss)
        adam_step({"W": w}, {"W": grads.get(w, np.zeros(w.shape))}, state, lr)
        if step % eval_every == 0 or step == steps:
            trace_steps.append(step)
            bounds.append(evaluate())
    return CriticTrace(trace_steps, bounds, batch_size, discrete_mi(joint).nats)


# ------------------------------------------------------------- probe proxy


def label_mi_proxy(embeddings, labels, folds: int = 5, seed: int = 0, class_count: int | None = None) -> MiEstimate:
    """Estimate ``I(z; y)`` as ``H(y) - CE``, clamped at zero.

    ``CE`` is the mean held-out cross-entropy of a logistic probe over
    stratified folds, so the value is a lower bound on the label information
    that a linear read-out can extract.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or len(x) != len(y):
        raise DomainError("embeddings must be an N x h matrix with one label per row")
    classes = np.unique(y)
    if len(classes) < 2:
        raise DomainError("label_mi_proxy needs at least two classes")
    if len(y) < 2 * folds:
        raise DomainError(f"need at least {2 * folds} samples for {folds} folds")
    c = int(class_count if class_count is not None else y.max() + 1)
    h_y = entropy(np.bincount(y, minlength=c) / len(y))
    total = 0.0
    for test in stratified_folds(y, folds, seed):
        train = np.setdiff1d(np.arange(len(y)), test)
        probe = fit_probe(x[train], y[train], c)
        total += probe_cross_entropy(probe, x[test], y[test]) * len(test)
    ce = total / len(y)
    return MiEstimate(max(0.0, h_y - ce), "label_probe", f"{folds}-fold logistic probe, H(y)={h_y:.6f}, CE={ce:.6f}")


# ------------------------------------------------------------- view summary


@dataclass(frozen=True, eq=False)
class SummaryEdges:
    """Dataset-level discretization of view summaries.

    ``degree_edges`` split node degrees into the four histogram buckets;
    ``coord_edges[k]`` are the quantile bin edges of summary coordinate ``k``.
    """

    degree_edges: np.ndarray
    coord_edges: tuple[np.ndarray, ...]
    attr_dims: int
    bins: int


def summary_features(graph: Graph, degree_edges: np.ndarray, attr_dims: int) -> np.ndarray:
    """Real-valued summary: 4-bucket degree histogram (fractions) and leading attribute means."""
    deg = graph.degrees()
    buckets = np.searchsorted(degree_edges, deg, side="right")
    hist = np.bincount(buckets, minlength=4) / graph.node_count
    means = graph.attributes[:, :attr_dims].mean(axis=0) if attr_dims else np.zeros(0)
    return np.concatenate([hist, means])


def quantile_edges(values, bins: int) -> np.ndarray:
    """Bin edges for one coordinate; symbols are ``searchsorted(edges, v, side="right")``.

    A coordinate with at most ``bins`` distinct values gets one bin per value
    (edges at the midpoints between them), so heavy ties cannot merge
    distinct values into one bin. Otherwise the edges are the distinct
    ``k / bins`` quantiles.
    """
    v = np.asarray(values, dtype=np.float64)
    distinct = np.unique(v)
    if len(distinct) <= bins:
        return (distinct[:-1] + distinct[1:]) / 2.0
    return np.unique(np.quantile(v, np.arange(1, bins) / bins))


def fit_summary_edges(graphs: Sequence[Graph], bins: int = DEFAULT_BINS, attr_cap: int = ATTR_CAP) -> SummaryEdges:
    if bins < 2:
        raise DomainError("bins must be at least 2")
    if not graphs:
        raise DomainError("cannot fit summary edges on an empty dataset")
    all_deg = np.concatenate([g.degrees() for g in graphs])
    degree_edges = quantile_edges(all_deg, 4)
    attr_dims = min(graphs[0].attr_dim, attr_cap)
    feats = np.stack([summary_features(g, degree_edges, attr_dims) for g in graphs])
    coord = tuple(quantile_edges(feats[:, k], bins) for k in range(feats.shape[1]))
    return SummaryEdges(degree_edges, coord, attr_dims, bins)


def view_summary(view: View | Graph, edges: SummaryEdges) -> np.ndarray:
    """Discrete symbol per summary coordinate, using dataset-level bin edges."""
    g = view.graph if isinstance(view, View) else view
    feats = summary_features(g, edges.degree_edges, edges.attr_dims)
    return np.array([np.searchsorted(e, v, side="right") for e, v in zip(edges.coord_edges, feats)], dtype=np.int64)


def _coordinate_mi(a: np.ndarray, b: np.ndarray) -> float:
    """Mean over columns of plug-in MI between matching columns of two symbol tables."""
    return float(np.mean([sample_mi(a[:, k].tolist(), b[:, k].tolist()) for k in range(a.shape[1])]))


# --------------------------------------------------------------- selection


@dataclass
class Candidate:
    desc: str
    score: float
    components: dict[str, MiEstimate]
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        score = self.score if math.isfinite(self.score) else None
        return {
            "desc": self.desc,
            "score": score,
            "components": {k: v.nats for k, v in self.components.items()},
            "flags": list(self.flags),
        }


def rank_candidates(candidates: Sequence[Candidate]) -> list[int]:
    """Indices by score descending; ties break by description, then index."""
    return sorted(range(len(candidates)), key=lambda i: (-candidates[i].score, candidates[i].desc, i))


@dataclass
class SelectionReport:
    task: str
    candidates: list[Candidate]
    ranking: list[int]
    config_echo: dict = field(default_factory=dict)
    detail: str = ""

    @property
    def best(self) -> Candidate:
        return self.candidates[self.ranking[0]]

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "candidates": [c.to_dict() for c in self.candidates],
            "ranking": list(self.ranking),
            "config_echo": self.config_echo,
            "detail": self.detail,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _report(task: str, candidates: list[Candidate], echo: dict, detail: str) -> SelectionReport:
    return SelectionReport(task, candidates, rank_candidates(candidates), echo, detail)


def score_augmentation_pair(dataset: GraphDataset, spec_i: AugmentationSpec, spec_j: AugmentationSpec, seed: int,
                            bins: int = DEFAULT_BINS, edges: SummaryEdges | None = None) -> tuple[float, dict[str, MiEstimate]]:
    """``I(v_i; y) + I(v_j; y) - I(v_i; v_j)`` from one view pair per graph.

    Each term is plug-in MI on discretized view summaries, averaged over the
    summary coordinates. The two specs are put in a canonical order before
    views are drawn, so swapping them gives the same score.
    """
    if len(np.unique(dataset.labels)) < 2:
        raise DomainError("augmentation scoring needs at least two classes")
    if edges is None:
        edges = fit_summary_edges(dataset.graphs, bins)
    swapped = (spec_j.desc, spec_j.kind) < (spec_i.desc, spec_i.kind)
    first, second = (spec_j, spec_i) if swapped else (spec_i, spec_j)
    sym_a, sym_b = [], []
    for idx, g in enumerate(dataset.graphs):
        va, vb = make_view_pair(g, first, second, derive_seed(seed, idx))
        sym_a.append(view_summary(va, edges))
        sym_b.append(view_summary(vb, edges))
    a, b = np.stack(sym_a), np.stack(sym_b)
    y = np.repeat(np.asarray(dataset.labels)[:, None], a.shape[1], axis=1)
    i_a_y, i_b_y, i_ab = _coordinate_mi(a, y), _coordinate_mi(b, y), _coordinate_mi(a, b)
    if swapped:
        i_a_y, i_b_y = i_b_y, i_a_y
    detail = f"plug-in MI averaged over {a.shape[1]} summary coordinates, bins={edges.bins}"
    comps = {
        "i_vi_y": MiEstimate(i_a_y, "plugin", detail),
        "i_vj_y": MiEstimate(i_b_y, "plugin", detail),
        "i_vi_vj": MiEstimate(i_ab, "plugin", detail),
    }
    return i_a_y + i_b_y - i_ab, comps


def pair_desc(spec_i: AugmentationSpec, spec_j: AugmentationSpec) -> str:
    return f"{spec_i.desc} + {spec_j.desc}"


def select_augmentations(dataset: GraphDataset, candidates: Sequence[AugmentationSpec], seed: int,
                         bins: int = DEFAULT_BINS) -> SelectionReport:
    """Score every unordered pair of candidates, same-kind pairs included."""
    if not candidates:
        raise DomainError("need at least one augmentation candidate")
    edges = fit_summary_edges(dataset.graphs, bins)
    out = []
    for i in range(len(candidates)):
        for j in range(i, len(candidates)):
            score, comps = score_augmentation_pair(dataset, candidates[i], candidates[j], seed, bins, edges)
            out.append(Candidate(pair_desc(candidates[i], candidates[j]), score, comps))
    echo = {"candidates": [c.to_dict() for c in candidates], "seed": seed, "bins": bins, "dataset": dataset.name}
    return _report("augmentation", out, echo, "score = I(vi;y) + I(vj;y) - I(vi;vj); coordinate-averaged plug-in MI")


def _task_embeddings(spec: EncoderSpec, params, dataset) -> tuple[np.ndarray, np.ndarray]:
    from .encoder import evaluation_embeddings, node_evaluation_embeddings

    if isinstance(dataset, NodeTaskDataset):
        emb = node_evaluation_embeddings(spec, params, dataset.graph)
        ids = np.concatenate([dataset.train_ids, dataset.test_ids])
        return emb[ids], np.asarray(dataset.labels)[ids]
    return evaluation_embeddings(spec, params, dataset.graphs), np.asarray(dataset.labels)


def _train_and_score(config, dataset, embed: Callable, desc: str, folds: int) -> Candidate:
    from .pipeline import train

    flags = []
    if config.epochs == 0:
        flags.append("untrained")
    try:
        params, history = train(config, dataset)
    except (DivergenceError, NumericError) as exc:
        log.warning("candidate %s diverged: %s", desc, exc)
        return Candidate(desc, float("-inf"), {}, ["diverged"])
    x, y = embed(config, params)
    est = label_mi_proxy(x, y, folds=folds, seed=config.seed, class_count=dataset.class_count)
    comps = {"i_z_y": est}
    if history:
        comps["final_loss"] = MiEstimate(history[-1], "train_loss", "epoch-mean contrastive loss")
    return Candidate(desc, est.nats, comps, flags)


def select_encoder(dataset, view_pair: tuple[AugmentationSpec, AugmentationSpec], candidates: Sequence[EncoderSpec],
                   train_budget: int, seed: int, base_config=None, folds: int = 5) -> SelectionReport:
    """Train each encoder candidate and score its frozen embeddings with :func:`label_mi_proxy`.

    Every candidate trains from the same seed, so duplicate candidates get
    identical scores.
    """
    from .pipeline import TrainConfig

    if not candidates:
        raise DomainError("need at least one encoder candidate")
    base = base_config or TrainConfig.default_for(dataset)
    out = []
    for spec in candidates:
        cfg = replace(base, aug_i=view_pair[0], aug_j=view_pair[1], encoder=spec, epochs=train_budget, seed=seed)
        out.append(_train_and_score(cfg, dataset, lambda c, p: _task_embeddings(c.encoder, p, dataset), spec.desc, folds))
    echo = {"candidates": [c.to_dict() for c in candidates], "view_pair": [view_pair[0].to_dict(), view_pair[1].to_dict()],
            "train_budget": train_budget, "seed": seed}
    return _report("encoder", out, echo, "score = H(y) - CE of a logistic probe on frozen embeddings")


def mode_embeddings(config, params, dataset) -> tuple[np.ndarray, np.ndarray]:
    """The representation a mode's aggregation hands to the contrast.

    Graph tasks use the projected graph-level readout; node tasks use the
    projected node embeddings of the labeled nodes.
    """
    from .encoder import encode_graphs

    if isinstance(dataset, NodeTaskDataset):
        reps = encode_graphs(config.encoder, params, [dataset.graph])
        ids = np.concatenate([dataset.train_ids, dataset.test_ids])
        return reps.projected_nodes.value[ids], np.asarray(dataset.labels)[ids]
    rows = []
    for start in range(0, len(dataset.graphs), 256):
        rows.append(encode_graphs(config.encoder, params, dataset.graphs[start:start + 256]).graph_embedding.value)
    return np.concatenate(rows), np.asarray(dataset.labels)


def select_mode(dataset, candidates: Sequence[ModeSpec], seed: int, base_config=None, train_budget: int = 20,
                folds: int = 5) -> SelectionReport:
    """Retrain under each contrastive mode and score the aggregated representations."""
    from .pipeline import TrainConfig

    if not candidates:
        raise DomainError("need at least one mode candidate")
    base = base_config or TrainConfig.default_for(dataset)
    out = []
    for spec in candidates:
        cfg = replace(base, mode=spec, epochs=train_budget, seed=seed)
        out.append(_train_and_score(cfg, dataset, lambda c, p: mode_embeddings(c, p, dataset), spec.desc, folds))
    echo = {"candidates": [c.to_dict() for c in candidates], "train_budget": train_budget, "seed": seed}
    return _report("mode", out, echo, "score = H(y) - CE of a logistic probe on the mode's aggregated representations")


# ----------------------------------------------------- exact verification


def _symbol(x) -> Hashable:
    if isinstance(x, View):
        x = x.graph
    if isinstance(x, Graph):
        return x.key()
    if isinstance(x, np.ndarray):
        return (x.shape, x.dtype.str, x.tobytes())
    return x


class ExactTable:
    """Probability-weighted columns of symbols over an enumerated support."""

    def __init__(self, probs: np.ndarray):
        self.probs = np.asarray(probs, dtype=np.float64)
        self.columns: dict[str, np.ndarray] = {}

    def add(self, name: str, values: Sequence[Hashable]) -> None:
        self.columns[name] = _codes([_symbol(v) for v in values])

    def entropy(self, *names: str) -> float:
        if not names:
            return 0.0
        stacked = np.stack([self.columns[n] for n in names], axis=1)
        _, inverse = np.unique(stacked, axis=0, return_inverse=True)
        return entropy(np.bincount(inverse.reshape(-1), weights=self.probs))

    def mi(self, a: str, b: str, given: Sequence[str] = ()) -> float:
        """``I(a; b | given)`` from joint entropies."""
        g = tuple(given)
        value = self.entropy(a, *g) + self.entropy(b, *g) - self.entropy(a, b, *g) - self.entropy(*g)
        return max(value, 0.0) if abs(value) < 1e-12 else value


def _enumerate(process: SyntheticProcess):
    if not isinstance(process, SyntheticProcess):
        raise DomainError("exact verification needs an enumerable SyntheticProcess")
    points = list(process.enumerate())
    probs = np.array([p for p, _, _ in points])
    labels = [f[0] for _, f, _ in points]
    graphs = [g for _, _, g in points]
    return probs, labels, graphs


def _named(fns) -> list[tuple[str, Callable]]:
    items = list(fns.items()) if isinstance(fns, dict) else list(fns)
    names = [n for n, _ in items]
    if len(set(names)) != len(names):
        raise DomainError("candidate names must be unique")
    return items


@dataclass
class ViewPairResult:
    views: tuple[str, str]
    i_vi_vj: float
    i_vi_y: float
    i_vj_y: float
    h_vi: float
    h_vj: float
    i_views_y: float
    regions: dict[str, float]
    feasible: bool


@dataclass
class Corollary1Report:
    i_g_y: float
    h_g: float
    pairs: list[ViewPairResult]
    feasible: list[tuple[str, str]]
    co_optima: list[tuple[str, str]]
    optimum: tuple[str, str] | None

    def pair(self, a: str, b: str) -> ViewPairResult:
        for p in self.pairs:
            if p.views in ((a, b), (b, a)):
                return p
        raise KeyError((a, b))


def venn_regions(table: ExactTable, vi: str, vj: str, y: str, g: str) -> dict[str, float]:
    """Regions of the two-view / label diagram.

    ``D`` is the co-information ``I(vi; vj; y)``, ``C = I(vi; vj | y)``,
    ``A = I(vi; y | vj)``, ``B = I(vj; y | vi)`` and ``E = I(G; y | vi, vj)``.
    Each is computed from joint entropies, not from the identities that tie
    them to the pairwise MI terms.
    """
    c = table.mi(vi, vj, (y,))
    a = table.mi(vi, y, (vj,))
    b = table.mi(vj, y, (vi,))
    d = table.mi(vi, vj) - c
    e = table.entropy(y, vi, vj) + table.entropy(g, vi, vj) - table.entropy(g, y, vi, vj) - table.entropy(vi, vj)
    return {"A": a, "B": b, "C": c, "D": d, "E": e}


def verify_corollary1(process: SyntheticProcess, view_fns) -> Corollary1Report:
    """Exact check of the optimal-view condition over every unordered pair of view maps.

    Feasible pairs keep all label information in both views. Among them the
    pairs with the least shared information ``I(vi; vj)`` are co-optimal;
    ``optimum`` breaks ties by the smaller ``H(vi) + H(vj)`` (the views that
    keep the least about the input), then by name.
    """
    probs, labels, graphs = _enumerate(process)
    named = _named(view_fns)
    table = ExactTable(probs)
    table.add("y", labels)
    table.add("G", graphs)
    for name, fn in named:
        table.add(f"v:{name}", [fn(g) for g in graphs])
    i_g_y = table.mi("G", "y")
    results = []
    for i in range(len(named)):
        for j in range(i, len(named)):
            a, b = f"v:{named[i][0]}", f"v:{named[j][0]}"
            i_ay, i_by = table.mi(a, "y"), table.mi(b, "y")
            feasible = abs(i_ay - i_g_y) <= EXACT_TOL and abs(i_by - i_g_y) <= EXACT_TOL
            results.append(ViewPairResult(
                (named[i][0], named[j][0]), table.mi(a, b), i_ay, i_by, table.entropy(a), table.entropy(b),
                table.entropy("y") + table.entropy(a, b) - table.entropy("y", a, b),
                venn_regions(table, a, b, "y", "G"), feasible,
            ))
    feas = [r for r in results if r.feasible]
    co, optimum = [], None
    if feas:
        best = min(r.i_vi_vj for r in feas)
        tied = [r for r in feas if r.i_vi_vj - best <= EXACT_TOL]
        co = [r.views for r in tied]
        optimum = min(tied, key=lambda r: (round(r.h_vi + r.h_vj, 9), r.views)).views
    return Corollary1Report(i_g_y, table.entropy("G"), results, [r.views for r in feas], co, optimum)


@dataclass
class EncoderResult:
    name: str
    i_f_vj: float
    i_f_vi: float
    feasible: bool


@dataclass
class Corollary2Report:
    i_vi_vj: float
    encoders: list[EncoderResult]
    feasible: list[str]
    co_optima: list[str]
    optimum: str | None

    def encoder(self, name: str) -> EncoderResult:
        return next(e for e in self.encoders if e.name == name)


def verify_corollary2(process: SyntheticProcess, view_i: Callable, view_j: Callable, encoder_fns) -> Corollary2Report:
    """Exact check of the optimal-encoder condition on a fixed optimal view pair.

    Feasible encoders keep everything ``vi`` shares with ``vj``; the optimum
    keeps the least information about ``vi`` (ties by name).
    """
    probs, _, graphs = _enumerate(process)
    named = _named(encoder_fns)
    table = ExactTable(probs)
    vis = [view_i(g) for g in graphs]
    table.add("vi", vis)
    table.add("vj", [view_j(g) for g in graphs])
    i_vv = table.mi("vi", "vj")
    results = []
    for name, fn in named:
        table.add(f"f:{name}", [fn(v) for v in vis])
        i_f_vj = table.mi(f"f:{name}", "vj")
        results.append(EncoderResult(name, i_f_vj, table.mi(f"f:{name}", "vi"), abs(i_f_vj - i_vv) <= EXACT_TOL))
    feas = [r for r in results if r.feasible]
    co, optimum = [], None
    if feas:
        best = min(r.i_f_vi for r in feas)
        co = sorted(r.name for r in feas if r.i_f_vi - best <= EXACT_TOL)
        optimum = co[0]
    return Corollary2Report(i_vv, results, [r.name for r in feas], co, optimum)


@dataclass
class Corollary3Report:
    values: dict[str, float]
    ranking: list[str]
    co_optima: list[str]

    @property
    def optimum(self) -> str:
        return self.ranking[0]


def verify_corollary3(process: SyntheticProcess, rep_i: Callable, rep_j: Callable, aggregation_fns) -> Corollary3Report:
    """Exact ``I(c(zi); c(zj))`` for every aggregation; larger is better.

    ``aggregation_fns`` maps a name to one function applied to both sides or
    to a ``(c_i, c_j)`` pair. All aggregations within tolerance of the best
    are reported as co-optima.
    """
    probs, _, graphs = _enumerate(process)
    named = _named(aggregation_fns)
    table = ExactTable(probs)
    zi = [rep_i(g) for g in graphs]
    zj = [rep_j(g) for g in graphs]
    values = {}
    for name, fn in named:
        ci, cj = fn if isinstance(fn, tuple) else (fn, fn)
        table.add(f"ci:{name}", [ci(z) for z in zi])
        table.add(f"cj:{name}", [cj(z) for z in zj])
        values[name] = table.mi(f"ci:{name}", f"cj:{name}")
    ranking = sorted(values, key=lambda n: (-round(values[n], 9), n))
    best = values[ranking[0]]
    co = [n for n in ranking if best - values[n] <= EXACT_TOL]
    return Corollary3Report(values, ranking, co)
