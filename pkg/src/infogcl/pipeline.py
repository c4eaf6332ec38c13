"""Contrastive training, linear evaluation, the negative-samples ablation and run I/O.

Seed discipline: a run's seed fans out through :func:`~infogcl.rng.derive_seed`
into independent streams for parameter init (key 1), the per-epoch shuffle
(key 2, epoch) and the view pair of each graph (key 3, epoch, graph index).
Changing the loss therefore changes nothing about which views are drawn.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from . import autodiff as ad
from .augment import AugmentationSpec, View, apply_augmentation, make_view_pair
from .autodiff import Tensor
from .contrast import ModeSpec, ScoreFn, apply_mode, batch_alignment, contrastive_loss
from .encoder import (EncoderSpec, Params, encode_graphs, evaluation_embeddings, init_params,
                      node_evaluation_embeddings)
from .errors import ConfigError, DivergenceError, NumericError, StratificationError
from .graph import GraphDataset, NodeTaskDataset
from .optim import AdamState, adam_step, fit_probe, probe_accuracy, stratified_folds
from .rng import STREAM_CONSTANT, SplitMix64, derive_seed

log = logging.getLogger(__name__)

IMPROVE_TOL = 1e-4
PROBE_NOTE = "multinomial logistic probe (L2 1e-3, L-BFGS to gtol 1e-6) in place of a linear SVM"

KEY_INIT, KEY_SHUFFLE, KEY_VIEWS = 1, 2, 3


@dataclass(frozen=True)
class TrainConfig:
    aug_i: AugmentationSpec = AugmentationSpec("node_drop", 0.2)
    aug_j: AugmentationSpec = AugmentationSpec("subgraph", 0.8)
    encoder: EncoderSpec = EncoderSpec()
    mode: ModeSpec = ModeSpec("local_global")
    score: str = "cosine_with_temperature"
    temperature: float = 0.5
    loss: str = "infonce"
    stop_gradient: bool = False
    epochs: int = 20
    batch_size: int = 128
    learning_rate: float = 0.001
    adam_betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.0
    patience: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.loss not in ("infonce", "negfree"):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if self.batch_size < 1 or (self.loss == "infonce" and self.batch_size < 2):
            raise ConfigError("batch_size must be >= 2 for infonce (>= 1 otherwise)")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not all(0.0 < b < 1.0 for b in self.adam_betas) or len(self.adam_betas) != 2:
            raise ConfigError("adam_betas must be two values in (0, 1)")
        if self.weight_decay < 0 or self.patience < 0:
            raise ConfigError("weight_decay and patience must be non-negative")
        if self.score not in ("cosine_with_temperature", "bilinear"):
            raise ConfigError(f"unknown score {self.score!r}")
        if self.score == "cosine_with_temperature" and not self.temperature > 0:
            raise ConfigError("temperature must be positive")

    @classmethod
    def default_for(cls, dataset) -> "TrainConfig":
        if isinstance(dataset, NodeTaskDataset):
            return cls(
                aug_i=AugmentationSpec("edge_perturb", 0.2), aug_j=AugmentationSpec("attr_mask", 0.2),
                encoder=EncoderSpec("gcn", layer_count=1, hidden_dim=128, projection_layers=1),
                mode=ModeSpec("local_local"), epochs=50, batch_size=256, learning_rate=0.001,
            )
        return cls()

    def to_dict(self) -> dict:
        return {
            "augmentation": {"view_i": self.aug_i.to_dict(), "view_j": self.aug_j.to_dict()},
            "encoder": self.encoder.to_dict(),
            "mode": self.mode.to_dict(),
            "loss": {"kind": self.loss, "score": self.score, "temperature": self.temperature,
                     "stop_gradient": self.stop_gradient},
            "optimizer": {"epochs": self.epochs, "batch_size": self.batch_size, "learning_rate": self.learning_rate,
                          "adam_betas": list(self.adam_betas), "weight_decay": self.weight_decay,
                          "patience": self.patience},
            "seed": self.seed,
        }


@dataclass
class EvalResult:
    fold_accuracies: list[float]
    mean: float
    std: float
    protocol: str
    runs: int
    note: str = PROBE_NOTE

    @classmethod
    def from_accuracies(cls, accs, protocol: str, runs: int) -> "EvalResult":
        a = np.asarray(accs, dtype=np.float64)
        return cls([float(x) for x in a], float(a.mean()), float(a.std()), protocol, runs)

    def to_dict(self) -> dict:
        return {"protocol": self.protocol, "runs": self.runs, "mean": self.mean, "std": self.std,
                "fold_accuracies": self.fold_accuracies, "note": self.note}


# ------------------------------------------------------------------ training


def _score_fn(config: TrainConfig, params: Params) -> ScoreFn:
    if config.score == "bilinear":
        return ScoreFn("bilinear", bilinear_matrix=params["score.W"])
    return ScoreFn("cosine_with_temperature", config.temperature)


def initial_params(config: TrainConfig, in_dim: int) -> Params:
    params = init_params(config.encoder, in_dim, derive_seed(config.seed, KEY_INIT))
    if config.score == "bilinear":
        h = config.encoder.hidden_dim
        params["score.W"] = Tensor(np.eye(h), requires_grad=True, name="score.W")
    return params


def _minibatches(order: np.ndarray, size: int, min_last: int) -> list[np.ndarray]:
    chunks = [order[i:i + size] for i in range(0, len(order), size)]
    if len(chunks) > 1 and len(chunks[-1]) < min_last:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


@dataclass
class ViewBatch:
    index: int
    graph_ids: np.ndarray
    views_i: list[View]
    views_j: list[View]


def iter_view_batches(config: TrainConfig, dataset: GraphDataset, epoch: int) -> Iterator[ViewBatch]:
    """Shuffled minibatches of view pairs for one epoch of a graph task.

    Depends only on the seed, the augmentations and the batch size, never on
    the loss or the parameters.
    """
    order = SplitMix64(derive_seed(config.seed, KEY_SHUFFLE, epoch)).permutation(len(dataset.graphs))
    for b, ids in enumerate(_minibatches(order, config.batch_size, 2)):
        pairs = [make_view_pair(dataset.graphs[g], config.aug_i, config.aug_j,
                                derive_seed(config.seed, KEY_VIEWS, epoch, int(g))) for g in ids]
        yield ViewBatch(b, ids, [p[0] for p in pairs], [p[1] for p in pairs])


def _graph_step_loss(config: TrainConfig, params: Params, batch: ViewBatch) -> Tensor:
    reps_i = encode_graphs(config.encoder, params, [v.graph for v in batch.views_i])
    reps_j = encode_graphs(config.encoder, params, [v.graph for v in batch.views_j])
    alignment = batch_alignment(batch.views_i, batch.views_j) if config.mode.mode == "local_local" else None
    weighted = apply_mode(config.mode, reps_i, reps_j, alignment)
    return contrastive_loss(weighted, _score_fn(config, params), config.loss, config.stop_gradient)


def node_view_pair(config: TrainConfig, dataset: NodeTaskDataset, epoch: int) -> tuple[View, View]:
    return make_view_pair(dataset.graph, config.aug_i, config.aug_j, derive_seed(config.seed, KEY_VIEWS, epoch, 0))


def _node_batches(config: TrainConfig, views: tuple[View, View], epoch: int) -> list[tuple[np.ndarray, np.ndarray]]:
    rows_i, rows_j = batch_alignment([views[0]], [views[1]])
    order = SplitMix64(derive_seed(config.seed, KEY_SHUFFLE, epoch)).permutation(len(rows_i))
    return [(rows_i[c], rows_j[c]) for c in _minibatches(order, config.batch_size, 2)]


def _node_step_loss(config: TrainConfig, params: Params, views: tuple[View, View], rows) -> Tensor:
    reps_i = encode_graphs(config.encoder, params, [views[0].graph])
    reps_j = encode_graphs(config.encoder, params, [views[1].graph])
    weighted = apply_mode(config.mode, reps_i, reps_j, rows)
    return contrastive_loss(weighted, _score_fn(config, params), config.loss, config.stop_gradient)


def _steps(config: TrainConfig, dataset, epoch: int) -> Iterator[tuple[int, Callable[[Params], Tensor]]]:
    if isinstance(dataset, NodeTaskDataset):
        views = node_view_pair(config, dataset, epoch)
        for b, rows in enumerate(_node_batches(config, views, epoch)):
            yield b, lambda p, rows=rows: _node_step_loss(config, p, views, rows)
    else:
        for batch in iter_view_batches(config, dataset, epoch):
            yield batch.index, lambda p, batch=batch: _graph_step_loss(config, p, batch)


def check_task(config: TrainConfig, dataset) -> None:
    if isinstance(dataset, NodeTaskDataset):
        if config.mode.mode != "local_local":
            raise ConfigError("node tasks contrast one graph at a time and support only the local_local mode")
        if config.aug_i.kind in ("node_drop", "subgraph") and config.aug_j.kind in ("node_drop", "subgraph"):
            log.info("node task with two node-removing views; only surviving nodes are contrasted")
    elif config.mode.mode == "multi_scale":
        config.mode.layer_for(config.encoder.layer_count)


@dataclass
class TrainResult:
    params: Params
    history: list[float]
    best_epoch: int | None = None
    stopped_early: bool = False
    batch_losses: list[list[float]] = field(default_factory=list)


def train_run(config: TrainConfig, dataset, on_epoch: Callable[[int, float], None] | None = None) -> TrainResult:
    """Full training record; :func:`train` returns its ``(params, history)``."""
    check_task(config, dataset)
    in_dim = dataset.graph.attr_dim if isinstance(dataset, NodeTaskDataset) else dataset.attr_dim
    params = initial_params(config, in_dim)
    state = AdamState()
    history: list[float] = []
    batch_losses: list[list[float]] = []
    best, best_epoch, best_params, wait = math.inf, None, None, 0
    stopped = False
    for epoch in range(config.epochs):
        losses = []
        for b, step in _steps(config, dataset, epoch):
            try:
                with ad.Tape() as tape:
                    loss = step(params)
            except NumericError as exc:
                raise DivergenceError(epoch, b, float("nan")) from exc
            value = loss.item()
            if not math.isfinite(value):
                raise DivergenceError(epoch, b, value)
            grads = ad.backward(tape, loss)
            named = {name: grads[t] for name, t in params.items() if t in grads}
            adam_step(params, named, state, config.learning_rate, config.adam_betas, config.weight_decay)
            bad = [name for name, t in params.items() if not np.all(np.isfinite(t.value))]
            if bad:
                raise DivergenceError(epoch, b, float("nan"))
            losses.append(value)
        mean = float(np.mean(losses))
        history.append(mean)
        batch_losses.append(losses)
        if on_epoch is not None:
            on_epoch(epoch, mean)
        if config.patience > 0:
            if mean < best - IMPROVE_TOL:
                best, best_epoch, wait = mean, epoch, 0
                best_params = {k: t.value.copy() for k, t in params.items()}
            else:
                wait += 1
                if wait >= config.patience:
                    stopped = True
                    break
    if best_params is not None:
        for k, v in best_params.items():
            params[k].value = v
    return TrainResult(params, history, best_epoch, stopped, batch_losses)


def train(config: TrainConfig, dataset) -> tuple[Params, list[float]]:
    """Contrastively train an encoder; returns the parameters and per-epoch mean losses.

    With ``patience > 0`` training stops once the epoch loss has failed to
    improve by at least 1e-4 for that many epochs, and the parameters of the
    best epoch are returned.
    """
    result = train_run(config, dataset)
    return result.params, result.history


# ---------------------------------------------------------------- evaluation


def linear_eval(embeddings, labels, protocol: str = "kfold10", runs: int = 1, seed: int = 0,
                train_ids=None, test_ids=None, folds: int = 10) -> EvalResult:
    """Accuracy of a logistic probe on frozen embeddings.

    ``kfold10`` runs ``folds``-fold stratified cross-validation ``runs`` times
    with fold seeds derived from ``seed``; ``fixed_split`` trains on
    ``train_ids`` and tests on ``test_ids`` (the probe is deterministic, so
    repeated runs repeat the same accuracy).
    """
    x = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    c = int(y[y >= 0].max() + 1) if (y >= 0).any() else 0
    if len(np.unique(y[y >= 0])) < 2:
        raise StratificationError("linear evaluation needs at least two classes")
    accs = []
    if protocol == "kfold10":
        for run in range(runs):
            for test in stratified_folds(y, folds, derive_seed(seed, run)):
                train = np.setdiff1d(np.arange(len(y)), test)
                if len(np.unique(y[train])) < len(np.unique(y)):
                    raise StratificationError("a training fold lacks a class")
                accs.append(probe_accuracy(fit_probe(x[train], y[train], c), x[test], y[test]))
    elif protocol == "fixed_split":
        if train_ids is None or test_ids is None:
            raise ConfigError("fixed_split needs train_ids and test_ids")
        tr, te = np.asarray(train_ids), np.asarray(test_ids)
        probe = fit_probe(x[tr], y[tr], c)
        acc = probe_accuracy(probe, x[te], y[te])
        accs = [acc] * runs
    else:
        raise ConfigError(f"unknown protocol {protocol!r}")
    return EvalResult.from_accuracies(accs, protocol, runs)


def embed(config: TrainConfig, params: Params, dataset) -> np.ndarray:
    if isinstance(dataset, NodeTaskDataset):
        return node_evaluation_embeddings(config.encoder, params, dataset.graph)
    return evaluation_embeddings(config.encoder, params, dataset.graphs)


def evaluate_params(config: TrainConfig, params: Params, dataset, seed: int, folds: int = 10) -> EvalResult:
    x = embed(config, params, dataset)
    if isinstance(dataset, NodeTaskDataset):
        return linear_eval(x, dataset.labels, "fixed_split", 1, seed, dataset.train_ids, dataset.test_ids)
    return linear_eval(x, dataset.labels, "kfold10", 1, seed, folds=folds)


def train_and_evaluate(config: TrainConfig, dataset, runs: int = 1, folds: int = 10,
                       on_epoch: Callable[[int, int, float], None] | None = None) -> EvalResult:
    """Train ``runs`` encoders (seeds derived from ``config.seed``) and pool their probe accuracies."""
    accs = []
    protocol = "fixed_split" if isinstance(dataset, NodeTaskDataset) else "kfold10"
    for run in range(runs):
        cfg = replace(config, seed=derive_seed(config.seed, run)) if runs > 1 else config
        cb = (lambda e, v, run=run: on_epoch(run, e, v)) if on_epoch else None
        result = train_run(cfg, dataset, cb)
        accs.extend(evaluate_params(cfg, result.params, dataset, derive_seed(config.seed, 0xE7A1, run), folds).fold_accuracies)
    return EvalResult.from_accuracies(accs, protocol, runs)


@dataclass
class AblationResult:
    with_negatives: EvalResult
    without_negatives: EvalResult

    @property
    def difference(self) -> float:
        return self.with_negatives.mean - self.without_negatives.mean

    def to_dict(self) -> dict:
        return {"with_negatives": self.with_negatives.to_dict(), "without_negatives": self.without_negatives.to_dict(),
                "difference": self.difference}


def ablate_negatives(config: TrainConfig, dataset, runs: int = 1, folds: int = 10) -> AblationResult:
    """Train with InfoNCE and with the negative-free loss, all else (seeds, views, probe folds) equal."""
    if config.batch_size < 2:
        raise ConfigError("the ablation needs batch_size >= 2")
    with_neg = train_and_evaluate(replace(config, loss="infonce"), dataset, runs, folds)
    without = train_and_evaluate(replace(config, loss="negfree"), dataset, runs, folds)
    return AblationResult(with_neg, without)


# -------------------------------------------------------------------- config


SECTIONS = {
    "data": {"path", "protocol", "folds"},
    "augmentation": {"view_i", "view_j"},
    "encoder": {"backbone", "layer_count", "hidden_dim", "gin_epsilon", "projection_layers", "readout"},
    "mode": {"mode", "multi_scale_layer", "hybrid_weight"},
    "loss": {"kind", "score", "temperature", "stop_gradient"},
    "optimizer": {"epochs", "batch_size", "learning_rate", "adam_betas", "weight_decay", "patience"},
    "eval": {"protocol", "runs", "folds", "seed"},
}


@dataclass(frozen=True)
class EvalConfig:
    protocol: str | None = None
    runs: int | None = None
    folds: int = 10
    seed: int | None = None


def default_runs(dataset) -> int:
    """Training runs pooled by ``eval`` when the config does not say: 50 for node tasks, 5 otherwise."""
    return 50 if isinstance(dataset, NodeTaskDataset) else 5


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig
    eval: EvalConfig
    data_path: str | None = None


def _check_keys(where: str, got: dict, allowed: set[str]) -> None:
    if not isinstance(got, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = sorted(set(got) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _aug(where: str, d: dict) -> AugmentationSpec:
    _check_keys(where, d, {"kind", "ratio"})
    try:
        return AugmentationSpec(d.get("kind", "identity"), float(d.get("ratio", 0.0)))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(doc: dict, base: TrainConfig | None = None) -> RunConfig:
    """Build a run configuration from a JSON object; unknown keys are errors."""
    _check_keys("config", doc, set(SECTIONS) | {"seed"})
    for name, allowed in SECTIONS.items():
        if name in doc:
            _check_keys(name, doc[name], allowed)
    cfg = base or TrainConfig()
    updates: dict = {}
    try:
        if "augmentation" in doc:
            a = doc["augmentation"]
            if "view_i" in a:
                updates["aug_i"] = _aug("augmentation.view_i", a["view_i"])
            if "view_j" in a:
                updates["aug_j"] = _aug("augmentation.view_j", a["view_j"])
        if "encoder" in doc:
            updates["encoder"] = replace(cfg.encoder, **doc["encoder"])
        if "mode" in doc:
            updates["mode"] = replace(cfg.mode, **doc["mode"])
        loss = doc.get("loss", {})
        for src, dst in (("kind", "loss"), ("score", "score"), ("temperature", "temperature"),
                         ("stop_gradient", "stop_gradient")):
            if src in loss:
                updates[dst] = loss[src]
        opt = dict(doc.get("optimizer", {}))
        if "adam_betas" in opt:
            opt["adam_betas"] = tuple(opt["adam_betas"])
        updates.update(opt)
        if "seed" in doc:
            updates["seed"] = int(doc["seed"])
        train_cfg = replace(cfg, **updates)
        ev = doc.get("eval", {})
        runs = int(ev["runs"]) if "runs" in ev else None
        eval_cfg = EvalConfig(ev.get("protocol"), runs, int(ev.get("folds", 10)), ev.get("seed"))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    data = doc.get("data", {})
    return RunConfig(train_cfg, eval_cfg, data.get("path"))


def load_config(path: str | Path, base: TrainConfig | None = None) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(doc, base)


# ------------------------------------------------------------------- outputs


def write_metrics(path: str | Path, rows: list[tuple[int, str, str, float]]) -> Path:
    """``epoch,split,metric,value`` with six-decimal floats and LF line endings."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "split", "metric", "value"])
        for epoch, split, metric, value in rows:
            w.writerow([epoch, split, metric, f"{value:.6f}"])
    return path


def write_results(path: str | Path, dataset_name: str, result: EvalResult) -> Path:
    doc = {"dataset": dataset_name, **result.to_dict()}
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def preview_augmentation(graph, spec: AugmentationSpec, seed: int) -> dict:
    view = apply_augmentation(graph, spec, seed)
    g = view.graph
    return {
        "augmentation": spec.desc, "seed": seed,
        "input": {"nodes": graph.node_count, "edges": graph.edge_count},
        "view": {"nodes": g.node_count, "edges": g.edge_count,
                 "origin_nodes": view.origin_nodes.tolist(), "edge_list": [list(e) for e in g.edge_list()],
                 "zeroed_rows": int(np.sum(~g.attributes.any(axis=1)))},
        "second_stream_seed": seed ^ STREAM_CONSTANT,
    }
