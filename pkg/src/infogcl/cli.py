"""Command-line entry point: ``infogcl <subcommand> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 training divergence, 4 a check that ran but failed (gradcheck).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .augment import AugmentationSpec
from .checks import format_results, run_gradcheck_suite
from .contrast import MODES, ModeSpec
from .encoder import EncoderSpec, load_checkpoint, save_checkpoint
from .errors import ConfigError, DivergenceError, DomainError, FormatError, IngestError
from .graph import GraphDataset, NodeTaskDataset, is_tu_directory, load_node_task_dir, parse_tu_dataset
from .infomeasure import (DiscreteJoint, discrete_mi, mi_lower_bound_from_nce, select_augmentations,
                          select_encoder, select_mode)
from .pipeline import (EvalConfig, TrainConfig, ablate_negatives, default_runs, evaluate_params, load_config,
                       preview_augmentation, train_and_evaluate, train_run, write_metrics, write_results)
from .synthetic import (dense_graph_dataset, generate_synthetic_graphs, marker_distance_dataset,
                        sparse_node_task, triangle_count_dataset, two_factor_process)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED, EXIT_CHECK_FAILED = 0, 1, 2, 3, 4

SYNTHETIC = {
    "two-factor": lambda seed: generate_synthetic_graphs(two_factor_process(nuisance_bits=6), 400, seed),
    "marker-distance": lambda seed: marker_distance_dataset(300, seed),
    "triangle-count": lambda seed: triangle_count_dataset(300, seed),
    "dense": lambda seed: dense_graph_dataset(300, seed),
    "sparse-node": lambda seed: sparse_node_task(seed=seed),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def load_dataset(path: str | None, seed: int = 0) -> GraphDataset | NodeTaskDataset:
    """A TU directory, a node-task directory, or ``synthetic:<name>``."""
    if not path:
        raise UsageError("--data is required")
    if path.startswith("synthetic:"):
        name = path.split(":", 1)[1]
        if name not in SYNTHETIC:
            raise UsageError(f"unknown synthetic dataset {name!r}; choose from {sorted(SYNTHETIC)}")
        return SYNTHETIC[name](seed)
    p = Path(path)
    if not p.exists():
        raise IngestError(f"{path}: no such file or directory")
    if (p / "edges.tsv").exists():
        return load_node_task_dir(p)
    if is_tu_directory(p):
        return parse_tu_dataset(p)
    raise IngestError(f"{path}: neither a TU dataset nor a node-task directory")


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS if suppress else 0, help="base seed")
    parser.add_argument("--config", default=default, help="JSON run configuration")
    parser.add_argument("--out", default=default, help="output directory")
    parser.add_argument("--data", default=default, help="dataset directory or synthetic:<name>")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="infogcl", description="Information-aware graph contrastive learning toolkit.")
    _common(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _common(p, suppress=True)
        return p

    add("ingest", "parse a dataset and print its summary")
    p = add("augment-preview", "apply one augmentation to one graph and print the result")
    p.add_argument("--kind", default="node_drop")
    p.add_argument("--ratio", type=float, default=0.2)
    p.add_argument("--index", type=int, default=0, help="graph index (graph datasets)")
    p = add("select", "rank augmentations, encoders or modes")
    p.add_argument("--stage", choices=("augmentation", "encoder", "mode"), required=True)
    p.add_argument("--budget", type=int, default=20, help="training epochs per candidate")
    p.add_argument("--bins", type=int, default=8)
    p.add_argument("--candidates", help="JSON list of candidate objects (defaults depend on the stage)")
    add("train", "train an encoder; writes checkpoint.json and metrics.csv")
    p = add("eval", "linear evaluation; writes results.json")
    p.add_argument("--checkpoint", help="evaluate this checkpoint instead of training")
    p = add("mi", "plug-in MI of a joint table or the InfoNCE bound of a loss")
    p.add_argument("--joint", help="JSON matrix of joint probabilities")
    p.add_argument("--nce-loss", type=float)
    p.add_argument("--n", type=int)
    add("gradcheck", "finite-difference check of every autodiff op")
    add("ablate-neg", "train with and without negatives and compare accuracy")
    return parser


def _config(args, dataset) -> tuple[TrainConfig, EvalConfig]:
    base = TrainConfig.default_for(dataset) if dataset is not None else TrainConfig()
    if args.config:
        run = load_config(args.config, base)
        cfg, ev = run.train, run.eval
    else:
        cfg, ev = base, EvalConfig()
    if getattr(args, "seed_given", False):
        cfg = replace(cfg, seed=args.seed)
    return cfg, ev


def _data_path(args) -> str | None:
    if args.data:
        return args.data
    if args.config:
        return json.loads(Path(args.config).read_text(encoding="utf-8")).get("data", {}).get("path")
    return None


def _out_dir(args) -> Path:
    if not args.out:
        raise UsageError("--out is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def cmd_ingest(args) -> int:
    ds = load_dataset(_data_path(args), args.seed)
    _print(ds.summary())
    return EXIT_OK


def cmd_augment_preview(args) -> int:
    ds = load_dataset(_data_path(args), args.seed)
    g = ds.graph if isinstance(ds, NodeTaskDataset) else ds.graphs[args.index]
    try:
        spec = AugmentationSpec(args.kind, args.ratio)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _print(preview_augmentation(g, spec, args.seed))
    return EXIT_OK


def _default_candidates(stage: str, cfg: TrainConfig):
    if stage == "augmentation":
        return [AugmentationSpec(), AugmentationSpec("node_drop", 0.2), AugmentationSpec("edge_perturb", 0.2),
                AugmentationSpec("attr_mask", 0.2), AugmentationSpec("subgraph", 0.8)]
    if stage == "encoder":
        return [replace(cfg.encoder, backbone=b, layer_count=k) for b in ("gcn", "gin") for k in (1, 2, 3)]
    return [ModeSpec(m) for m in MODES]


def _parse_candidates(stage: str, text: str):
    items = json.loads(text)
    kind = {"augmentation": AugmentationSpec, "encoder": EncoderSpec, "mode": ModeSpec}[stage]
    try:
        return [kind(**item) for item in items]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad candidate: {exc}") from exc


def cmd_select(args) -> int:
    ds = load_dataset(_data_path(args), args.seed)
    cfg, _ = _config(args, ds)
    cands = _parse_candidates(args.stage, args.candidates) if args.candidates else _default_candidates(args.stage, cfg)
    if args.stage == "augmentation":
        if isinstance(ds, NodeTaskDataset):
            raise UsageError("augmentation selection works on graph datasets")
        report = select_augmentations(ds, cands, cfg.seed, args.bins)
    elif args.stage == "encoder":
        report = select_encoder(ds, (cfg.aug_i, cfg.aug_j), cands, args.budget, cfg.seed, cfg)
    else:
        if isinstance(ds, NodeTaskDataset):
            raise UsageError("node tasks support only the local_local mode")
        report = select_mode(ds, cands, cfg.seed, cfg, args.budget)
    print(report.to_json())
    return EXIT_OK


def _dataset_name(ds) -> str:
    return ds.name


def cmd_train(args) -> int:
    ds = load_dataset(_data_path(args), args.seed)
    cfg, _ = _config(args, ds)
    out = _out_dir(args)
    result = train_run(cfg, ds)
    rows = [(e, "train", "loss", v) for e, v in enumerate(result.history)]
    write_metrics(out / "metrics.csv", rows)
    save_checkpoint(result.params, out / "checkpoint.json", {"config": cfg.to_dict(), "dataset": _dataset_name(ds)})
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _print({"epochs_run": len(result.history), "final_loss": result.history[-1] if result.history else None,
            "out": str(out)})
    return EXIT_OK


def cmd_eval(args) -> int:
    ds = load_dataset(_data_path(args), args.seed)
    cfg, ev = _config(args, ds)
    out = _out_dir(args)
    eval_seed = ev.seed if ev.seed is not None else cfg.seed
    if args.checkpoint:
        params, _ = load_checkpoint(args.checkpoint)
        result = evaluate_params(cfg, params, ds, eval_seed, ev.folds)
    else:
        rows = []
        result = train_and_evaluate(cfg, ds, ev.runs or default_runs(ds), ev.folds,
                                    on_epoch=lambda run, e, v: rows.append((e, f"train_run{run}", "loss", v)))
        write_metrics(out / "metrics.csv", rows + [(len(rows), "eval", "accuracy_mean", result.mean),
                                                   (len(rows), "eval", "accuracy_std", result.std)])
    write_results(out / "results.json", _dataset_name(ds), result)
    _print({"dataset": _dataset_name(ds), **result.to_dict()})
    return EXIT_OK


def cmd_mi(args) -> int:
    if args.joint:
        est = discrete_mi(DiscreteJoint(np.array(json.loads(args.joint), dtype=np.float64)))
    elif args.nce_loss is not None and args.n is not None:
        est = mi_lower_bound_from_nce(args.nce_loss, args.n)
    else:
        raise UsageError("mi needs --joint, or --nce-loss with --n")
    _print(est.to_dict())
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = run_gradcheck_suite(args.seed)
    print(format_results(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def cmd_ablate(args) -> int:
    ds = load_dataset(_data_path(args), args.seed)
    cfg, ev = _config(args, ds)
    result = ablate_negatives(cfg, ds, ev.runs or default_runs(ds), ev.folds)
    doc = {"dataset": _dataset_name(ds), **result.to_dict()}
    if args.out:
        out = _out_dir(args)
        (out / "ablation.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _print(doc)
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest, "augment-preview": cmd_augment_preview, "select": cmd_select, "train": cmd_train,
    "eval": cmd_eval, "mi": cmd_mi, "gradcheck": cmd_gradcheck, "ablate-neg": cmd_ablate,
}


def run_cli(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.seed_given = any(a == "--seed" or a.startswith("--seed=") for a in argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, UsageError):
            parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (IngestError, FormatError, DomainError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


def main() -> None:
    sys.exit(run_cli())
