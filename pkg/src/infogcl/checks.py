"""Finite-difference gradient checks for every tape op and two full training losses."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tensor, gradcheck
from .contrast import ModeSpec, ScoreFn, apply_mode, contrastive_loss, negfree_loss
from .encoder import EncoderSpec, encode_graphs, parameter_shapes
from .graph import Graph
from .rng import SplitMix64

STEP = 1e-5
TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    checked: int
    excluded: int
    seconds: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < TOL and self.checked > 0


def _reduce(out: Tensor, rng: SplitMix64) -> Tensor:
    # weighted sum so every output element reaches the gradient
    weights = Tensor(rng.uniform(0.5, 1.5, out.shape))
    return ad.sum_all(ad.mul(out, weights))


def _op_cases(rng: SplitMix64) -> dict[str, tuple[Callable[..., Tensor], list[Tensor]]]:
    def r(*shape):
        return Tensor(rng.uniform(-1.0, 1.0, shape))

    def away_from_zero(*shape):
        v = rng.uniform(0.2, 1.0, shape) * np.where(rng.uniform(-1, 1, shape) < 0, -1.0, 1.0)
        return Tensor(v)

    sparse = sp.csr_array(np.array([[0.0, 1.0, 0.5], [1.0, 0.0, 0.0], [0.5, 0.0, 2.0], [0.0, 0.3, 0.0]]))
    idx = np.array([2, 0, 2, 1])
    cols = np.array([1, 0, 2])
    return {
        "matmul": (lambda a, b: ad.matmul(a, b), [r(3, 4), r(4, 2)]),
        "spmm": (lambda a: ad.spmm(sparse, a), [r(3, 2)]),
        "add": (lambda a, b: ad.add(a, b), [r(3, 4), r(1, 4)]),
        "mul": (lambda a, b: ad.mul(a, b), [r(3, 4), r(3, 1)]),
        "scalar_mul": (lambda a: ad.scalar_mul(a, -2.5), [r(2, 3)]),
        "relu": (lambda a: ad.relu(a), [away_from_zero(3, 4)]),
        "sigmoid": (lambda a: ad.sigmoid(a), [r(3, 3)]),
        "transpose": (lambda a: ad.transpose(a), [r(2, 5)]),
        "row_l2_normalize": (lambda a: ad.row_l2_normalize(a), [r(4, 3)]),
        "log_softmax_rows": (lambda a: ad.log_softmax_rows(a), [r(3, 4)]),
        "mean_rows": (lambda a: ad.mean_rows(a), [r(4, 3)]),
        "sum_rows": (lambda a: ad.sum_rows(a), [r(4, 3)]),
        "sum_all": (lambda a: ad.sum_all(a), [r(3, 2)]),
        "mean_all": (lambda a: ad.mean_all(a), [r(3, 2)]),
        "concat_rows": (lambda a, b: ad.concat_rows([a, b]), [r(2, 3), r(3, 3)]),
        "gather_rows": (lambda a: ad.gather_rows(a, idx), [r(3, 2)]),
        "pick": (lambda a: ad.pick(a, cols), [r(3, 4)]),
        "row_dot": (lambda a, b: ad.row_dot(a, b), [r(3, 4), r(3, 4)]),
    }


def _fixture_graphs() -> list[Graph]:
    rng = SplitMix64(11)
    g1 = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 2)], rng.uniform(-1, 1, (4, 2)))
    g2 = Graph.from_edges(3, [(0, 1), (1, 2)], rng.uniform(-1, 1, (3, 2)))
    g3 = Graph.from_edges(5, [(0, 1), (1, 2), (3, 4), (0, 4)], rng.uniform(-1, 1, (5, 2)))
    return [g1, g2, g3]


def _composed_cases(rng: SplitMix64) -> dict[str, tuple[Callable[..., Tensor], list[Tensor]]]:
    graphs = _fixture_graphs()
    views_j = [Graph.from_edges(g.node_count, g.edge_list()[:-1], g.attributes * 0.5) for g in graphs]

    def program(spec: EncoderSpec, names: list[str], loss: str):
        def fn(*tensors):
            params = dict(zip(names, tensors))
            reps_i = encode_graphs(spec, params, graphs)
            reps_j = encode_graphs(spec, params, views_j)
            batches = apply_mode(ModeSpec("global_global"), reps_i, reps_j)
            if loss == "negfree":
                return negfree_loss(batches[0][1])
            return contrastive_loss(batches, ScoreFn(temperature=0.5))
        return fn

    cases = {}
    for label, spec, loss in (("gcn2+infonce", EncoderSpec("gcn", 2, 3, projection_layers=2), "infonce"),
                              ("gin2+negfree", EncoderSpec("gin", 2, 3, projection_layers=2), "negfree")):
        shapes = parameter_shapes(spec, 2)
        names = list(shapes)
        tensors = [Tensor(rng.uniform(-1.0, 1.0, s)) for s in shapes.values()]
        cases[label] = (program(spec, names, loss), tensors)
    return cases


def run_gradcheck_suite(seed: int = 0, include_composed: bool = True) -> list[CheckResult]:
    """Gradcheck every op (and optionally the two composed programs) at step 1e-5."""
    rng = SplitMix64(seed)
    cases = _op_cases(rng)
    if include_composed:
        cases.update(_composed_cases(rng))
    out = []
    for name, (fn, inputs) in cases.items():
        start = time.perf_counter()
        composed = name in ("gcn2+infonce", "gin2+negfree")
        wrapped = fn if composed else (lambda *xs, fn=fn: _reduce(fn(*xs), SplitMix64(seed + 1)))
        report = gradcheck(wrapped, inputs, step=STEP, tol=TOL)
        out.append(CheckResult(name, report.worst, sum(report.checked), sum(report.excluded),
                               time.perf_counter() - start))
    return out


def format_results(results: list[CheckResult]) -> str:
    lines = [f"{'check':<20} {'max rel err':>12} {'checked':>8} {'kinks':>6}  status"]
    for r in results:
        lines.append(f"{r.name:<20} {r.max_rel_error:>12.3e} {r.checked:>8d} {r.excluded:>6d}  "
                     f"{'ok' if r.passed else 'FAIL'}")
    return "\n".join(lines)
