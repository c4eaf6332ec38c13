"""Dense reverse-mode automatic differentiation over rank <= 2 float64 arrays.

Operations executed while a :class:`Tape` is active are appended to it, each
with a vector-Jacobian product closure. :func:`backward` walks the tape once
in reverse and returns the gradient of every leaf that requires one. Outside
a tape the same functions simply compute values.

Example::

    w = Tensor(np.ones((3, 1)), requires_grad=True)
    with Tape() as tape:
        loss = sum_all(matmul(x, w))
    grads = backward(tape, loss)
    grads[w]
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import NumericError, ShapeError

NORM_FLOOR = 1e-12

_active: list["Tape"] = []


class Tensor:
    """A float64 array of rank 0, 1 or 2, optionally tracked for gradients."""

    __slots__ = ("value", "requires_grad", "parents", "vjp", "op", "aux", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        v = np.array(value, dtype=np.float64)
        if v.ndim > 2:
            raise ShapeError(f"tensors have rank <= 2, got shape {v.shape}")
        self.value = v
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = ()
        self.vjp: Callable | None = None
        self.op = "leaf"
        self.aux = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    def item(self) -> float:
        return float(self.value.reshape(-1)[0]) if self.value.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.value.copy()

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scalar_mul(_lift(other), -1.0))

    def __rsub__(self, other):
        return add(_lift(other), scalar_mul(self, -1.0))

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scalar_mul(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, c: float):
        return scalar_mul(self, 1.0 / c)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Append-only record of tracked operations.

    Used as a context manager; tapes nest, and operations record onto the
    innermost active one. A tape is not thread-safe.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self) -> "Tape":
        _active.append(self)
        return self

    def __exit__(self, *exc):
        _active.remove(self)
        return False

    def kink_signature(self) -> tuple:
        """Activation pattern of every ReLU and norm clamp on the tape."""
        return tuple(n.aux.tobytes() for n in self.nodes if n.op in ("relu", "row_l2_normalize"))


def _record(value: np.ndarray, parents: Sequence[Tensor], vjp: Callable, op: str, aux=None) -> Tensor:
    if not np.all(np.isfinite(value)):
        raise NumericError(f"{op} produced a non-finite value")
    out = Tensor(value)
    out.op = op
    out.aux = aux
    if _active and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = tuple(parents)
        out.vjp = vjp
        _active[-1].nodes.append(out)
    return out


def _as2d(t: Tensor, op: str) -> None:
    if t.value.ndim != 2:
        raise ShapeError(f"{op} needs a rank-2 tensor, got shape {t.shape}")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    if len(shape) == 0:
        return np.asarray(g.sum())
    if len(shape) == 1:
        return g.sum(axis=0).reshape(shape) if g.ndim == 2 else g.reshape(shape)
    rows, cols = shape
    if rows == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if cols == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    sa, sb = a.shape, b.shape
    if sa == sb or len(sb) == 0 or len(sa) == 0:
        return
    if len(sa) == 2 and len(sb) == 1 and sb[0] == sa[1]:
        return
    if len(sa) == 1 and len(sb) == 2 and sa[0] == sb[1]:
        return
    if len(sa) == 2 and len(sb) == 2:
        rows_ok = sa[0] == sb[0] or 1 in (sa[0], sb[0])
        cols_ok = sa[1] == sb[1] or 1 in (sa[1], sb[1])
        if rows_ok and cols_ok:
            return
    raise ShapeError(f"{op}: shapes {sa} and {sb} do not broadcast")


# ----------------------------------------------------------------- operations


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    _as2d(a, "matmul")
    _as2d(b, "matmul")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return _record(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g), "matmul")


def spmm(matrix, x: Tensor) -> Tensor:
    """Constant (possibly sparse) matrix times a tracked tensor."""
    x = _lift(x)
    _as2d(x, "spmm")
    if matrix.shape[1] != x.shape[0]:
        raise ShapeError(f"spmm: {matrix.shape} @ {x.shape}")
    mt = matrix.T
    out = matrix @ x.value
    out = np.asarray(out.toarray() if sp.issparse(out) else out)
    return _record(out, (x,), lambda g: (np.asarray(mt @ g),), "spmm")


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast(a, b, "add")
    out = a.value + b.value
    sa, sb = a.shape, b.shape
    return _record(out, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast(a, b, "mul")
    av, bv = a.value, b.value
    return _record(av * bv, (a, b), lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)), "mul")


def scalar_mul(a: Tensor, c: float) -> Tensor:
    a = _lift(a)
    c = float(c)
    return _record(a.value * c, (a,), lambda g: (g * c,), "scalar_mul")


def relu(a: Tensor) -> Tensor:
    a = _lift(a)
    mask = a.value > 0
    return _record(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,), "relu", aux=mask)


def sigmoid(a: Tensor) -> Tensor:
    a = _lift(a)
    x = a.value
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    s[~pos] = ex / (1.0 + ex)
    return _record(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def transpose(a: Tensor) -> Tensor:
    a = _lift(a)
    _as2d(a, "transpose")
    return _record(a.value.T.copy(), (a,), lambda g: (g.T,), "transpose")


def row_l2_normalize(a: Tensor) -> Tensor:
    """Divide each row by its L2 norm, with norms clamped below at 1e-12."""
    a = _lift(a)
    _as2d(a, "row_l2_normalize")
    x = a.value
    raw = np.sqrt((x * x).sum(axis=1, keepdims=True))
    live = raw > NORM_FLOOR
    norm = np.where(live, raw, NORM_FLOOR)
    y = x / norm

    def vjp(g):
        # clamped rows are a constant scaling, live rows get the projection
        proj = (g * y).sum(axis=1, keepdims=True)
        return (np.where(live, (g - y * proj) / norm, g / norm),)

    return _record(y, (a,), vjp, "row_l2_normalize", aux=live)


def log_softmax_rows(a: Tensor) -> Tensor:
    a = _lift(a)
    _as2d(a, "log_softmax_rows")
    x = a.value
    shifted = x - x.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out = shifted - lse
    p = np.exp(out)
    return _record(out, (a,), lambda g: (g - p * g.sum(axis=1, keepdims=True),), "log_softmax_rows")


def mean_rows(a: Tensor) -> Tensor:
    """Column-wise mean over rows, as a ``1 x h`` tensor."""
    a = _lift(a)
    _as2d(a, "mean_rows")
    n = a.shape[0]
    return _record(a.value.mean(axis=0, keepdims=True), (a,), lambda g: (np.repeat(g / n, n, axis=0),), "mean_rows")


def sum_rows(a: Tensor) -> Tensor:
    a = _lift(a)
    _as2d(a, "sum_rows")
    n = a.shape[0]
    return _record(a.value.sum(axis=0, keepdims=True), (a,), lambda g: (np.repeat(g, n, axis=0),), "sum_rows")


def sum_all(a: Tensor) -> Tensor:
    a = _lift(a)
    shape = a.shape
    return _record(np.asarray(a.value.sum()), (a,), lambda g: (np.full(shape, float(g)),), "sum_all")


def mean_all(a: Tensor) -> Tensor:
    a = _lift(a)
    n = a.value.size
    return scalar_mul(sum_all(a), 1.0 / n)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    parts = [_lift(p) for p in parts]
    for p in parts:
        _as2d(p, "concat_rows")
    if len({p.shape[1] for p in parts}) != 1:
        raise ShapeError(f"concat_rows: column counts differ {[p.shape for p in parts]}")
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])

    def vjp(g):
        return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return _record(np.concatenate([p.value for p in parts], axis=0), parts, vjp, "concat_rows")


def gather_rows(a: Tensor, index) -> Tensor:
    a = _lift(a)
    _as2d(a, "gather_rows")
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 1 or (idx.size and (idx.min() < -a.shape[0] or idx.max() >= a.shape[0])):
        raise ShapeError(f"gather_rows: bad index for {a.shape[0]} rows")
    shape = a.shape

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _record(a.value[idx], (a,), vjp, "gather_rows")


def pick(a: Tensor, cols) -> Tensor:
    """Select ``a[n, cols[n]]`` for every row, as a rank-1 tensor."""
    a = _lift(a)
    _as2d(a, "pick")
    cols = np.asarray(cols, dtype=np.int64)
    if cols.shape != (a.shape[0],):
        raise ShapeError(f"pick: need one column per row, got {cols.shape} for {a.shape}")
    rows = np.arange(a.shape[0])
    shape = a.shape

    def vjp(g):
        out = np.zeros(shape)
        out[rows, cols] = g
        return (out,)

    return _record(a.value[rows, cols], (a,), vjp, "pick")


def row_dot(a: Tensor, b: Tensor) -> Tensor:
    """Row-wise inner products of two equal-shape matrices, as a rank-1 tensor."""
    a, b = _lift(a), _lift(b)
    if a.shape != b.shape:
        raise ShapeError(f"row_dot: {a.shape} vs {b.shape}")
    prod = mul(a, b)
    ones = Tensor(np.ones((a.shape[1], 1)))
    col = matmul(prod, ones)
    return _record(col.value[:, 0], (col,), lambda g: (g[:, None],), "row_dot_flatten")


OPS = (
    "matmul", "add", "scalar_mul", "relu", "sigmoid", "row_l2_normalize",
    "log_softmax_rows", "mean_rows", "sum_rows", "concat_rows", "gather_rows",
    "mul", "transpose", "sum_all", "pick", "spmm",
)


# ------------------------------------------------------------------- backward


def backward(tape: Tape, loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Gradients of a scalar ``loss`` with respect to every tracked leaf.

    The tape is read, never modified, so calling this twice gives the same
    result.
    """
    if loss.value.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {}
    leaves: dict[int, Tensor] = {}
    if not loss.requires_grad:
        return {}
    if loss.vjp is None:
        return {loss: np.ones(loss.shape)}
    if not any(n is loss for n in tape.nodes[::-1]):
        raise ValueError("loss was not recorded on this tape")
    grads[id(loss)] = np.ones(loss.shape)
    for node in reversed(tape.nodes):
        g = grads.get(id(node))
        if g is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if not parent.requires_grad or pg is None:
                continue
            pid = id(parent)
            pg = np.asarray(pg, dtype=np.float64).reshape(parent.shape)
            grads[pid] = grads[pid] + pg if pid in grads else pg
            if parent.vjp is None:
                leaves[pid] = parent
    return {t: grads[k] for k, t in leaves.items()}


# ------------------------------------------------------------------ gradcheck


@dataclass
class GradcheckReport:
    max_rel_error: list[float]
    excluded: list[int]
    checked: list[int]
    tol: float
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e < self.tol for e in self.max_rel_error)

    @property
    def worst(self) -> float:
        return max(self.max_rel_error, default=0.0)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def gradcheck(fn: Callable[..., Tensor], inputs: Sequence[Tensor], step: float = 1e-5,
              tol: float = 1e-4) -> GradcheckReport:
    """Compare analytic gradients with central differences, element by element.

    An element is excluded when the ``+step`` or ``-step`` evaluation changes
    the activation pattern of any ReLU or norm clamp on the tape, since the
    function is not differentiable across that kink.
    """
    if step <= 0 or tol <= 0:
        raise ValueError("step and tol must be positive")
    for x in inputs:
        x.requires_grad = True
    with Tape() as tape:
        loss = fn(*inputs)
    base_sig = tape.kink_signature()
    grads = backward(tape, loss)

    def evaluate() -> tuple[float, tuple]:
        with Tape() as t:
            val = fn(*inputs).item()
        return val, t.kink_signature()

    errors, excluded, checked, notes = [], [], [], []
    for k, x in enumerate(inputs):
        analytic = grads.get(x, np.zeros(x.shape))
        flat = x.value.reshape(-1)
        worst, skipped, used = 0.0, 0, 0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp, sp_ = evaluate()
            flat[i] = orig - step
            fm, sm = evaluate()
            flat[i] = orig
            if sp_ != base_sig or sm != base_sig:
                skipped += 1
                continue
            num = (fp - fm) / (2 * step)
            err = float(relative_error(np.array(analytic.reshape(-1)[i]), np.array(num)))
            worst = max(worst, err)
            used += 1
        if skipped:
            notes.append(f"input {k}: {skipped} element(s) at a ReLU/clamp kink excluded")
        errors.append(worst)
        excluded.append(skipped)
        checked.append(used)
    return GradcheckReport(errors, excluded, checked, tol, notes)

