"""Adam with decoupled weight decay, stratified folds and the logistic probe."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ShapeError, StratificationError
from .rng import SplitMix64

ADAM_EPS = 1e-8
PROBE_L2 = 1e-3
PROBE_TOL = 1e-6


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: AdamState, lr: float,
              betas: tuple[float, float] = (0.9, 0.999), weight_decay: float = 0.0) -> tuple[dict[str, Tensor], AdamState]:
    """One bias-corrected Adam update, in place; weight decay is decoupled (AdamW).

    Parameters missing from ``grads`` are treated as having zero gradient.
    """
    b1, b2 = betas
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros(p.shape)
        elif g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = b1 * state.m.get(name, 0.0) + (1 - b1) * g
        v = b2 * state.v.get(name, 0.0) + (1 - b2) * g * g
        state.m[name], state.v[name] = m, v
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p.value = p.value - lr * (m_hat / (np.sqrt(v_hat) + ADAM_EPS) + weight_decay * p.value)
    return params, state


# ---------------------------------------------------------------------- folds


def stratified_folds(labels, k: int, seed: int) -> list[np.ndarray]:
    """Test-index arrays of ``k`` stratified folds.

    Each class is shuffled with the seeded PRNG and dealt round-robin; the
    dealing position carries over from one class to the next so fold sizes
    differ by at most one.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("need at least two folds")
    rng = SplitMix64(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    pos = 0
    for c in np.unique(labels):
        members = np.nonzero(labels == c)[0]
        if len(members) < k:
            raise StratificationError(f"class {c} has {len(members)} member(s), fewer than {k} folds")
        for i in rng.permutation(len(members)):
            folds[pos % k].append(int(members[i]))
            pos += 1
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


# ---------------------------------------------------------------------- probe


@dataclass
class LogisticProbe:
    """Multinomial logistic regression on standardized features."""

    weights: np.ndarray
    bias: np.ndarray
    mean: np.ndarray
    scale: np.ndarray

    def logits(self, x: np.ndarray) -> np.ndarray:
        return ((x - self.mean) / self.scale) @ self.weights + self.bias

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)

    def log_proba(self, x: np.ndarray) -> np.ndarray:
        return ad.log_softmax_rows(Tensor(self.logits(x))).value


def fit_probe(x: np.ndarray, y, class_count: int, l2: float = PROBE_L2, tol: float = PROBE_TOL) -> LogisticProbe:
    """Minimize mean cross-entropy plus ``l2/2 * ||W||^2`` (bias unpenalized).

    Gradients come from the autodiff tape; L-BFGS runs from zero weights, so
    the fit is deterministic.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = x.shape
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale < 1e-12] = 1.0
    xs = Tensor((x - mean) / scale)
    split = d * class_count

    def objective(theta: np.ndarray):
        w = Tensor(theta[:split].reshape(d, class_count), requires_grad=True)
        b = Tensor(theta[split:].reshape(1, class_count), requires_grad=True)
        with ad.Tape() as tape:
            ce = ad.scalar_mul(ad.sum_all(ad.pick(ad.log_softmax_rows(ad.add(ad.matmul(xs, w), b)), y)), -1.0 / n)
            loss = ad.add(ce, ad.scalar_mul(ad.sum_all(ad.mul(w, w)), 0.5 * l2))
        grads = ad.backward(tape, loss)
        return loss.item(), np.concatenate([grads[w].reshape(-1), grads[b].reshape(-1)])

    theta0 = np.zeros(split + class_count)
    res = minimize(objective, theta0, jac=True, method="L-BFGS-B", options={"gtol": tol, "maxiter": 2000})
    theta = res.x
    return LogisticProbe(theta[:split].reshape(d, class_count), theta[split:], mean, scale)


def probe_cross_entropy(probe: LogisticProbe, x: np.ndarray, y) -> float:
    y = np.asarray(y, dtype=np.int64)
    return float(-probe.log_proba(x)[np.arange(len(y)), y].mean())


def probe_accuracy(probe: LogisticProbe, x: np.ndarray, y) -> float:
    return float(np.mean(probe.predict(x) == np.asarray(y)))
