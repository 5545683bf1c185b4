"""Deterministic, seeded test problems with analytic gradients and known
structure (optimum, interpolation flag), plus the minibatch sampling contract.

All randomness goes through numpy's Philox counter-based generator keyed on
(seed, counter), so constructions and batch sequences are reproducible across
platforms. Problems are immutable after construction.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional

import numpy as np

__all__ = [
    "Problem",
    "SamplingMode",
    "BatchSampler",
    "sample_batch",
    "make_least_squares",
    "make_logreg",
    "make_mlp",
    "save_least_squares",
    "load_least_squares",
]

_MAGIC = b"MOMP"
_VERSION = 1


def _rng(seed: int, counter: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, counter]))


@dataclass(frozen=True)
class Problem:
    """A differentiable stochastic objective over n_samples per-sample losses.

    ``loss``/``grad`` take the parameter vector and an index array and return
    the minibatch average. ``x_star``/``f_star`` are present when known.
    """

    name: str
    dim: int
    n_samples: int
    loss: Callable[[np.ndarray, np.ndarray], float]
    grad: Callable[[np.ndarray, np.ndarray], np.ndarray]
    x_star: Optional[np.ndarray]
    f_star: Optional[float]
    interpolating: bool
    initial_point: Callable[[], np.ndarray]

    def all_indices(self) -> np.ndarray:
        return np.arange(self.n_samples)

    def full_loss(self, x: np.ndarray) -> float:
        return self.loss(x, self.all_indices())

    def full_grad(self, x: np.ndarray) -> np.ndarray:
        return self.grad(x, self.all_indices())


class SamplingMode(Enum):
    WITH_REPLACEMENT = "with-replacement"
    EPOCH_SHUFFLE = "epoch-shuffle"


@dataclass(frozen=True)
class BatchSampler:
    n_samples: int
    batch_size: int
    seed: int
    mode: SamplingMode = SamplingMode.WITH_REPLACEMENT


def sample_batch(sampler: BatchSampler, k: int) -> np.ndarray:
    """Deterministic batch indices for 1-based iteration k."""
    n, b = sampler.n_samples, sampler.batch_size
    if sampler.mode is SamplingMode.WITH_REPLACEMENT:
        return _rng(sampler.seed, k).integers(0, n, size=b)
    steps_per_epoch = -(-n // b)
    epoch = (k - 1) // steps_per_epoch
    pos = (k - 1) % steps_per_epoch
    perm = _rng(sampler.seed, epoch).permutation(n)
    return perm[pos * b:(pos + 1) * b]


# ---------------------------------------------------------------------------
# least squares


def _build_least_squares(A: np.ndarray, b: np.ndarray, x_hat: np.ndarray,
                         name: str) -> Problem:
    n, d = A.shape

    def loss(x, idx):
        r = A[idx] @ x - b[idx]
        return 0.5 * float(np.mean(r * r))

    def grad(x, idx):
        r = A[idx] @ x - b[idx]
        return A[idx].T @ r / len(idx)

    problem = Problem(name=name, dim=d, n_samples=n, loss=loss, grad=grad,
                      x_star=x_hat, f_star=0.0, interpolating=True,
                      initial_point=lambda: np.zeros(d))
    object.__setattr__(problem, "A", A)
    object.__setattr__(problem, "b", b)
    return problem


def make_least_squares(n: int = 200, d: int = 10, seed: int = 0) -> Problem:
    """Interpolating least squares: standard-normal A and planted x_hat with
    b = A x_hat, per-sample loss (a_i^T x - b_i)^2 / 2, optimal value 0."""
    if n < d:
        raise ValueError("need n >= d")
    attempt_seed = seed
    while True:
        rng = _rng(attempt_seed)
        A = rng.standard_normal((n, d))
        x_hat = rng.standard_normal(d)
        if np.linalg.matrix_rank(A) == d:
            break
        warnings.warn(f"rank-deficient design for seed {attempt_seed}; "
                      "regenerating with next seed")
        attempt_seed += 1
    b = A @ x_hat
    return _build_least_squares(A, b, x_hat, name=f"least-squares(n={n},d={d})")


def save_least_squares(problem: Problem, path: str) -> None:
    """Flat binary dump: magic, version, sizes, then A, b, x_star as
    little-endian row-major float64."""
    A, b = problem.A, problem.b
    n, d = A.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, n, d))
        fh.write(A.astype("<f8").tobytes(order="C"))
        fh.write(b.astype("<f8").tobytes())
        fh.write(problem.x_star.astype("<f8").tobytes())


def load_least_squares(path: str) -> Problem:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        version, n, d = struct.unpack("<III", fh.read(12))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        A = np.frombuffer(fh.read(8 * n * d), dtype="<f8").reshape(n, d).copy()
        b = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
        x_hat = np.frombuffer(fh.read(8 * d), dtype="<f8").copy()
    return _build_least_squares(A, b, x_hat, name=f"least-squares(n={n},d={d})")


# ---------------------------------------------------------------------------
# logistic regression


def _logreg_full_minimizer(A: np.ndarray, y: np.ndarray,
                           max_iter: int = 200) -> np.ndarray:
    """Damped Newton on the full-batch logistic loss to gradient norm 1e-10."""
    n, d = A.shape
    x = np.zeros(d)

    def grad_at(x):
        z = A @ x
        return A.T @ (-y / (1.0 + np.exp(y * z))) / n

    for _ in range(max_iter):
        g = grad_at(x)
        if np.linalg.norm(g) <= 1e-10:
            return x
        z = A @ x
        s = 1.0 / (1.0 + np.exp(-z))
        w = s * (1.0 - s)
        H = (A * w[:, None]).T @ A / n
        step = np.linalg.solve(H + 1e-12 * np.eye(d), g)
        # backtracking on the loss
        f0 = float(np.mean(np.logaddexp(0.0, -y * z)))
        t = 1.0
        while t > 1e-12:
            x_try = x - t * step
            f_try = float(np.mean(np.logaddexp(0.0, -y * (A @ x_try))))
            if f_try <= f0:
                break
            t *= 0.5
        x = x_try
    raise RuntimeError("logistic reference solver did not converge")


def make_logreg(n: int = 200, d: int = 10, seed: int = 0,
                separable: bool = False) -> Problem:
    """Binary logistic regression on synthetic Gaussian data.

    With separable=False, 10% of the labels are flipped so no interpolating
    classifier exists and the full-batch optimum (computed once by a Newton
    solver) has f_star > 0. With separable=True the loss infimum is 0 with no
    finite minimizer.
    """
    rng = _rng(seed)
    A = rng.standard_normal((n, d))
    w_true = rng.standard_normal(d)
    y = np.where(A @ w_true >= 0.0, 1.0, -1.0)
    if not separable:
        flip = rng.random(n) < 0.1
        y = np.where(flip, -y, y)

    def loss(x, idx):
        z = A[idx] @ x
        return float(np.mean(np.logaddexp(0.0, -y[idx] * z)))

    def grad(x, idx):
        z = A[idx] @ x
        coef = -y[idx] / (1.0 + np.exp(y[idx] * z))
        return A[idx].T @ coef / len(idx)

    if separable:
        x_star, f_star = None, 0.0
        interpolating = False
    else:
        x_star = _logreg_full_minimizer(A, y)
        f_star = loss(x_star, np.arange(n))
        interpolating = False

    return Problem(name=f"logreg(n={n},d={d},separable={separable})",
                   dim=d, n_samples=n, loss=loss, grad=grad, x_star=x_star,
                   f_star=f_star, interpolating=interpolating,
                   initial_point=lambda: np.zeros(d))


# ---------------------------------------------------------------------------
# multilayer perceptron with manual backprop


def _mlp_shapes(layers: List[int]):
    return [(layers[i + 1], layers[i]) for i in range(len(layers) - 1)]


def _mlp_unpack(theta: np.ndarray, layers: List[int]):
    weights, biases = [], []
    off = 0
    for out_dim, in_dim in _mlp_shapes(layers):
        W = theta[off:off + out_dim * in_dim].reshape(out_dim, in_dim)
        off += out_dim * in_dim
        b = theta[off:off + out_dim]
        off += out_dim
        weights.append(W)
        biases.append(b)
    return weights, biases


def _mlp_pack(weights, biases) -> np.ndarray:
    parts = []
    for W, b in zip(weights, biases):
        parts.append(W.ravel())
        parts.append(b)
    return np.concatenate(parts)


def _softmax_ce(logits: np.ndarray, labels: np.ndarray):
    """Mean cross entropy and the softmax probabilities."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    logZ = np.log(np.exp(shifted).sum(axis=1))
    ce = float(np.mean(logZ - shifted[np.arange(len(labels)), labels]))
    probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
    return ce, probs


def _mlp_forward(theta, layers, X, activation):
    weights, biases = _mlp_unpack(theta, layers)
    act = np.tanh if activation == "tanh" else lambda z: np.maximum(z, 0.0)
    a = X
    pre, post = [], [X]
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = a @ W.T + b
        pre.append(z)
        a = z if i == len(weights) - 1 else act(z)
        post.append(a)
    return pre, post, weights


def make_mlp(layers: List[int], n: int = 256, seed: int = 0,
             activation: str = "tanh") -> Problem:
    """Small classification MLP trained against a frozen random teacher.

    ``layers`` lists all layer widths, input and output included; requires at
    least one hidden layer. Gradients are explicit reverse-mode over the layer
    list; cross-entropy loss, non-convex, no known optimum.
    """
    if len(layers) < 3:
        raise ValueError("need at least one hidden layer")
    if activation not in ("tanh", "relu"):
        raise ValueError(f"unknown activation: {activation!r}")
    rng = _rng(seed)
    d_in, n_classes = layers[0], layers[-1]
    X = rng.standard_normal((n, d_in))

    teacher_w = [rng.standard_normal(s) * (1.5 / np.sqrt(s[1]))
                 for s in _mlp_shapes(layers)]
    teacher_b = [rng.standard_normal(s[0]) * 0.1 for s in _mlp_shapes(layers)]
    theta_teacher = _mlp_pack(teacher_w, teacher_b)
    _, post, _ = _mlp_forward(theta_teacher, layers, X, activation)
    labels = np.argmax(post[-1], axis=1)

    dim = theta_teacher.shape[0]

    def loss(theta, idx):
        _, post, _ = _mlp_forward(theta, layers, X[idx], activation)
        ce, _ = _softmax_ce(post[-1], labels[idx])
        return ce

    def grad(theta, idx):
        Xb, yb = X[idx], labels[idx]
        m = len(idx)
        pre, post, weights = _mlp_forward(theta, layers, Xb, activation)
        _, probs = _softmax_ce(post[-1], yb)
        delta = probs.copy()
        delta[np.arange(m), yb] -= 1.0
        delta /= m
        gw = [None] * len(weights)
        gb = [None] * len(weights)
        for i in range(len(weights) - 1, -1, -1):
            gw[i] = delta.T @ post[i]
            gb[i] = delta.sum(axis=0)
            if i > 0:
                delta = delta @ weights[i]
                if activation == "tanh":
                    delta = delta * (1.0 - post[i] ** 2)
                else:
                    delta = delta * (pre[i - 1] > 0.0)
        return _mlp_pack(gw, gb)

    teacher_loss = loss(theta_teacher, np.arange(n))

    def initial_point():
        init_rng = _rng(seed, 1)
        return init_rng.standard_normal(dim) * 0.1

    problem = Problem(name=f"mlp(layers={layers},act={activation})", dim=dim,
                      n_samples=n, loss=loss, grad=grad, x_star=None,
                      f_star=None, interpolating=False,
                      initial_point=initial_point)
    # recorded for diagnostics: the teacher fits its own labels
    object.__setattr__(problem, "teacher_loss", teacher_loss)
    object.__setattr__(problem, "n_classes", n_classes)
    return problem
