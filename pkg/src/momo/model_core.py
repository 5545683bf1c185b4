"""Closed-form proximal updates for truncated linear models, and the
exponentially-weighted averaging algebra that every stepper builds on.

All arithmetic is 64-bit floating point. Functions here are pure, or mutate
only the state object passed in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "AveragingMode",
    "AveragingScheme",
    "MomentumState",
    "ProxResult",
    "ZeroDirectionError",
    "ewa_update",
    "truncated_prox_euclidean",
    "truncated_prox_preconditioned",
    "momo_tau",
    "general_step",
]


class ZeroDirectionError(ValueError):
    """Raised when an operation requires a nonzero direction vector."""


class AveragingMode(Enum):
    EWA_NORMALIZED = "normalized"
    EWA_BIASED = "biased"


@dataclass(frozen=True)
class AveragingScheme:
    """Exponential averaging with either normalized or Adam-style weights.

    Normalized weights sum to 1 for every k; the biased (zero-init) weights
    sum to 1 - beta**k and approach 1 from below.
    """

    mode: AveragingMode
    beta: float

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must be in [0, 1), got {self.beta}")

    def rho(self, k: int) -> float:
        """Total averaging weight after k updates."""
        if self.mode is AveragingMode.EWA_NORMALIZED:
            return 1.0
        return 1.0 - self.beta**k

    def weights(self, k: int) -> np.ndarray:
        """Explicit per-sample weights (index j = 1..k), for verification."""
        beta = self.beta
        w = np.array([(1.0 - beta) * beta ** (k - j) for j in range(1, k + 1)])
        if self.mode is AveragingMode.EWA_NORMALIZED and k >= 1:
            w[0] = beta ** (k - 1)
        return w


def ewa_update(prev, new, beta: float):
    """One exponential-averaging step: (1 - beta) * new + beta * prev."""
    return (1.0 - beta) * new + beta * prev


@dataclass
class MomentumState:
    """Running averages (d, f_bar, gamma) of sampled gradients, losses and
    gradient-iterate inner products, plus the total weight rho."""

    d: np.ndarray
    f_bar: float
    gamma: float
    k: int
    rho: float
    scheme: AveragingScheme

    @classmethod
    def warm(cls, loss: float, grad: np.ndarray, x: np.ndarray, beta: float) -> "MomentumState":
        """Warm start from the first sample (normalized averaging)."""
        scheme = AveragingScheme(AveragingMode.EWA_NORMALIZED, beta)
        d0 = np.array(grad, dtype=float)
        return cls(d=d0, f_bar=float(loss), gamma=float(np.dot(d0, x)), k=0,
                   rho=1.0, scheme=scheme)

    @classmethod
    def zero(cls, dim: int, beta: float) -> "MomentumState":
        """Zero start (biased averaging with rho_k = 1 - beta**k)."""
        scheme = AveragingScheme(AveragingMode.EWA_BIASED, beta)
        return cls(d=np.zeros(dim), f_bar=0.0, gamma=0.0, k=0, rho=0.0,
                   scheme=scheme)

    def update(self, loss: float, grad: np.ndarray, x: np.ndarray) -> None:
        beta = self.scheme.beta
        self.f_bar = ewa_update(self.f_bar, float(loss), beta)
        self.gamma = ewa_update(self.gamma, float(np.dot(grad, x)), beta)
        self.d = ewa_update(self.d, grad, beta)
        self.k += 1
        self.rho = self.scheme.rho(self.k)

    def model_value_at(self, x: np.ndarray) -> float:
        """h = f_bar + (<d, x> - gamma), the linear model evaluated at x.

        The grouping matters: when the inner product equals gamma bitwise
        (beta = 0) the terms cancel exactly and h reduces to f_bar.
        """
        return self.f_bar + (float(np.dot(self.d, x)) - self.gamma)


@dataclass
class ProxResult:
    y_plus: np.ndarray
    tau: float
    model_value: float


def truncated_prox_euclidean(c: float, a: np.ndarray, y0: np.ndarray,
                             beta: float) -> ProxResult:
    """Minimize (c + <a, y - y0>)_+ + ||y - y0||^2 / (2 beta) in closed form.

    The minimizer is y0 - tau * a with tau = min{beta, (c)_+ / ||a||^2}.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    nsq = float(np.dot(a, a))
    if nsq == 0.0:
        raise ZeroDirectionError("direction vector a must be nonzero")
    tau = min(beta, max(c, 0.0) / nsq)
    y_plus = y0 - tau * a
    model_value = max(c - tau * nsq, 0.0)
    return ProxResult(y_plus=y_plus, tau=tau, model_value=model_value)


def truncated_prox_preconditioned(c: float, a: np.ndarray, y0: np.ndarray,
                                  D: np.ndarray, alpha: float,
                                  lam: float) -> ProxResult:
    """Weight-decay, preconditioned variant of the truncated prox step.

    Minimizes (c + <a, y - y0>)_+ + ||y - y0||^2_D / (2 alpha)
    + lam * ||y||^2_D / 2 where D is a positive diagonal. With lam = 0 and
    D = 1 this reduces bit-for-bit to ``truncated_prox_euclidean``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    D = np.asarray(D, dtype=float)
    if np.any(D <= 0.0):
        raise ValueError("all preconditioner entries must be positive")
    a_over_D = a / D
    nsq = float(np.dot(a, a_over_D))
    if nsq == 0.0:
        raise ZeroDirectionError("direction vector a must be nonzero")
    scale = 1.0 + lam * alpha
    num = max(scale * c - lam * alpha * float(np.dot(a, y0)), 0.0)
    tau = min(alpha, num / nsq)
    y_plus = (y0 - tau * a_over_D) / scale
    model_value = max(
        c - (lam * alpha / scale) * float(np.dot(a, y0)) - (tau / scale) * nsq,
        0.0,
    )
    return ProxResult(y_plus=y_plus, tau=tau, model_value=model_value)


def momo_tau(h: float, lb: float, rho: float, alpha: float,
             d_norm_sq: float) -> float:
    """Adaptive step size min{alpha / rho, (h - rho * lb)_+ / d_norm_sq}."""
    if d_norm_sq == 0.0:
        raise ZeroDirectionError("d_norm_sq must be positive; callers handle d=0")
    return min(alpha / rho, max(h - rho * lb, 0.0) / d_norm_sq)


def general_step(x: np.ndarray, state: MomentumState, D, alpha: float,
                 lam: float, lb: float):
    """One preconditioned, weight-decayed model step.

    Returns (x_new, tau, zeta) where zeta is the uncapped adaptive term and
    tau = min{alpha / rho, zeta}. D is a positive diagonal vector or None for
    the identity. When the averaged gradient vanishes, the step is skipped:
    x_new = x / (1 + alpha * lam), tau = 0, zeta = inf.
    """
    d = state.d
    rho = state.rho
    if D is None:
        d_over_D = d
    else:
        d_over_D = d / D
    nsq = float(np.dot(d, d_over_D))
    scale = 1.0 + alpha * lam
    if nsq == 0.0:
        return x / scale, 0.0, math.inf
    dxk = float(np.dot(d, x))
    if lam == 0.0:
        # identical arithmetic to the momo_tau path so the reduction is bitwise
        h = state.f_bar + (dxk - state.gamma)
        num = max(h - rho * lb, 0.0)
    else:
        num = max(scale * (state.f_bar - rho * lb - state.gamma) + dxk, 0.0)
    zeta = num / nsq
    tau = min(alpha / rho, zeta)
    x_new = (x - tau * d_over_D) / scale
    return x_new, tau, zeta
