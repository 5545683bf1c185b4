"""Independent brute-force verifiers used by the test suite: a grid plus
golden-section solver for the truncated prox subproblem, central-difference
gradients, explicit-sum recomputation of the recursive averages, and the
exact (non-bootstrapped) lower-bound sequence for runs with known optimum.

None of these call the closed-form production code; they are deliberately
slow and simple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .model_core import AveragingScheme

__all__ = [
    "GRID_POINTS",
    "GOLDEN_BRACKET_WIDTH",
    "GRID_RANGE_FACTOR",
    "prox_objective",
    "prox_oracle",
    "fd_gradient",
    "explicit_averages",
    "OracleRunHistory",
    "lemma3_exact_bound",
]

# fixed oracle parameters: 1e4-point grid over [0, 3*alpha], golden-section
# refinement of the best bracket down to width 1e-10
GRID_POINTS = 10_000
GOLDEN_BRACKET_WIDTH = 1e-10
GRID_RANGE_FACTOR = 3.0

_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def prox_objective(y: np.ndarray, c: float, a: np.ndarray, y0: np.ndarray,
                   D, alpha: float, lam: float) -> float:
    """(c + <a, y - y0>)_+ + ||y - y0||^2_D / (2 alpha) + lam ||y||^2_D / 2."""
    Dv = np.ones_like(y0) if D is None else np.asarray(D, dtype=float)
    diff = y - y0
    return (max(c + float(np.dot(a, diff)), 0.0)
            + float(np.dot(diff, Dv * diff)) / (2.0 * alpha)
            + 0.5 * lam * float(np.dot(y, Dv * y)))


def _golden_section(phi, lo: float, hi: float, width: float) -> float:
    c = hi - _INV_GOLDEN * (hi - lo)
    d = lo + _INV_GOLDEN * (hi - lo)
    fc, fd = phi(c), phi(d)
    while hi - lo > width:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_GOLDEN * (hi - lo)
            fc = phi(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_GOLDEN * (hi - lo)
            fd = phi(d)
    return 0.5 * (lo + hi)


def prox_oracle(c: float, a: np.ndarray, y0: np.ndarray, D, alpha: float,
                lam: float):
    """Brute-force minimizer of the truncated prox objective.

    The minimizer lies on the ray y(t) = (y0 - t * D^{-1} a) / (1 + lam*alpha);
    we grid t over [0, 3*alpha] and refine the best bracket by golden section.
    Returns (y_best, objective_value).
    """
    Dv = np.ones_like(y0) if D is None else np.asarray(D, dtype=float)
    a_dir = a / Dv
    scale = 1.0 + lam * alpha

    def y_of(t: float) -> np.ndarray:
        return (y0 - t * a_dir) / scale

    def phi(t: float) -> float:
        return prox_objective(y_of(t), c, a, y0, D, alpha, lam)

    ts = np.linspace(0.0, GRID_RANGE_FACTOR * alpha, GRID_POINTS)
    # vectorized grid sweep; the refinement below uses the scalar objective
    Y = (y0[None, :] - ts[:, None] * a_dir[None, :]) / scale
    diff = Y - y0[None, :]
    vals = (np.maximum(c + diff @ a, 0.0)
            + np.einsum("ij,ij->i", diff, Dv[None, :] * diff) / (2.0 * alpha)
            + 0.5 * lam * np.einsum("ij,ij->i", Y, Dv[None, :] * Y))
    i = int(np.argmin(vals))
    lo = ts[max(i - 1, 0)]
    hi = ts[min(i + 1, len(ts) - 1)]
    t_best = _golden_section(phi, lo, hi, GOLDEN_BRACKET_WIDTH)
    candidates = [t_best, ts[i]]
    t_best = min(candidates, key=phi)
    return y_of(t_best), phi(t_best)


def fd_gradient(problem, x: np.ndarray, batch: np.ndarray,
                h: float = 1e-6) -> np.ndarray:
    """Central finite differences of problem.loss per coordinate."""
    if h <= 0:
        raise ValueError("h must be positive")
    g = np.zeros_like(x, dtype=float)
    for i in range(len(x)):
        e = np.zeros_like(x, dtype=float)
        e[i] = h
        g[i] = (problem.loss(x + e, batch) - problem.loss(x - e, batch)) / (2 * h)
    return g


def explicit_averages(history, scheme: AveragingScheme, k: int):
    """Direct weighted sums over the stored stream.

    ``history`` is a list of (loss, grad, x) tuples, 1-based step j at index
    j-1. Returns (d_k, f_bar_k, gamma_k, rho_k) computed from the closed-form
    weights rather than the recursion.
    """
    if k > len(history):
        raise ValueError("k exceeds history length")
    w = scheme.weights(k)
    d = sum(w[j] * history[j][1] for j in range(k))
    f_bar = sum(w[j] * history[j][0] for j in range(k))
    gamma = sum(w[j] * float(np.dot(history[j][1], history[j][2]))
                for j in range(k))
    return d, f_bar, gamma, scheme.rho(k)


@dataclass
class OracleRunHistory:
    """Per-step quantities recorded from a run, for the exact bound below."""

    x1: np.ndarray
    hs: List[float] = field(default_factory=list)
    taus: List[float] = field(default_factory=list)
    d_norm_dinv_sqs: List[float] = field(default_factory=list)
    rhos: List[float] = field(default_factory=list)
    fstar_samples: List[float] = field(default_factory=list)  # f(x*, s_j)

    def append(self, h, tau, d_norm_dinv_sq, rho, fstar_sample):
        self.hs.append(float(h))
        self.taus.append(float(tau))
        self.d_norm_dinv_sqs.append(float(d_norm_dinv_sq))
        self.rhos.append(float(rho))
        self.fstar_samples.append(float(fstar_sample))


def exact_fbar_star(history: OracleRunHistory, scheme: AveragingScheme,
                    k: int) -> float:
    """Weighted average of the stored optimal-point sample losses,
    normalized by the total weight."""
    w = scheme.weights(k)
    return float(np.dot(w, history.fstar_samples[:k])) / scheme.rho(k)


def lemma3_exact_bound(history: OracleRunHistory, x_star: np.ndarray,
                       D_history, scheme: AveragingScheme) -> np.ndarray:
    """The full non-bootstrapped lower-bound sequence, including the initial
    distance term and the preconditioner-ratio weights eta_j, with the
    averaged optimal value recomputed exactly from stored samples.

    ``D_history`` is a list of diagonal vectors (or None for identity), one
    per step. Returns the bound on the averaged optimal value after each step
    k = 1..K (i.e. the estimate available for step k+1); steps with tau = 0
    yield nan.
    """
    K = len(history.taus)
    etas = np.ones(K)
    for j in range(1, K):
        D_prev = D_history[j - 1]
        D_cur = D_history[j]
        pv = np.ones_like(x_star) if D_prev is None else np.asarray(D_prev)
        cv = np.ones_like(x_star) if D_cur is None else np.asarray(D_cur)
        etas[j] = etas[j - 1] * float(np.min(pv / cv))

    D1 = D_history[0]
    D1v = np.ones_like(x_star) if D1 is None else np.asarray(D1)
    diff = history.x1 - x_star
    dist1_sq = float(np.dot(diff, D1v * diff))

    out = np.full(K, np.nan)
    running = -dist1_sq  # 2*sum eta tau (h - tau/2 nsq) - D1^2 - 2*sum prior
    prior_fbar_terms = 0.0
    for k in range(1, K + 1):
        j = k - 1
        running += 2.0 * etas[j] * history.taus[j] * (
            history.hs[j] - 0.5 * history.taus[j] * history.d_norm_dinv_sqs[j])
        denom = 2.0 * etas[j] * history.taus[j] * history.rhos[j]
        if denom != 0.0:
            out[j] = (running - prior_fbar_terms) / denom
        prior_fbar_terms += (2.0 * etas[j] * history.taus[j] * history.rhos[j]
                             * exact_fbar_star(history, scheme, k))
    return out
