"""Online estimation of a lower bound on the optimal value: the bootstrapped
estimator, the reset guard that keeps the step size positive, and the
max-variant estimator with preconditioner-ratio weighting."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

__all__ = [
    "LowerBoundMode",
    "LowerBoundState",
    "reset_star",
    "estimate_star",
    "estimate_star_max",
]


class LowerBoundMode(Enum):
    FIXED = "fixed"
    ONLINE = "online"
    ONLINE_MAX = "online-max"


@dataclass
class LowerBoundState:
    """Current estimate, its floor, and the running sums for the max-variant
    estimator (eta is the product of minimum preconditioner-ratio eigenvalues,
    starting at 1)."""

    lb: float
    lb_floor: float
    mode: LowerBoundMode = LowerBoundMode.ONLINE
    weight_sum: float = 0.0  # running sum of eta_j * tau_j * rho_j
    eta: float = 1.0
    D_prev: Optional[np.ndarray] = None


def reset_star(lb: float, alpha: float, lam: float, rho: float,
               h_lambda: float, lb_floor: float) -> float:
    """Reset the estimate when it would force a zero step.

    Fires when (1 + alpha*lam) * rho * lb >= h_lambda, where h_lambda is the
    weight-decay-adjusted model value; the estimate is then pulled down to
    half that threshold (never below the floor).
    """
    scale = (1.0 + alpha * lam) * rho
    if scale * lb >= h_lambda:
        return max(0.5 * h_lambda / scale, lb_floor)
    return lb


def estimate_star(f_bar: float, x: np.ndarray, gamma: float, tau: float,
                  d: np.ndarray, D, rho: float, lb_floor: float,
                  d_norm_dinv_sq: Optional[float] = None) -> float:
    """Bootstrapped one-step estimate max{(h - tau/2 * ||d||^2_{D^-1}) / rho,
    lb_floor}. Pass d_norm_dinv_sq to skip recomputing the norm."""
    h = f_bar + float(np.dot(d, x)) - gamma
    if d_norm_dinv_sq is None:
        if D is None:
            d_norm_dinv_sq = float(np.dot(d, d))
        else:
            d_norm_dinv_sq = float(np.dot(d, d / np.asarray(D, dtype=float)))
    return max((h - 0.5 * tau * d_norm_dinv_sq) / rho, lb_floor)


def estimate_star_max(state: LowerBoundState, h: float, tau: float,
                      d_norm_D_sq: float, rho: float, D_new) -> float:
    """Accumulate one step of the max-variant estimator and return the new
    estimate. D_new is the current diagonal preconditioner (None = identity);
    eta picks up the minimum entry ratio of consecutive preconditioners.
    Degenerate runs (all steps so far had tau = 0) leave the estimate as is.
    """
    if D_new is not None:
        D_new = np.asarray(D_new, dtype=float)
        if state.D_prev is not None:
            state.eta *= float(np.min(state.D_prev / D_new))
        state.D_prev = D_new.copy()
    increment_num = state.eta * tau * (h - 0.5 * tau * d_norm_D_sq)
    increment_den = state.eta * tau * rho
    new_den = state.weight_sum + increment_den
    if new_den == 0.0:
        return state.lb
    lb_new = (state.lb * state.weight_sum + increment_num) / new_den
    lb_new = max(lb_new, state.lb_floor)
    state.lb = lb_new
    state.weight_sum = new_den
    return lb_new
