"""Stateful steppers: the model-based momentum methods (plain, bias-corrected,
Adam-preconditioned, and their online lower-bound variants) plus the SGD-M and
AdamW baselines, all behind one uniform step interface.

A stepper is created once per training run and fed one ``StepInput`` per
iteration; the first call also performs the method's initialization from that
sample. Stepper instances are independent but not safe for concurrent
mutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .lowerbound import (LowerBoundMode, LowerBoundState, estimate_star,
                         estimate_star_max, reset_star)
from .model_core import MomentumState, ewa_update, general_step
from .schedules import ConstantSchedule

__all__ = [
    "StepInput",
    "TraceRecord",
    "OptimizerConfig",
    "PreconditionerState",
    "Momo",
    "MomoBias",
    "MomoAdam",
    "MomoStar",
    "MomoAdamStar",
    "SgdM",
    "AdamW",
    "build_stepper",
    "default_config",
    "OPTIMIZER_NAMES",
]


@dataclass(frozen=True)
class StepInput:
    """One sampled evaluation: iterate, minibatch loss and minibatch gradient."""

    x: np.ndarray
    loss: float
    grad: np.ndarray


@dataclass
class TraceRecord:
    k: int
    loss: float
    alpha: float
    tau: float
    zeta: float
    lb: float
    lb_pre: Optional[float] = None   # estimate before the reset guard
    lb_next: Optional[float] = None  # estimate produced for the next step


@dataclass(frozen=True)
class OptimizerConfig:
    alpha: Union[float, object] = 1.0  # float or schedule callable of k
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    lb_mode: Union[str, LowerBoundMode] = LowerBoundMode.FIXED
    lb_init: float = 0.0
    decay_style: str = "exact"  # "exact" (division) or "taylor" (decoupled)

    def schedule(self):
        if callable(self.alpha):
            return self.alpha
        return ConstantSchedule(float(self.alpha))

    def mode(self) -> LowerBoundMode:
        if isinstance(self.lb_mode, LowerBoundMode):
            return self.lb_mode
        return LowerBoundMode(self.lb_mode)


@dataclass
class PreconditionerState:
    """Adam second-moment accumulator and the derived diagonal metric."""

    v: np.ndarray
    k: int = 0

    def update(self, grad: np.ndarray, beta2: float) -> None:
        self.v = beta2 * self.v + (1.0 - beta2) * (grad * grad)
        self.k += 1

    def diagonal(self, epsilon: float, beta2: float) -> np.ndarray:
        return epsilon + np.sqrt(self.v / (1.0 - beta2**self.k))


class _MomoBase:
    """Shared machinery for all model-based steppers: the averaging state,
    the lower-bound bookkeeping, and the reset/estimate composition."""

    warm_init = True

    def __init__(self, config: OptimizerConfig):
        self.config = config
        self.alpha_of = config.schedule()
        self.state: Optional[MomentumState] = None
        mode = config.mode()
        self.lb_state = LowerBoundState(lb=config.lb_init,
                                        lb_floor=config.lb_init, mode=mode)
        self.k = 0

    # subclasses provide the diagonal preconditioner (None = identity)
    def _diagonal(self, inp: StepInput) -> Optional[np.ndarray]:
        return None

    def _init_state(self, inp: StepInput) -> MomentumState:
        if self.warm_init:
            return MomentumState.warm(inp.loss, inp.grad, inp.x,
                                      self.config.beta1)
        return MomentumState.zero(inp.x.shape[0], self.config.beta1)

    def _apply(self, inp: StepInput, D, alpha: float, lam: float, lb: float):
        x_new, tau, zeta = general_step(inp.x, self.state, D, alpha, lam, lb)
        if self.config.decay_style == "taylor" and lam != 0.0:
            d_over_D = self.state.d if D is None else self.state.d / D
            x_new = (1.0 - alpha * lam) * inp.x - tau * d_over_D
        return x_new, tau, zeta

    def step(self, inp: StepInput):
        cfg = self.config
        self.k += 1
        k = self.k
        alpha = self.alpha_of(k)
        lam = cfg.weight_decay
        if self.state is None:
            self.state = self._init_state(inp)
        st = self.state
        st.update(inp.loss, inp.grad, inp.x)
        D = self._diagonal(inp)

        mode = self.lb_state.mode
        lb_pre = self.lb_state.lb
        if mode is not LowerBoundMode.FIXED:
            dxk = float(np.dot(st.d, inp.x))
            h_lam = (1.0 + alpha * lam) * (st.f_bar - st.gamma) + dxk
            self.lb_state.lb = reset_star(self.lb_state.lb, alpha, lam,
                                          st.rho, h_lam, self.lb_state.lb_floor)
        lb = self.lb_state.lb

        x_new, tau, zeta = self._apply(inp, D, alpha, lam, lb)

        lb_next = None
        if mode is LowerBoundMode.ONLINE:
            nsq = self._d_norm_dinv_sq(D)
            lb_next = estimate_star(st.f_bar, inp.x, st.gamma, tau, st.d, D,
                                    st.rho, self.lb_state.lb_floor,
                                    d_norm_dinv_sq=nsq)
            self.lb_state.lb = lb_next
        elif mode is LowerBoundMode.ONLINE_MAX:
            h = st.model_value_at(inp.x)
            nsq = self._d_norm_dinv_sq(D)
            lb_next = estimate_star_max(self.lb_state, h, tau, nsq, st.rho, D)

        rec = TraceRecord(k=k, loss=inp.loss, alpha=alpha, tau=tau, zeta=zeta,
                          lb=lb, lb_pre=lb_pre, lb_next=lb_next)
        return x_new, rec

    def _d_norm_dinv_sq(self, D) -> float:
        d = self.state.d
        if D is None:
            return float(np.dot(d, d))
        return float(np.dot(d, d / D))


class Momo(_MomoBase):
    """Heavy-ball model method: warm start from the first sample, normalized
    averaging, Euclidean metric. Weight decay routes through the general
    closed-form step with the identity preconditioner."""

    name = "momo"
    warm_init = True


class MomoBias(_MomoBase):
    """Zero-initialized variant with bias-corrected cap alpha / (1 - beta**k)
    and correspondingly scaled lower-bound term."""

    name = "momo-bias"
    warm_init = False


class MomoAdam(_MomoBase):
    """Adam-preconditioned model method: zero init, biased averaging with
    rho_k = 1 - beta1**k, diagonal metric eps + sqrt(v_k / (1 - beta2**k))."""

    name = "momo-adam"
    warm_init = False

    def __init__(self, config: OptimizerConfig):
        super().__init__(config)
        self.precond: Optional[PreconditionerState] = None

    def _diagonal(self, inp: StepInput) -> np.ndarray:
        if self.precond is None:
            self.precond = PreconditionerState(v=np.zeros(inp.x.shape[0]))
        self.precond.update(inp.grad, self.config.beta2)
        return self.precond.diagonal(self.config.epsilon, self.config.beta2)


class MomoStar(Momo):
    """Momo with the online bootstrapped lower-bound estimator."""

    name = "momo-star"

    def __init__(self, config: OptimizerConfig):
        if config.mode() is LowerBoundMode.FIXED:
            config = replace(config, lb_mode=LowerBoundMode.ONLINE)
        super().__init__(config)


class MomoAdamStar(MomoAdam):
    """MomoAdam with the online bootstrapped lower-bound estimator (the
    estimate uses the preconditioned gradient norm)."""

    name = "momo-adam-star"

    def __init__(self, config: OptimizerConfig):
        if config.mode() is LowerBoundMode.FIXED:
            config = replace(config, lb_mode=LowerBoundMode.ONLINE)
        super().__init__(config)


class SgdM(_MomoBase):
    """Dampening-matched SGD with momentum: shares the exact d_k stream with
    Momo, steps x - alpha * d_k."""

    name = "sgdm"
    warm_init = True

    def step(self, inp: StepInput):
        self.k += 1
        k = self.k
        alpha = self.alpha_of(k)
        if self.state is None:
            self.state = self._init_state(inp)
        st = self.state
        st.update(inp.loss, inp.grad, inp.x)
        x_new = inp.x - alpha * st.d
        rec = TraceRecord(k=k, loss=inp.loss, alpha=alpha, tau=alpha,
                          zeta=math.inf, lb=math.nan)
        return x_new, rec


class AdamW(_MomoBase):
    """Standard AdamW with bias correction and decoupled weight decay."""

    name = "adamw"
    warm_init = False

    def __init__(self, config: OptimizerConfig):
        super().__init__(config)
        self.precond: Optional[PreconditionerState] = None

    def step(self, inp: StepInput):
        cfg = self.config
        self.k += 1
        k = self.k
        alpha = self.alpha_of(k)
        lam = cfg.weight_decay
        if self.state is None:
            self.state = self._init_state(inp)
        st = self.state
        st.update(inp.loss, inp.grad, inp.x)
        if self.precond is None:
            self.precond = PreconditionerState(v=np.zeros(inp.x.shape[0]))
        self.precond.update(inp.grad, cfg.beta2)
        D = self.precond.diagonal(cfg.epsilon, cfg.beta2)
        tau = alpha / (1.0 - cfg.beta1**k)
        x_new = (1.0 - alpha * lam) * inp.x - tau * (st.d / D)
        rec = TraceRecord(k=k, loss=inp.loss, alpha=alpha, tau=tau,
                          zeta=math.inf, lb=math.nan)
        return x_new, rec


_STEPPERS = {
    cls.name: cls
    for cls in (Momo, MomoBias, MomoAdam, MomoStar, MomoAdamStar, SgdM, AdamW)
}
OPTIMIZER_NAMES = tuple(_STEPPERS)


def default_config(name: str) -> OptimizerConfig:
    """Per-method defaults: alpha=1, beta=0.9 for the SGD-flavored methods;
    alpha=1e-2, betas (0.9, 0.999), eps=1e-8 for the Adam-flavored ones."""
    if name in ("momo-adam", "momo-adam-star", "adamw"):
        return OptimizerConfig(alpha=1e-2)
    return OptimizerConfig(alpha=1.0)


def build_stepper(name: str, config: Optional[OptimizerConfig] = None):
    try:
        cls = _STEPPERS[name]
    except KeyError:
        raise ValueError(f"unknown optimizer: {name!r}") from None
    return cls(config if config is not None else default_config(name))
