"""Learning-rate schedules. Each schedule is a pure function of the 1-based
iteration counter k, exposed as a callable dataclass so run configs stay
picklable and serializable."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

__all__ = [
    "ConstantSchedule",
    "ExponentialSchedule",
    "WarmupCosineSchedule",
    "WarmupInvSqrtSchedule",
    "make_schedule",
]


@dataclass(frozen=True)
class ConstantSchedule:
    alpha0: float

    def __call__(self, k: int) -> float:
        return self.alpha0

    def with_base(self, alpha0: float) -> "ConstantSchedule":
        return replace(self, alpha0=alpha0)


@dataclass(frozen=True)
class ExponentialSchedule:
    """alpha0 * decay_rate ** (k - 1)."""

    alpha0: float
    decay_rate: float = 0.999

    def __call__(self, k: int) -> float:
        return self.alpha0 * self.decay_rate ** (k - 1)

    def with_base(self, alpha0: float) -> "ExponentialSchedule":
        return replace(self, alpha0=alpha0)


@dataclass(frozen=True)
class WarmupCosineSchedule:
    """Linear warmup to alpha0 over warmup_steps, then cosine decay to zero
    at total_steps."""

    alpha0: float
    warmup_steps: int
    total_steps: int

    def __call__(self, k: int) -> float:
        if k <= self.warmup_steps:
            return self.alpha0 * k / max(self.warmup_steps, 1)
        span = max(self.total_steps - self.warmup_steps, 1)
        frac = min((k - self.warmup_steps) / span, 1.0)
        return self.alpha0 * 0.5 * (1.0 + math.cos(math.pi * frac))

    def with_base(self, alpha0: float) -> "WarmupCosineSchedule":
        return replace(self, alpha0=alpha0)


@dataclass(frozen=True)
class WarmupInvSqrtSchedule:
    """Linear warmup to alpha0 over warmup_steps, then alpha0 * sqrt(w / k)."""

    alpha0: float
    warmup_steps: int

    def __call__(self, k: int) -> float:
        if k <= self.warmup_steps:
            return self.alpha0 * k / max(self.warmup_steps, 1)
        return self.alpha0 * math.sqrt(self.warmup_steps / k)

    def with_base(self, alpha0: float) -> "WarmupInvSqrtSchedule":
        return replace(self, alpha0=alpha0)


def make_schedule(name: str, alpha0: float, warmup_steps: int = 0,
                  total_steps: int = 0, decay_rate: float = 0.999):
    name = name.lower()
    if name in ("const", "constant"):
        return ConstantSchedule(alpha0)
    if name in ("exp", "exponential"):
        return ExponentialSchedule(alpha0, decay_rate)
    if name == "warmup-cosine":
        return WarmupCosineSchedule(alpha0, warmup_steps, total_steps)
    if name == "warmup-invsqrt":
        return WarmupInvSqrtSchedule(alpha0, warmup_steps)
    raise ValueError(f"unknown schedule: {name!r}")
