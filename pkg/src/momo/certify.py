"""Certification routines shared by the test suite and the CLI verify verb.

Each check returns a CheckResult; nothing here asserts, so callers decide
whether a failure is fatal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from .model_core import (AveragingMode, AveragingScheme, MomentumState,
                         general_step, truncated_prox_euclidean,
                         truncated_prox_preconditioned)
from .oracle import explicit_averages, fd_gradient, prox_objective, prox_oracle
from .problems import make_least_squares, make_logreg, make_mlp

__all__ = [
    "CheckResult",
    "certify_prox_euclidean",
    "certify_prox_preconditioned",
    "certify_reduction_chain",
    "certify_averaging",
    "certify_gradients",
    "run_all",
]

PROX_TOL = 1e-8
AVG_REL_TOL = 1e-10


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, 0]))


def certify_prox_euclidean(n_instances: int = 1000, seed: int = 7) -> CheckResult:
    """Closed form against the grid oracle on random Euclidean instances."""
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        dim = int(rng.integers(1, 9))
        c = float(rng.normal() * 3.0)
        a = rng.normal(size=dim)
        while float(np.dot(a, a)) == 0.0:
            a = rng.normal(size=dim)
        y0 = rng.normal(size=dim)
        beta = float(rng.uniform(0.05, 5.0))
        res = truncated_prox_euclidean(c, a, y0, beta)
        closed = prox_objective(res.y_plus, c, a, y0, None, beta, 0.0)
        _, oracle_val = prox_oracle(c, a, y0, None, beta, 0.0)
        worst = max(worst, closed - oracle_val)
    passed = worst <= PROX_TOL
    return CheckResult("prox-euclidean", passed,
                       f"max objective excess {worst:.3e} over {n_instances} "
                       f"instances (tol {PROX_TOL:.0e})")


def certify_prox_preconditioned(n_instances: int = 1000,
                                seed: int = 11) -> CheckResult:
    """Same certification with random diagonals and weight decay."""
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        dim = int(rng.integers(1, 9))
        c = float(rng.normal() * 3.0)
        a = rng.normal(size=dim)
        while float(np.dot(a, a)) == 0.0:
            a = rng.normal(size=dim)
        y0 = rng.normal(size=dim)
        D = rng.uniform(0.1, 4.0, size=dim)
        alpha = float(rng.uniform(0.05, 5.0))
        lam = float(rng.uniform(0.0, 0.5))
        res = truncated_prox_preconditioned(c, a, y0, D, alpha, lam)
        closed = prox_objective(res.y_plus, c, a, y0, D, alpha, lam)
        _, oracle_val = prox_oracle(c, a, y0, D, alpha, lam)
        worst = max(worst, closed - oracle_val)
    passed = worst <= PROX_TOL
    return CheckResult("prox-preconditioned", passed,
                       f"max objective excess {worst:.3e} over {n_instances} "
                       f"instances (tol {PROX_TOL:.0e})")


def certify_reduction_chain(n_steps: int = 100, seed: int = 13) -> CheckResult:
    """Bitwise agreement of the general step with its special cases on
    random momentum states: lam=0, D=None against the plain closed form, and
    beta=0 against the uncapped Polyak step with a cap."""
    rng = _rng(seed)
    mismatches = 0
    for _ in range(n_steps):
        dim = int(rng.integers(1, 9))
        x = rng.normal(size=dim)
        loss = float(abs(rng.normal()) * 2.0)
        grad = rng.normal(size=dim)
        while float(np.dot(grad, grad)) == 0.0:
            grad = rng.normal(size=dim)
        alpha = float(rng.uniform(0.05, 5.0))
        lb = float(rng.normal())

        st = MomentumState.warm(loss, grad, x, beta=0.5)
        st.update(loss, grad, x)
        x_gen, tau_gen, _ = general_step(x, st, None, alpha, 0.0, lb)
        c = st.model_value_at(x) - st.rho * lb
        res = truncated_prox_euclidean(c, st.d, x, alpha)
        if not (np.array_equal(x_gen, res.y_plus) and tau_gen == res.tau):
            mismatches += 1

        # beta = 0 collapses the averages to the latest sample: the step is
        # the capped Polyak step from (loss, grad) alone
        st0 = MomentumState.warm(loss, grad, x, beta=0.0)
        st0.update(loss, grad, x)
        x_sps, tau_sps, _ = general_step(x, st0, None, alpha, 0.0, lb)
        nsq = float(np.dot(grad, grad))
        tau_ref = min(alpha, max(loss - lb, 0.0) / nsq)
        x_ref = x - tau_ref * grad
        if not (np.array_equal(x_sps, x_ref) and tau_sps == tau_ref):
            mismatches += 1
    passed = mismatches == 0
    return CheckResult("reduction-chain", passed,
                       f"{mismatches} bitwise mismatches over {n_steps} steps")


def certify_averaging(n_streams: int = 50, max_k: int = 20,
                      seed: int = 17) -> CheckResult:
    """Recursive averages against explicit weighted sums for both schemes."""
    rng = _rng(seed)
    worst = 0.0
    for _ in range(n_streams):
        dim = int(rng.integers(1, 6))
        beta = float(rng.uniform(0.0, 0.99))
        history = []
        states = {
            AveragingMode.EWA_NORMALIZED: None,
            AveragingMode.EWA_BIASED: MomentumState.zero(dim, beta),
        }
        for k in range(1, max_k + 1):
            loss = float(rng.normal())
            grad = rng.normal(size=dim)
            x = rng.normal(size=dim)
            history.append((loss, grad, x))
            if states[AveragingMode.EWA_NORMALIZED] is None:
                states[AveragingMode.EWA_NORMALIZED] = MomentumState.warm(
                    loss, grad, x, beta)
            for mode, st in states.items():
                st.update(loss, grad, x)
                scheme = AveragingScheme(mode, beta)
                d, f_bar, gamma, rho = explicit_averages(history, scheme, k)
                scale = max(np.max(np.abs(d)), abs(f_bar), abs(gamma),
                            abs(rho), 1e-300)
                err = max(np.max(np.abs(st.d - d)), abs(st.f_bar - f_bar),
                          abs(st.gamma - gamma), abs(st.rho - rho)) / scale
                worst = max(worst, err)
    passed = worst <= AVG_REL_TOL
    return CheckResult("averaging", passed,
                       f"max relative error {worst:.3e} over {n_streams} "
                       f"streams, k <= {max_k} (tol {AVG_REL_TOL:.0e})")


def certify_gradients(seed: int = 19) -> CheckResult:
    """Finite-difference checks on every built-in problem family."""
    rng = _rng(seed)
    failures = []

    def check(problem, x, batch, tol, label):
        g = problem.grad(x, batch)
        g_fd = fd_gradient(problem, x, batch)
        scale = max(float(np.max(np.abs(g_fd))), 1.0)
        err = float(np.max(np.abs(g - g_fd))) / scale
        if err > tol:
            failures.append(f"{label}: {err:.3e} > {tol:.0e}")

    ls = make_least_squares(50, 6, seed=1)
    check(ls, rng.normal(size=ls.dim), np.arange(10), 1e-6, "least-squares")

    lr = make_logreg(60, 5, seed=2)
    check(lr, rng.normal(size=lr.dim) * 0.5, np.arange(12), 1e-6, "logreg")

    mlp = make_mlp([4, 8, 3], 40, seed=3)
    for trial in range(5):
        x = rng.normal(size=mlp.dim) * 0.5
        check(mlp, x, np.arange(8), 1e-4, f"mlp-point-{trial}")

    passed = not failures
    detail = "all problems match central differences" if passed \
        else "; ".join(failures)
    return CheckResult("gradients", passed, detail)


def run_all(fast: bool = False) -> List[CheckResult]:
    n = 100 if fast else 1000
    return [
        certify_prox_euclidean(n),
        certify_prox_preconditioned(n),
        certify_reduction_chain(),
        certify_averaging(),
        certify_gradients(),
    ]
