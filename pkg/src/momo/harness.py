"""Training-loop harness: run configs, seeded loops, learning-rate sweeps,
and CSV emission. CSV is the interface; figures are rendered from the same
rows by the report module."""

from __future__ import annotations

import concurrent.futures
import csv
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .optimizers import OptimizerConfig, StepInput, build_stepper
from .problems import (BatchSampler, Problem, SamplingMode, make_least_squares,
                       make_logreg, make_mlp, sample_batch)

__all__ = [
    "CSV_HEADER",
    "ProblemSpec",
    "RunConfig",
    "TraceRow",
    "RunResult",
    "DivergenceError",
    "ConfigError",
    "build_problem",
    "run",
    "sweep",
    "emit_csv",
    "parse_csv",
    "emit_summary",
]

CSV_HEADER = "k,epoch,alpha,tau,zeta,lb,batch_loss,full_loss,dist"


class DivergenceError(RuntimeError):
    """Raised when a run produces a non-finite loss; carries the iteration."""

    def __init__(self, k: int):
        super().__init__(f"non-finite loss at iteration {k}")
        self.k = k


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class ProblemSpec:
    name: str = "least-squares"
    n: int = 200
    d: int = 10
    seed: int = 0
    separable: bool = False
    layers: Optional[Sequence[int]] = None
    activation: str = "tanh"


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run: problem, optimizer, schedule
    (inside the optimizer config), iteration budget and trace cadence."""

    problem: ProblemSpec = ProblemSpec()
    optimizer: str = "momo"
    opt: OptimizerConfig = field(default_factory=OptimizerConfig)
    iterations: int = 1000
    batch_size: int = 20
    trace_interval: int = 1
    seed: int = 0
    sampling: SamplingMode = SamplingMode.WITH_REPLACEMENT


@dataclass
class TraceRow:
    k: int
    epoch: int
    alpha: float
    tau: float
    zeta: float
    lb: float
    batch_loss: float
    full_loss: float
    dist: Optional[float]


@dataclass
class RunResult:
    config: RunConfig
    rows: List[TraceRow]
    final_full_loss: float
    min_full_loss: float
    final_lb: float


def build_problem(spec: ProblemSpec) -> Problem:
    if spec.name == "least-squares":
        return make_least_squares(spec.n, spec.d, spec.seed)
    if spec.name == "logreg":
        return make_logreg(spec.n, spec.d, spec.seed, spec.separable)
    if spec.name == "mlp":
        layers = list(spec.layers) if spec.layers else [spec.d, 16, 16, 3]
        return make_mlp(layers, spec.n, spec.seed, spec.activation)
    raise ConfigError(f"unknown problem: {spec.name!r}")


def _validate(config: RunConfig) -> None:
    if config.iterations < 1:
        raise ConfigError("iterations must be >= 1")
    if config.batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    if config.trace_interval < 1:
        raise ConfigError("trace_interval must be >= 1")


def run(config: RunConfig, problem: Optional[Problem] = None) -> RunResult:
    """Execute one deterministic training loop and collect the trace.

    Records one row every ``trace_interval`` iterations plus the final step.
    Raises DivergenceError on a non-finite loss or iterate.
    """
    _validate(config)
    if problem is None:
        problem = build_problem(config.problem)
    sampler = BatchSampler(problem.n_samples, config.batch_size,
                           seed=config.seed, mode=config.sampling)
    stepper = build_stepper(config.optimizer, config.opt)
    x = problem.initial_point()
    steps_per_epoch = -(-problem.n_samples // config.batch_size)

    rows: List[TraceRow] = []
    min_full = math.inf
    final_lb = math.nan
    # overflow in a diverging run is reported via DivergenceError, not warnings
    with np.errstate(over="ignore", invalid="ignore"):
        return _run_loop(config, problem, sampler, stepper, x, steps_per_epoch,
                         rows, min_full, final_lb)


def _run_loop(config, problem, sampler, stepper, x, steps_per_epoch, rows,
              min_full, final_lb):
    for k in range(1, config.iterations + 1):
        idx = sample_batch(sampler, k)
        loss = problem.loss(x, idx)
        if not math.isfinite(loss):
            raise DivergenceError(k)
        grad = problem.grad(x, idx)
        x, rec = stepper.step(StepInput(x=x, loss=loss, grad=grad))
        if not np.all(np.isfinite(x)):
            raise DivergenceError(k)
        final_lb = rec.lb
        if k % config.trace_interval == 0 or k == config.iterations:
            full = problem.full_loss(x)
            min_full = min(min_full, full)
            dist = None
            if problem.x_star is not None:
                dist = float(np.linalg.norm(x - problem.x_star))
            rows.append(TraceRow(k=k, epoch=(k - 1) // steps_per_epoch,
                                 alpha=rec.alpha, tau=rec.tau, zeta=rec.zeta,
                                 lb=rec.lb, batch_loss=loss, full_loss=full,
                                 dist=dist))
    final_full = rows[-1].full_loss if rows else math.inf
    return RunResult(config=config, rows=rows, final_full_loss=final_full,
                     min_full_loss=min_full, final_lb=final_lb)


# ---------------------------------------------------------------------------
# sweeps


def _with_alpha(config: RunConfig, alpha: float, seed: int) -> RunConfig:
    sched = config.opt.schedule().with_base(alpha)
    return replace(config, opt=replace(config.opt, alpha=sched), seed=seed)


def _sweep_one(job):
    config, alpha, seed = job
    cfg = _with_alpha(config, alpha, seed)
    try:
        result = run(cfg)
        return (alpha, seed, "ok", result.final_full_loss,
                result.min_full_loss, result.final_lb, result)
    except DivergenceError:
        return (alpha, seed, "diverged", math.inf, math.inf, math.nan, None)


def sweep(base_config: RunConfig, alpha_grid: Sequence[float],
          seeds: Sequence[int], jobs: int = 1):
    """Run all (alpha, seed) pairs; per-run failures become ``diverged`` rows.

    Returns (summary_rows, detail_rows, results) where summary_rows hold one
    entry per alpha with mean/std of the final full loss over non-diverged
    seeds, detail_rows one entry per run, and results the RunResult objects
    (None for diverged runs) keyed by (alpha, seed).
    """
    if not alpha_grid:
        raise ConfigError("alpha grid must be nonempty")
    jobs_list = [(base_config, a, s) for a in alpha_grid for s in seeds]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_sweep_one, jobs_list))
    else:
        outcomes = [_sweep_one(j) for j in jobs_list]

    detail_rows = []
    results: Dict[tuple, Optional[RunResult]] = {}
    for alpha, seed, status, final, min_loss, final_lb, result in outcomes:
        detail_rows.append({"alpha": alpha, "seed": seed, "status": status,
                            "final_loss": final, "min_loss": min_loss,
                            "final_lb": final_lb})
        results[(alpha, seed)] = result

    summary_rows = []
    for alpha in alpha_grid:
        finals = [r["final_loss"] for r in detail_rows
                  if r["alpha"] == alpha and r["status"] == "ok"]
        n_div = sum(1 for r in detail_rows
                    if r["alpha"] == alpha and r["status"] == "diverged")
        if finals:
            # near-divergent finite losses can overflow the variance
            with np.errstate(over="ignore", invalid="ignore"):
                mean = float(np.mean(finals))
                std = float(np.std(finals))
        else:
            mean, std = math.inf, math.nan
        summary_rows.append({"alpha": alpha, "mean_final_loss": mean,
                             "std_final_loss": std, "n_seeds": len(seeds),
                             "n_diverged": n_div})
    return summary_rows, detail_rows, results


# ---------------------------------------------------------------------------
# CSV emission


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def emit_csv(rows: List[TraceRow], path: str) -> None:
    """Fixed-header trace CSV; floats as shortest round-trip decimals, the
    zeta sentinel as the literal ``inf``, unknown distances empty."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in rows:
                fh.write(",".join([str(r.k), str(r.epoch), _fmt(r.alpha),
                                   _fmt(r.tau), _fmt(r.zeta), _fmt(r.lb),
                                   _fmt(r.batch_loss), _fmt(r.full_loss),
                                   _fmt(r.dist)]) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


def parse_csv(path: str) -> List[TraceRow]:
    rows = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if ",".join(header) != CSV_HEADER:
                raise ValueError(f"{path}: unexpected header {header}")
            for rec in reader:
                rows.append(TraceRow(
                    k=int(rec[0]), epoch=int(rec[1]), alpha=float(rec[2]),
                    tau=float(rec[3]), zeta=float(rec[4]), lb=float(rec[5]),
                    batch_loss=float(rec[6]), full_loss=float(rec[7]),
                    dist=float(rec[8]) if rec[8] else None))
    except OSError as exc:
        raise OSError(f"cannot read trace from {path}: {exc}") from exc
    return rows


def emit_summary(summary_rows, path: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(summary_rows[0]))
            writer.writeheader()
            for row in summary_rows:
                writer.writerow(row)
    except OSError as exc:
        raise OSError(f"cannot write summary to {path}: {exc}") from exc
