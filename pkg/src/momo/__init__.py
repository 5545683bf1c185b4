"""Model-based momentum optimizers with adaptive Polyak-type step sizes,
online lower-bound estimation, and a reproducible sweep harness."""

from .harness import (CSV_HEADER, ConfigError, DivergenceError, ProblemSpec,
                      RunConfig, RunResult, TraceRow, build_problem, emit_csv,
                      emit_summary, parse_csv, run, sweep)
from .lowerbound import LowerBoundMode, LowerBoundState
from .model_core import (AveragingMode, AveragingScheme, MomentumState,
                         ProxResult, ZeroDirectionError, general_step,
                         momo_tau, truncated_prox_euclidean,
                         truncated_prox_preconditioned)
from .optimizers import (OPTIMIZER_NAMES, AdamW, Momo, MomoAdam, MomoAdamStar,
                         MomoBias, MomoStar, OptimizerConfig, SgdM, StepInput,
                         TraceRecord, build_stepper, default_config)
from .problems import (BatchSampler, Problem, SamplingMode,
                       load_least_squares, make_least_squares, make_logreg,
                       make_mlp, sample_batch, save_least_squares)
from .schedules import (ConstantSchedule, ExponentialSchedule,
                        WarmupCosineSchedule, WarmupInvSqrtSchedule,
                        make_schedule)

__version__ = "0.1.0"

__all__ = [
    "CSV_HEADER", "ConfigError", "DivergenceError", "ProblemSpec",
    "RunConfig", "RunResult", "TraceRow", "build_problem", "emit_csv",
    "emit_summary", "parse_csv", "run", "sweep",
    "LowerBoundMode", "LowerBoundState",
    "AveragingMode", "AveragingScheme", "MomentumState", "ProxResult",
    "ZeroDirectionError", "general_step", "momo_tau",
    "truncated_prox_euclidean", "truncated_prox_preconditioned",
    "OPTIMIZER_NAMES", "AdamW", "Momo", "MomoAdam", "MomoAdamStar",
    "MomoBias", "MomoStar", "OptimizerConfig", "SgdM", "StepInput",
    "TraceRecord", "build_stepper", "default_config",
    "BatchSampler", "Problem", "SamplingMode", "load_least_squares",
    "make_least_squares", "make_logreg", "make_mlp", "sample_batch",
    "save_least_squares",
    "ConstantSchedule", "ExponentialSchedule", "WarmupCosineSchedule",
    "WarmupInvSqrtSchedule", "make_schedule",
]
