"""Command-line interface.

Verbs:
  run       one training run, trace CSV plus summary
  sweep     learning-rate grid over seeds, summary CSV
  verify    execute the oracle certification suites
  repro-e4  one-command online lower-bound demonstration

Exit codes: 0 success, 1 validation failure, 2 divergence during `run`,
3 I/O error.

Config files are line-oriented ``key = value`` text with ``[section]``
headers; sections are `problem`, `optimizer`, and `run`. Command-line flags
override file values. Example:

    [problem]
    name = least-squares
    n = 200
    d = 10

    [optimizer]
    name = momo
    alpha = 1.0
    lb_mode = fixed

    [run]
    iterations = 1000
    batch_size = 20
    seed = 0
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
from dataclasses import replace
from typing import List, Optional

import numpy as np

from .harness import (ConfigError, DivergenceError, ProblemSpec, RunConfig,
                      emit_csv, emit_summary, run, sweep)
from .lowerbound import LowerBoundMode
from .optimizers import OPTIMIZER_NAMES, OptimizerConfig
from .schedules import make_schedule

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DIVERGENCE = 2
EXIT_IO = 3

_SCHEDULES = ("const", "exp", "warmup-cosine", "warmup-invsqrt")
_PROBLEMS = ("least-squares", "logreg", "mlp")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags override")
    p.add_argument("--problem", choices=_PROBLEMS)
    p.add_argument("--n", type=int, help="number of samples")
    p.add_argument("--d", type=int, help="problem dimension")
    p.add_argument("--problem-seed", type=int)
    p.add_argument("--optimizer", choices=OPTIMIZER_NAMES)
    p.add_argument("--alpha", type=float, help="base learning rate")
    p.add_argument("--beta", type=float, help="momentum parameter")
    p.add_argument("--beta2", type=float, help="second-moment parameter")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--lb-mode", choices=[m.value for m in LowerBoundMode])
    p.add_argument("--lb-init", type=float)
    p.add_argument("--schedule", choices=_SCHEDULES)
    p.add_argument("--warmup-steps", type=int)
    p.add_argument("--total-steps", type=int)
    p.add_argument("--decay-rate", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--trace-interval", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (trace or summary CSV)")
    p.add_argument("--plot", action="store_true",
                   help="render figures next to the CSV output")


def _load_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"bad config {path}: {exc}") from exc
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            flat[f"{section}.{key}"] = value
    return flat


def _pick(args_value, file_cfg: dict, key: str, cast, default):
    """Flag wins, then config file, then the built-in default."""
    if args_value is not None:
        return args_value
    if key in file_cfg:
        return cast(file_cfg[key])
    return default


def _build_run_config(args) -> RunConfig:
    file_cfg = _load_config_file(args.config) if args.config else {}

    problem = ProblemSpec(
        name=_pick(args.problem, file_cfg, "problem.name", str, "least-squares"),
        n=_pick(args.n, file_cfg, "problem.n", int, 200),
        d=_pick(args.d, file_cfg, "problem.d", int, 10),
        seed=_pick(args.problem_seed, file_cfg, "problem.seed", int, 0),
    )
    optimizer = _pick(args.optimizer, file_cfg, "optimizer.name", str, "momo")
    if optimizer not in OPTIMIZER_NAMES:
        raise ConfigError(f"unknown optimizer: {optimizer!r}")

    adam_like = optimizer in ("momo-adam", "momo-adam-star", "adamw")
    alpha0 = _pick(args.alpha, file_cfg, "optimizer.alpha", float,
                   1e-2 if adam_like else 1.0)
    sched_name = _pick(args.schedule, file_cfg, "optimizer.schedule", str,
                       "const")
    if sched_name not in _SCHEDULES:
        raise ConfigError(f"unknown schedule: {sched_name!r}")
    iterations = _pick(args.iterations, file_cfg, "run.iterations", int, 1000)
    schedule = make_schedule(
        sched_name, alpha0,
        warmup_steps=_pick(args.warmup_steps, file_cfg,
                           "optimizer.warmup_steps", int, 0),
        total_steps=_pick(args.total_steps, file_cfg,
                          "optimizer.total_steps", int, iterations),
        decay_rate=_pick(args.decay_rate, file_cfg,
                         "optimizer.decay_rate", float, 0.999))

    lb_mode = _pick(args.lb_mode, file_cfg, "optimizer.lb_mode", str, "fixed")
    opt = OptimizerConfig(
        alpha=schedule,
        beta1=_pick(args.beta, file_cfg, "optimizer.beta", float, 0.9),
        beta2=_pick(args.beta2, file_cfg, "optimizer.beta2", float, 0.999),
        epsilon=_pick(args.epsilon, file_cfg, "optimizer.epsilon", float, 1e-8),
        weight_decay=_pick(args.weight_decay, file_cfg,
                           "optimizer.weight_decay", float, 0.0),
        lb_mode=LowerBoundMode(lb_mode),
        lb_init=_pick(args.lb_init, file_cfg, "optimizer.lb_init", float, 0.0),
    )
    return RunConfig(
        problem=problem,
        optimizer=optimizer,
        opt=opt,
        iterations=iterations,
        batch_size=_pick(args.batch_size, file_cfg, "run.batch_size", int, 20),
        trace_interval=_pick(args.trace_interval, file_cfg,
                             "run.trace_interval", int, 1),
        seed=_pick(args.seed, file_cfg, "run.seed", int, 0),
    )


def _figure_path(out: str, suffix: str) -> str:
    base, _ = os.path.splitext(out)
    return f"{base}_{suffix}.png"


def cmd_run(args) -> int:
    config = _build_run_config(args)
    result = run(config)
    out = args.out or "trace.csv"
    emit_csv(result.rows, out)
    if args.plot:
        from .report import render_trace_figure
        render_trace_figure(result.rows, _figure_path(out, "trace"),
                            title=f"{config.optimizer} on {config.problem.name}")
    print(f"wrote {out}")
    print(f"final_full_loss={result.final_full_loss!r}")
    print(f"min_full_loss={result.min_full_loss!r}")
    print(f"final_lb={result.final_lb!r}")
    return EXIT_OK


def _parse_float_list(text: str, what: str) -> List[float]:
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad {what}: {exc}") from exc
    if not values:
        raise ConfigError(f"empty {what}")
    return values


def cmd_sweep(args) -> int:
    config = _build_run_config(args)
    alphas = _parse_float_list(args.alphas, "--alphas")
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if not seeds:
        raise ConfigError("empty --seeds")
    summary, detail, _ = sweep(config, alphas, seeds, jobs=args.jobs)
    out = args.out or "sweep.csv"
    emit_summary(summary, out)
    detail_out = os.path.splitext(out)[0] + "_runs.csv"
    emit_summary(detail, detail_out)
    if args.plot:
        from .report import render_sweep_figure
        render_sweep_figure(summary, _figure_path(out, "sweep"),
                            title=f"{config.optimizer} on {config.problem.name}")
    print(f"wrote {out} and {detail_out}")
    for row in summary:
        print(f"alpha={row['alpha']:g} mean_final_loss="
              f"{row['mean_final_loss']:.6g} diverged={row['n_diverged']}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .certify import run_all
    results = run_all(fast=args.fast)
    failed = False
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} {res.name}: {res.detail}")
        failed = failed or not res.passed
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_repro_e4(args) -> int:
    """Best-grid-alpha runs of the online lower-bound methods on the
    synthetic least-squares problem, starting from a pessimistic bound."""
    out_dir = args.out or "."
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc}") from exc
    grid = [10.0**e for e in range(-3, 4)]
    iterations = args.iterations or 5000
    base = RunConfig(problem=ProblemSpec(name="least-squares", n=200, d=10,
                                         seed=0),
                     iterations=iterations, batch_size=20, trace_interval=10,
                     seed=0)
    ok = True
    for name in ("momo-star", "momo-adam-star"):
        config = replace(base, optimizer=name,
                         opt=OptimizerConfig(alpha=1.0, lb_init=-10.0,
                                             lb_mode=LowerBoundMode.ONLINE))
        best = None
        for alpha in grid:
            cfg = replace(config, opt=replace(config.opt, alpha=alpha))
            try:
                result = run(cfg)
            except DivergenceError:
                continue
            if best is None or result.final_full_loss < best[1].final_full_loss:
                best = (alpha, result)
        if best is None:
            print(f"{name}: all grid points diverged")
            ok = False
            continue
        alpha, result = best
        trace_path = os.path.join(out_dir, f"repro_e4_{name}.csv")
        emit_csv(result.rows, trace_path)
        if args.plot:
            from .report import render_lb_figure
            render_lb_figure(result.rows,
                             os.path.join(out_dir, f"repro_e4_{name}.png"),
                             f_star=0.0, title=f"{name}, alpha={alpha:g}")
        print(f"{name}: best alpha={alpha:g} final_loss="
              f"{result.final_full_loss:.3e} final_lb={result.final_lb:.3e}")
        if not (abs(result.final_lb) < 0.1 and result.final_full_loss < 1e-4):
            ok = False
    return EXIT_OK if ok else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momo", description="model-based momentum optimizers")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="one training run")
    _add_common_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="learning-rate sweep")
    _add_common_flags(p_sweep)
    p_sweep.add_argument("--alphas", required=True,
                         help="comma-separated learning-rate grid")
    p_sweep.add_argument("--seeds", default="0",
                         help="comma-separated seed list")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="oracle certification suites")
    p_verify.add_argument("--fast", action="store_true",
                          help="fewer random instances")
    p_verify.set_defaults(func=cmd_verify)

    p_repro = sub.add_parser("repro-e4",
                             help="online lower-bound demonstration")
    p_repro.add_argument("--out", help="output directory")
    p_repro.add_argument("--iterations", type=int)
    p_repro.add_argument("--plot", action="store_true")
    p_repro.set_defaults(func=cmd_repro_e4)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
