import math

import numpy as np
import pytest

from momo.harness import (CSV_HEADER, ConfigError, DivergenceError,
                          ProblemSpec, RunConfig, TraceRow, build_problem,
                          emit_csv, emit_summary, parse_csv, run, sweep)
from momo.optimizers import OptimizerConfig


def _small_config(**kw):
    defaults = dict(problem=ProblemSpec(n=60, d=5, seed=0),
                    optimizer="momo", opt=OptimizerConfig(alpha=1.0),
                    iterations=50, batch_size=10, trace_interval=5, seed=0)
    defaults.update(kw)
    return RunConfig(**defaults)


def test_run_produces_trace():
    result = run(_small_config())
    assert len(result.rows) == 10
    assert result.rows[-1].k == 50
    assert result.final_full_loss == result.rows[-1].full_loss
    assert result.min_full_loss <= result.final_full_loss
    assert all(r.dist is not None for r in result.rows)


def test_run_epoch_counter():
    result = run(_small_config(iterations=13, trace_interval=1))
    # 60 samples / batch 10 = 6 steps per epoch
    assert [r.epoch for r in result.rows][:13] == [0] * 6 + [1] * 6 + [2]


def test_run_validates_config():
    with pytest.raises(ConfigError):
        run(_small_config(iterations=0))
    with pytest.raises(ConfigError):
        run(_small_config(batch_size=0))
    with pytest.raises(ConfigError):
        run(_small_config(trace_interval=0))
    with pytest.raises(ConfigError):
        build_problem(ProblemSpec(name="svm"))


def test_run_divergence_carries_iteration():
    cfg = _small_config(optimizer="sgdm", opt=OptimizerConfig(alpha=1e6),
                        iterations=200)
    with pytest.raises(DivergenceError) as err:
        run(cfg)
    assert err.value.k >= 1


def test_replay_bitwise_identical_csv(tmp_path):
    cfg = _small_config(iterations=40)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(run(cfg).rows, str(p1))
    emit_csv(run(cfg).rows, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_csv_header_and_roundtrip(tmp_path):
    rows = [TraceRow(k=1, epoch=0, alpha=0.1, tau=0.05, zeta=math.inf,
                     lb=-10.0, batch_loss=1.2345678901234567,
                     full_loss=2.5, dist=None),
            TraceRow(k=2, epoch=0, alpha=0.1, tau=0.04, zeta=1.75,
                     lb=float("nan"), batch_loss=0.5, full_loss=0.25,
                     dist=3.5)]
    path = tmp_path / "t.csv"
    emit_csv(rows, str(path))
    text = path.read_text().splitlines()
    assert text[0] == CSV_HEADER
    assert ",inf," in text[1]  # zeta sentinel literal
    assert text[1].endswith(",")  # unknown dist is empty
    back = parse_csv(str(path))
    assert back[0].zeta == math.inf
    assert back[0].dist is None
    assert back[0].batch_loss == rows[0].batch_loss  # round-trip exact
    assert math.isnan(back[1].lb)
    assert back[1].dist == 3.5


def test_parse_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        parse_csv(str(path))


def test_emit_csv_io_error():
    with pytest.raises(OSError):
        emit_csv([], "/nonexistent-dir/trace.csv")


def test_sweep_isolates_divergence():
    cfg = _small_config(optimizer="sgdm", iterations=150)
    summary, detail, results = sweep(cfg, [1e-2, 1e6], [0, 1])
    assert len(summary) == 2
    assert len(detail) == 4
    good = next(r for r in summary if r["alpha"] == 1e-2)
    bad = next(r for r in summary if r["alpha"] == 1e6)
    assert good["n_diverged"] == 0
    assert math.isfinite(good["mean_final_loss"])
    assert bad["n_diverged"] == 2
    assert math.isinf(bad["mean_final_loss"])
    assert results[(1e6, 0)] is None
    assert results[(1e-2, 0)] is not None


def test_sweep_rebases_schedule():
    from momo.schedules import ExponentialSchedule
    cfg = _small_config(opt=OptimizerConfig(
        alpha=ExponentialSchedule(1.0, 0.9)), iterations=5,
        trace_interval=1)
    _, _, results = sweep(cfg, [0.5], [0])
    rows = results[(0.5, 0)].rows
    assert rows[0].alpha == pytest.approx(0.5)
    assert rows[1].alpha == pytest.approx(0.45)


def test_sweep_requires_grid():
    with pytest.raises(ConfigError):
        sweep(_small_config(), [], [0])


def test_emit_summary(tmp_path):
    rows = [{"alpha": 0.1, "mean_final_loss": 0.5, "std_final_loss": 0.1,
             "n_seeds": 3, "n_diverged": 0}]
    path = tmp_path / "s.csv"
    emit_summary(rows, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "alpha,mean_final_loss,std_final_loss,n_seeds,n_diverged"
    assert len(lines) == 2


def test_build_problem_variants():
    ls = build_problem(ProblemSpec(name="least-squares", n=30, d=4))
    assert ls.dim == 4
    lr = build_problem(ProblemSpec(name="logreg", n=30, d=4))
    assert lr.dim == 4
    mlp = build_problem(ProblemSpec(name="mlp", n=30, d=4))
    assert mlp.n_samples == 30


def test_run_with_mlp_and_adam():
    cfg = RunConfig(problem=ProblemSpec(name="mlp", n=40, d=4,
                                        layers=[4, 6, 3]),
                    optimizer="momo-adam", opt=OptimizerConfig(alpha=1e-2),
                    iterations=30, batch_size=10, trace_interval=10, seed=0)
    result = run(cfg)
    assert math.isfinite(result.final_full_loss)
    assert result.rows[-1].dist is None  # no known optimum
