import math

import numpy as np
import pytest

from momo.lowerbound import LowerBoundMode
from momo.optimizers import (OPTIMIZER_NAMES, AdamW, Momo, MomoAdam,
                             MomoAdamStar, MomoBias, MomoStar,
                             OptimizerConfig, SgdM, StepInput, build_stepper,
                             default_config)
from momo.problems import BatchSampler, make_least_squares, sample_batch


def _stream(seed, dim, n_steps, scale=1.0):
    rng = np.random.Generator(np.random.Philox(key=[seed, 0]))
    out = []
    for _ in range(n_steps):
        out.append((float(abs(rng.normal()) + 0.2) * scale,
                    rng.normal(size=dim) * scale))
    return out


def _drive(stepper, stream, x0):
    """Feed the stepper its own iterates; return taus and final x."""
    x = x0.copy()
    recs = []
    for loss, grad in stream:
        x, rec = stepper.step(StepInput(x=x, loss=loss, grad=grad))
        recs.append(rec)
    return x, recs


def test_momo_beta_zero_is_capped_polyak():
    rng = np.random.Generator(np.random.Philox(key=[1, 0]))
    st = Momo(OptimizerConfig(alpha=0.7, beta1=0.0, lb_init=0.0))
    x = rng.normal(size=4)
    for _ in range(5):
        loss = float(abs(rng.normal()) + 0.1)
        g = rng.normal(size=4)
        x_new, rec = st.step(StepInput(x=x, loss=loss, grad=g))
        tau_ref = min(0.7, max(loss - 0.0, 0.0) / float(np.dot(g, g)))
        assert rec.tau == tau_ref
        assert np.array_equal(x_new, x - tau_ref * g)
        x = x_new


def test_momo_first_step_is_polyak_for_any_beta():
    # warm init from the first sample makes h_1 the sampled loss exactly
    for beta in (0.0, 0.5, 0.9):
        st = Momo(OptimizerConfig(alpha=1.0, beta1=beta, lb_init=0.0))
        x = np.array([3.0, -1.0])
        g = np.array([2.0, 1.0])
        x_new, rec = st.step(StepInput(x=x, loss=4.0, grad=g))
        tau_ref = min(1.0, 4.0 / 5.0)
        assert rec.tau == pytest.approx(tau_ref)
        assert np.allclose(x_new, x - tau_ref * g)


def test_momo_quadratic_hand_values():
    # f(x) = x^2/2, x1 = 4: h = 8, grad = 4, tau = 0.5, next iterate 2
    st = Momo(OptimizerConfig(alpha=10.0, beta1=0.0, lb_init=0.0))
    x_new, rec = st.step(StepInput(x=np.array([4.0]), loss=8.0,
                                   grad=np.array([4.0])))
    assert rec.tau == pytest.approx(0.5)
    assert x_new[0] == pytest.approx(2.0)


def test_momo_bias_cap_at_k1():
    # rho_1 = 0.1 for beta = 0.9, so the cap is 10 alpha
    st = MomoBias(OptimizerConfig(alpha=0.5, beta1=0.9, lb_init=-1e12))
    g = np.array([1e-3])
    x_new, rec = st.step(StepInput(x=np.array([0.0]), loss=1.0, grad=g))
    assert rec.tau == pytest.approx(5.0)


def test_momo_bias_beta_zero_equals_momo():
    stream = _stream(2, 3, 20)
    x0 = np.array([1.0, -2.0, 0.5])
    plain, recs_p = _drive(Momo(OptimizerConfig(alpha=0.8, beta1=0.0)),
                           stream, x0)
    bias, recs_b = _drive(MomoBias(OptimizerConfig(alpha=0.8, beta1=0.0)),
                          stream, x0)
    assert np.allclose(plain, bias, rtol=1e-12, atol=1e-14)
    for rp, rb in zip(recs_p, recs_b):
        assert rb.tau == pytest.approx(rp.tau, rel=1e-12, abs=1e-15)


def test_momo_adam_first_diagonal():
    st = MomoAdam(OptimizerConfig(alpha=0.1))
    g = np.full(3, 2.0)
    st.step(StepInput(x=np.zeros(3), loss=1.0, grad=g))
    D = st.precond.diagonal(1e-8, 0.999)
    assert np.allclose(D, 1e-8 + 2.0)


def test_momo_adam_rho_is_biased():
    st = MomoAdam(OptimizerConfig(alpha=0.1, beta1=0.9))
    st.step(StepInput(x=np.zeros(2), loss=1.0, grad=np.ones(2)))
    assert st.state.rho == pytest.approx(0.1)
    st.step(StepInput(x=np.zeros(2), loss=1.0, grad=np.ones(2)))
    assert st.state.rho == pytest.approx(1.0 - 0.81)


def test_decay_style_taylor_close_to_exact():
    # the decay factors 1/(1+e) and 1-e with e = alpha*lam = 1e-6 differ by
    # O(e^2); isolate them with a zero model step (lb above the model value)
    x0 = np.ones(4) / 2.0
    g = np.array([0.3, -0.2, 0.1, 0.4])
    outs = {}
    for style in ("exact", "taylor"):
        st = Momo(OptimizerConfig(alpha=1.0, weight_decay=1e-6,
                                  decay_style=style, lb_init=1e6))
        x_new, rec = st.step(StepInput(x=x0, loss=1.0, grad=g))
        assert rec.tau == 0.0
        outs[style] = x_new
    diff = np.max(np.abs(outs["exact"] - outs["taylor"]))
    assert 0.0 < diff <= 1e-10


def test_decay_style_taylor_first_order_with_step():
    # with a nonzero step the styles differ by alpha*lam times the step term
    x0 = np.ones(4) / 2.0
    g = np.array([0.3, -0.2, 0.1, 0.4])
    outs = {}
    taus = {}
    for style in ("exact", "taylor"):
        st = Momo(OptimizerConfig(alpha=1.0, weight_decay=1e-6,
                                  decay_style=style))
        x_new, rec = st.step(StepInput(x=x0, loss=1.0, grad=g))
        outs[style] = x_new
        taus[style] = rec.tau
    assert taus["exact"] == taus["taylor"]
    diff = np.max(np.abs(outs["exact"] - outs["taylor"]))
    step_term = taus["exact"] * np.max(np.abs(g))
    assert diff <= 2e-6 * max(step_term, np.max(np.abs(x0)))


def test_adamw_first_step_constant_gradient():
    alpha, lam, eps = 0.1, 0.01, 1e-8
    st = AdamW(OptimizerConfig(alpha=alpha, weight_decay=lam, epsilon=eps))
    x = np.array([1.0, -2.0])
    g = np.full(2, 3.0)
    x_new, rec = st.step(StepInput(x=x, loss=1.0, grad=g))
    expected = (1 - alpha * lam) * x - alpha * 3.0 / (eps + 3.0)
    assert np.allclose(x_new, expected, rtol=1e-12)


def test_adamw_no_averaging_is_normalized_step():
    st = AdamW(OptimizerConfig(alpha=0.2, beta1=0.0, beta2=0.0, epsilon=1e-8))
    x = np.array([1.0, -1.0, 4.0])
    g = np.array([0.5, -2.0, 0.0])
    x_new, _ = st.step(StepInput(x=x, loss=1.0, grad=g))
    expected = x - 0.2 * g / (1e-8 + np.abs(g))
    assert np.allclose(x_new, expected, rtol=1e-12)


def test_sgdm_beta_zero_plain_sgd():
    st = SgdM(OptimizerConfig(alpha=0.3, beta1=0.0))
    x = np.array([1.0, 2.0])
    g = np.array([0.5, -1.0])
    x_new, _ = st.step(StepInput(x=x, loss=1.0, grad=g))
    assert np.allclose(x_new, x - 0.3 * g)


def test_sgdm_shares_direction_with_momo():
    stream = _stream(4, 3, 30)
    momo = Momo(OptimizerConfig(alpha=0.5, beta1=0.9))
    sgdm = SgdM(OptimizerConfig(alpha=0.5, beta1=0.9))
    x = np.zeros(3)
    for loss, grad in stream:
        momo.step(StepInput(x=x, loss=loss, grad=grad))
        sgdm.step(StepInput(x=x, loss=loss, grad=grad))
        assert np.array_equal(momo.state.d, sgdm.state.d)


def test_sgdm_constant_gradient_fixed_point():
    st = SgdM(OptimizerConfig(alpha=0.1, beta1=0.9))
    g = np.array([1.0, -2.0])
    x = np.zeros(2)
    for _ in range(400):
        x, _ = st.step(StepInput(x=x, loss=1.0, grad=g))
    assert np.allclose(st.state.d, g, rtol=1e-15)


def test_cap_dominance():
    stream = _stream(6, 4, 50)
    for name in ("momo", "momo-bias", "momo-adam"):
        st = build_stepper(name, OptimizerConfig(alpha=0.3))
        x = np.zeros(4)
        for loss, grad in stream:
            x, rec = st.step(StepInput(x=x, loss=loss, grad=grad))
            assert rec.tau <= 0.3 / st.state.rho + 1e-15


def test_small_alpha_equivalence():
    problem = make_least_squares(200, 10, seed=0)
    sampler = BatchSampler(200, 20, seed=0)
    pairs = [(Momo, SgdM, OptimizerConfig(alpha=1e-6)),
             (MomoAdam, AdamW, OptimizerConfig(alpha=1e-6))]
    for cls_a, cls_b, cfg in pairs:
        a, b = cls_a(cfg), cls_b(cfg)
        xa = problem.initial_point()
        xb = problem.initial_point()
        for k in range(1, 101):
            idx = sample_batch(sampler, k)
            xa, _ = a.step(StepInput(x=xa, loss=problem.loss(xa, idx),
                                     grad=problem.grad(xa, idx)))
            xb, _ = b.step(StepInput(x=xb, loss=problem.loss(xb, idx),
                                     grad=problem.grad(xb, idx)))
        scale = max(float(np.max(np.abs(xb))), 1e-30)
        assert float(np.max(np.abs(xa - xb))) / scale <= 1e-12


def test_momo_adam_cap_active_matches_adamw():
    # a hopeless lower bound keeps the adaptive term above the cap
    stream = _stream(8, 5, 50, scale=0.5)
    adam = MomoAdam(OptimizerConfig(alpha=1e-3, lb_init=-1e12))
    adamw = AdamW(OptimizerConfig(alpha=1e-3))
    xa = np.ones(5)
    xb = np.ones(5)
    for loss, grad in stream:
        xa, _ = adam.step(StepInput(x=xa, loss=loss, grad=grad))
        xb, _ = adamw.step(StepInput(x=xb, loss=loss, grad=grad))
    assert np.allclose(xa, xb, rtol=1e-12, atol=1e-14)


def test_momo_star_matches_momo_while_floor_binds():
    # deterministic quadratic with the exact optimum as floor: the estimate
    # never rises above the floor, so iterates match fixed-lb MoMo
    star = MomoStar(OptimizerConfig(alpha=1.0, beta1=0.9, lb_init=0.0))
    fixed = Momo(OptimizerConfig(alpha=1.0, beta1=0.9, lb_init=0.0))
    xs = np.array([4.0])
    xf = np.array([4.0])
    for _ in range(30):
        fs, gs = 0.5 * xs[0] ** 2, np.array([xs[0]])
        ff, gf = 0.5 * xf[0] ** 2, np.array([xf[0]])
        xs, rec_s = star.step(StepInput(x=xs, loss=fs, grad=gs))
        xf, rec_f = fixed.step(StepInput(x=xf, loss=ff, grad=gf))
        if star.lb_state.lb == 0.0:
            assert np.array_equal(xs, xf)


def test_momo_star_forces_online_mode():
    st = MomoStar(OptimizerConfig(alpha=1.0, lb_mode=LowerBoundMode.FIXED))
    assert st.lb_state.mode is LowerBoundMode.ONLINE
    st = MomoAdamStar(OptimizerConfig(alpha=1.0))
    assert st.lb_state.mode is LowerBoundMode.ONLINE


def test_online_max_mode_runs():
    st = Momo(OptimizerConfig(alpha=1.0, lb_init=-5.0,
                              lb_mode=LowerBoundMode.ONLINE_MAX))
    x = np.array([4.0])
    for _ in range(50):
        x, rec = st.step(StepInput(x=x, loss=0.5 * x[0] ** 2,
                                   grad=np.array([x[0]])))
        assert rec.lb_next is None or rec.lb_next >= -5.0
    assert st.lb_state.lb > -5.0


def test_trace_completeness():
    stream = _stream(10, 3, 10)
    st = Momo(OptimizerConfig(alpha=1.0))
    x = np.zeros(3)
    for i, (loss, grad) in enumerate(stream, start=1):
        x, rec = st.step(StepInput(x=x, loss=loss, grad=grad))
        assert rec.k == i
        assert rec.loss == loss
        assert rec.alpha == 1.0
        assert math.isfinite(rec.tau)
        assert rec.zeta >= 0.0
        assert math.isfinite(rec.lb)


def test_build_stepper_and_defaults():
    assert set(OPTIMIZER_NAMES) == {"momo", "momo-bias", "momo-adam",
                                    "momo-star", "momo-adam-star", "sgdm",
                                    "adamw"}
    for name in OPTIMIZER_NAMES:
        st = build_stepper(name)
        expected = 1e-2 if name in ("momo-adam", "momo-adam-star",
                                    "adamw") else 1.0
        assert st.config.schedule()(1) == expected
    with pytest.raises(ValueError):
        build_stepper("newton")
    assert default_config("momo").beta1 == 0.9


def test_schedule_drives_alpha():
    from momo.schedules import ExponentialSchedule
    st = Momo(OptimizerConfig(alpha=ExponentialSchedule(1.0, 0.5)))
    x = np.array([100.0])
    seen = []
    for _ in range(3):
        x, rec = st.step(StepInput(x=x, loss=1e-9, grad=np.array([1e-5])))
        seen.append(rec.alpha)
    assert seen == [1.0, 0.5, 0.25]
