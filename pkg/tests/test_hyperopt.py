"""Closed-form hyperparameter rules: worked examples, duality, reductions."""

import math

import numpy as np
import pytest

from hyperstep import (
    ObjectiveId,
    OptimizerState,
    ParamPoint,
    PerCoord,
    RegressionSample,
    optimal_beta_rmsprop,
    optimal_lr_adagrad,
    optimal_lr_gd,
    optimal_lr_momentum,
    optimal_lr_rmsprop,
    optimal_momentum_coef,
)

F1, F2, F3 = ObjectiveId.F1, ObjectiveId.F2, ObjectiveId.F3


def make_state(w, b=None, v_w=0.0, v_b=None, phi_w=0.0, phi_b=None, u_w=0.0, u_b=None):
    two = b is not None
    if two:
        v_b = 0.0 if v_b is None else v_b
        phi_b = 0.0 if phi_b is None else phi_b
        u_b = 0.0 if u_b is None else u_b
    return OptimizerState(
        params=ParamPoint(w=w, b=b),
        velocity=PerCoord(w=v_w, b=v_b),
        grad_sq_sum=PerCoord(w=phi_w, b=phi_b),
        weighted_grad_sq=PerCoord(w=u_w, b=u_b),
    )


def test_gd_learning_rate_examples():
    assert optimal_lr_gd(F1, make_state(0.3)).value == 0.5
    assert optimal_lr_gd(F2, make_state(0.3, 0.4)).value == 0.25
    fv = optimal_lr_gd(F3, make_state(0.3, 0.4), RegressionSample(x=2.0, y=0.4))
    assert fv.value == pytest.approx(0.2, rel=1e-12)
    assert fv.feasible and fv.defined


def test_momentum_learning_rate_example():
    fv = optimal_lr_momentum(F1, make_state(0.3, v_w=0.1), alpha=0.5)
    assert fv.value == pytest.approx(0.375, rel=1e-12)


def test_momentum_coefficient_examples():
    fv = optimal_momentum_coef(F1, make_state(0.3, v_w=0.1), eta=0.375)
    assert fv.value == pytest.approx(0.5, rel=1e-12)
    fv = optimal_momentum_coef(F2, make_state(0.3, 0.4, v_w=0.1, v_b=0.1), eta=0.25)
    assert fv.value == pytest.approx(0.0, abs=1e-15)


def test_momentum_rules_undefined_without_signal():
    assert not optimal_lr_momentum(F1, make_state(0.5, v_w=0.1), alpha=0.5).defined
    assert not optimal_momentum_coef(F1, make_state(0.3, v_w=0.0), eta=0.1).defined
    fv = optimal_momentum_coef(F1, make_state(0.3, v_w=0.0), eta=0.1)
    assert math.isnan(fv.value) and math.isnan(fv.raw)
    assert not fv.feasible


def test_adagrad_learning_rate_examples():
    # the accumulator argument is the post-accumulation divisor sum
    fv = optimal_lr_adagrad(F1, make_state(0.3, phi_w=0.16), epsilon=0.0)
    assert fv.value == pytest.approx(0.2, rel=1e-12)
    fv = optimal_lr_adagrad(F2, make_state(0.3, 0.4, phi_w=1.0, phi_b=1.0), epsilon=0.0)
    assert fv.value == pytest.approx(0.25, rel=1e-12)
    fv = optimal_lr_adagrad(
        F3, make_state(0.3, 0.4, phi_w=1.0, phi_b=1.0), RegressionSample(x=2.0, y=0.4), epsilon=0.0
    )
    assert fv.value == pytest.approx(0.2, rel=1e-12)


def test_rmsprop_learning_rate_examples():
    fv = optimal_lr_rmsprop(F1, make_state(0.3, u_w=0.2), beta=1.0, epsilon=0.0)
    assert fv.value == pytest.approx(math.sqrt(0.2) / 2.0, rel=1e-12)
    # beta = 0 discards the accumulator and divides by |g| = 0.4
    fv = optimal_lr_rmsprop(F1, make_state(0.3, u_w=0.2), beta=0.0, epsilon=0.0)
    assert fv.value == pytest.approx(0.2, rel=1e-12)


def test_rmsprop_beta_examples():
    fv = optimal_beta_rmsprop(F1, make_state(0.3, u_w=0.2), eta=0.21, epsilon=0.0)
    assert fv.value == pytest.approx(0.41, rel=1e-10)
    assert fv.feasible

    fv = optimal_beta_rmsprop(F1, make_state(0.3, u_w=0.2), eta=0.1, epsilon=0.0)
    assert fv.raw == pytest.approx(-3.0, rel=1e-10)
    assert fv.value == 0.0
    assert fv.defined and not fv.feasible


def test_rmsprop_beta_undefined_cases():
    # u equal to g**2 leaves the divisor independent of beta
    st = make_state(0.3, u_w=0.16)
    assert not optimal_beta_rmsprop(F1, st, eta=0.2, epsilon=0.0).defined
    # zero residual for the regression objective
    st = make_state(0.1, 0.2, u_w=0.5, u_b=0.5)
    fv = optimal_beta_rmsprop(F3, st, RegressionSample(x=0.3, y=0.23), eta=0.2, epsilon=0.0)
    assert not fv.defined


def test_clamping_keeps_raw():
    fv = optimal_lr_momentum(F1, make_state(0.3, v_w=5.0), alpha=1.0)
    # (5 - 0.2) / -0.4 is far below zero, so value clamps to 0
    assert fv.raw < 0.0 or fv.raw > 1.0
    assert fv.value in (0.0, 1.0)
    assert fv.defined and not fv.feasible


SAMPLES = {
    F1: None,
    F2: None,
    F3: RegressionSample(x=0.7, y=0.4),
}


def _random_state(rng, obj, with_velocity=False, accumulators=False):
    two = obj.arity == 2
    kw = {}
    if with_velocity:
        kw["v_w"] = float(rng.uniform(-0.5, 0.5))
        if two:
            kw["v_b"] = float(rng.uniform(-0.5, 0.5))
    if accumulators:
        kw["phi_w"] = 1.0 - float(rng.random())
        kw["u_w"] = 1.0 - float(rng.random())
        if two:
            kw["phi_b"] = 1.0 - float(rng.random())
            kw["u_b"] = 1.0 - float(rng.random())
    return make_state(
        float(rng.uniform(0, 1)),
        float(rng.uniform(0, 1)) if two else None,
        **kw,
    )


def test_momentum_duality_round_trip():
    # solving eta from alpha and then alpha from that eta returns alpha
    rng = np.random.default_rng(6)
    for obj in (F1, F2, F3):
        s = SAMPLES[obj]
        checked = 0
        for _ in range(100):
            st = _random_state(rng, obj, with_velocity=True)
            alpha = float(rng.uniform(0.0, 1.0))
            fv_eta = optimal_lr_momentum(obj, st, s, alpha=alpha)
            if not fv_eta.defined:
                continue
            fv_alpha = optimal_momentum_coef(obj, st, s, eta=fv_eta.raw)
            if not fv_alpha.defined:
                continue
            assert fv_alpha.raw == pytest.approx(alpha, abs=1e-9)
            checked += 1
        assert checked >= 50


def test_momentum_eta_reduces_to_gd_exactly_at_zero_alpha():
    rng = np.random.default_rng(7)
    for obj in (F1, F2, F3):
        s = SAMPLES[obj]
        for _ in range(100):
            st = _random_state(rng, obj, with_velocity=True)
            fv = optimal_lr_momentum(obj, st, s, alpha=0.0)
            if not fv.defined:  # zero residual draws carry no signal
                continue
            assert fv.raw == optimal_lr_gd(obj, st, s).raw


def test_adagrad_eta_reduces_to_gd_with_unit_divisors():
    # phi + epsilon = 1 per coordinate makes the scaling a no-op
    rng = np.random.default_rng(8)
    for obj in (F1, F2, F3):
        s = SAMPLES[obj]
        for _ in range(100):
            st = _random_state(rng, obj)
            st = make_state(
                st.params.w,
                st.params.b,
                phi_w=0.5,
                phi_b=0.5 if obj.arity == 2 else None,
            )
            fv = optimal_lr_adagrad(obj, st, s, epsilon=0.5)
            assert fv.raw == optimal_lr_gd(obj, st, s).raw


def test_rmsprop_eta_reduces_to_gd_with_unit_divisors():
    # beta = 1 ignores the current gradient; u + epsilon = 1 per coordinate
    rng = np.random.default_rng(9)
    for obj in (F1, F2, F3):
        s = SAMPLES[obj]
        for _ in range(100):
            st = _random_state(rng, obj)
            st = make_state(
                st.params.w,
                st.params.b,
                u_w=0.5,
                u_b=0.5 if obj.arity == 2 else None,
            )
            fv = optimal_lr_rmsprop(obj, st, s, beta=1.0, epsilon=0.5)
            assert fv.raw == optimal_lr_gd(obj, st, s).raw


def test_adagrad_eta_grows_with_accumulator():
    values = [
        optimal_lr_adagrad(F1, make_state(0.3, phi_w=phi), epsilon=1e-8).raw
        for phi in (0.1, 0.2, 0.4, 0.8)
    ]
    assert values == sorted(values)


def test_f3_requires_sample():
    with pytest.raises(ValueError):
        optimal_lr_gd(F3, make_state(0.3, 0.4))
    with pytest.raises(ValueError):
        optimal_lr_momentum(F3, make_state(0.3, 0.4), alpha=0.5)


def test_f3_learning_rate_depends_only_on_x():
    a = optimal_lr_gd(F3, make_state(0.9, 0.1), RegressionSample(x=0.5, y=0.1)).raw
    b = optimal_lr_gd(F3, make_state(0.2, 0.7), RegressionSample(x=0.5, y=0.9)).raw
    assert a == b == pytest.approx(0.8, rel=1e-12)
