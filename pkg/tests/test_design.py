import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steadygrad.design import (
    AdamHyper,
    OptimizerState,
    PoisonedStateError,
    adam_init,
    adam_step,
    loss,
    loss_gradient_factor,
    optimize,
    sigmoid,
    softplus,
    softplus_inverse,
)
from steadygrad.numerics import InvalidInputError
from steadygrad.redfield import ModelParams

DESIGN_TARGET = 0.04995847


def test_softplus_values():
    assert softplus(0.0) == pytest.approx(math.log(2.0), rel=1e-15)
    assert softplus(-40.0) > 0.0
    assert softplus(800.0) == 800.0


@settings(max_examples=200)
@given(x=st.floats(-20.0, 20.0))
def test_softplus_round_trip(x):
    assert softplus_inverse(softplus(x)) == pytest.approx(x, abs=1e-12)


def test_softplus_inverse_domain():
    for y in (0.0, -1.0):
        with pytest.raises(InvalidInputError):
            softplus_inverse(y)
    assert softplus_inverse(100.0) == pytest.approx(100.0, abs=1e-12)


@settings(max_examples=100)
@given(x=st.floats(-30.0, 30.0))
def test_sigmoid_is_softplus_derivative(x):
    h = 1e-6
    assert sigmoid(x) == pytest.approx((softplus(x + h) - softplus(x - h)) / (2 * h), abs=1e-8)


def test_loss_examples():
    assert loss(0.5, 0.5) == 0.0
    assert loss(0.06, DESIGN_TARGET) == pytest.approx(0.01004153, abs=1e-15)
    assert loss_gradient_factor(0.5, 0.5) == 0.0
    assert loss_gradient_factor(0.6, 0.5) == 1.0 and loss_gradient_factor(0.4, 0.5) == -1.0


@given(a=st.floats(-1e6, 1e6), b=st.floats(-1e6, 1e6))
def test_loss_nonnegative(a, b):
    assert loss(a, b) >= 0.0


def test_adam_zero_gradient():
    s = adam_step(adam_init([0.3, -1.0]), [0.0, 0.0])
    assert s.step == 1
    np.testing.assert_array_equal(s.raw_params, [0.3, -1.0])


@given(g=st.floats(1e-6, 1e3) | st.floats(-1e3, -1e-6))
def test_adam_first_step_is_lr_sign(g):
    s = adam_step(adam_init([0.0]), [g])
    # m_hat = g, sqrt(v_hat) = |g|: the step is lr * sign(g) up to eps_hat
    assert s.raw_params[0] == pytest.approx(-0.1 * g / (abs(g) + 1e-8), rel=1e-12)


def test_adam_deterministic():
    a = adam_step(adam_init([0.1, 0.2]), [0.5, -0.25])
    b = adam_step(adam_init([0.1, 0.2]), [0.5, -0.25])
    np.testing.assert_array_equal(a.raw_params, b.raw_params)
    np.testing.assert_array_equal(a.v_hat, b.v_hat)


def test_adam_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        adam_step(adam_init([0.0]), [1.0, 2.0])
    with pytest.raises(FloatingPointError):
        adam_step(adam_init([0.0]), [math.nan])
    with pytest.raises(InvalidInputError):
        OptimizerState(0, np.zeros(2), np.zeros(2), -np.ones(2), AdamHyper())


def test_optimize_record_shape_and_invariants():
    recs = optimize(ModelParams(), -0.03, iters=15, seed=3)
    assert [r.iteration for r in recs] == list(range(16))
    best = [r.best_loss for r in recs]
    assert all(b2 <= b1 for b1, b2 in zip(best, best[1:]))
    assert all(r.params_physical["epsilon"] > 0 and r.params_physical["delta"] > 0 for r in recs)
    assert all(r.loss >= 0 for r in recs)


def test_optimize_iters_zero():
    assert len(optimize(ModelParams(), 0.0, iters=0, seed=1)) == 1


def test_optimize_lr_zero_keeps_parameters():
    recs = optimize(ModelParams(), -0.03, iters=5, seed=2, lr=0.0)
    assert len({tuple(r.params_physical.values()) for r in recs}) == 1


def test_optimize_already_optimal():
    start = optimize(ModelParams(), 0.0, iters=0, seed=4)[0]
    recs = optimize(ModelParams(), start.observable, iters=10, seed=4)
    assert recs[0].loss == 0.0
    assert recs[-1].params_physical == start.params_physical


def test_optimize_seeded_initialisation():
    a = optimize(ModelParams(), -0.03, iters=3, seed=9)
    b = optimize(ModelParams(), -0.03, iters=3, seed=9)
    c = optimize(ModelParams(), -0.03, iters=3, seed=10)
    assert a == b
    assert a[0].params_physical != c[0].params_physical
    for v in a[0].params_physical.values():
        assert 0.01 <= v <= 0.5


def test_optimize_from_given_start():
    recs = optimize(ModelParams(0.2, 0.3), -0.03, iters=0, random_init=False)
    assert recs[0].params_physical == pytest.approx({"epsilon": 0.2, "delta": 0.3}, rel=1e-14)


def test_optimize_rejects_bath_parameters():
    with pytest.raises(InvalidInputError):
        optimize(ModelParams(), 0.0, free=("beta",))


def test_optimize_reaches_reachable_target():
    # target produced by the model itself at (0.3, 0.2): the thermal value -0.0083...
    from steadygrad.redfield import SIGMA_Z, build_liouvillian
    from steadygrad.steady import null_space_steady

    target = null_space_steady(build_liouvillian(ModelParams(0.3, 0.2))).expectation(SIGMA_Z)
    for seed in range(3):
        recs = optimize(ModelParams(), target, iters=100, seed=seed)
        assert recs[-1].best_loss <= 5e-5


def test_poisoned_state_keeps_records(monkeypatch):
    import steadygrad.design as design

    real = design.implicit_gradient_direct

    def poisoned(*args, **kwargs):
        rep = real(*args, **kwargs)
        for e in rep.entries:
            e.value = math.inf
        return rep

    monkeypatch.setattr(design, "implicit_gradient_direct", poisoned)
    with pytest.raises(PoisonedStateError) as info:
        optimize(ModelParams(), -0.03, iters=5, seed=0)
    assert info.value.last_record.iteration == 0
