import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from inhomvol.losses import KINDS, LossSpec, loss_eval

RISKY = [k for k in KINDS if k != "none"]


def test_monotone_example_and_branch_continuity():
    spec = LossSpec("monotone", 0.5)
    assert loss_eval(spec, 1.0) == 0.5
    thr = 1.0 / (2 * 0.5)
    assert 0.5 * thr ** 2 == thr - 1.0 / (4 * 0.5)


def test_exponential_example():
    assert loss_eval(LossSpec("exponential", 1.0), 1.0) == pytest.approx(math.exp(-1), rel=1e-15)


def test_quadratic_example():
    assert loss_eval(LossSpec("quadratic", 2.0), 3.0) == 18.0


def test_absolute_example():
    assert loss_eval(LossSpec("absolute", 0.5), -4.0) == 2.0


@pytest.mark.parametrize("kind", RISKY)
def test_non_positive_beta_rejected(kind):
    with pytest.raises(ValueError):
        LossSpec(kind, 0.0)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        LossSpec("cubic", 1.0)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_input_rejected(bad):
    with pytest.raises(ValueError):
        loss_eval(LossSpec("quadratic", 1.0), bad)


@pytest.mark.parametrize("kind", RISKY)
@given(beta=st.floats(0.01, 5.0))
def test_zero_at_origin(kind, beta):
    assert loss_eval(LossSpec(kind, beta), 0.0) == 0.0


@pytest.mark.parametrize("kind", RISKY)
@given(beta=st.floats(0.01, 3.0), x=st.floats(-10, 10), y=st.floats(-10, 10), lam=st.floats(0, 1))
def test_nonnegative_and_convex(kind, beta, x, y, lam):
    spec = LossSpec(kind, beta)
    fx, fy = loss_eval(spec, x), loss_eval(spec, y)
    fm = loss_eval(spec, lam * x + (1 - lam) * y)
    assert fx >= 0 and fy >= 0
    assert fm <= lam * fx + (1 - lam) * fy + 1e-9 * (1 + abs(fx) + abs(fy))


@pytest.mark.parametrize("kind", RISKY)
@pytest.mark.parametrize("beta", [0.1, 1.0, 2.5])
def test_derivative_matches_central_differences(kind, beta):
    x = np.linspace(-10, 10, 1001)
    h = 1e-5
    kinks = {"absolute": 0.0, "monotone": 1 / (2 * beta)}
    if kind in kinks:
        x = x[np.abs(x - kinks[kind]) > 2 * h]
    spec = LossSpec(kind, beta)
    fd = (spec.evaluate(x + h) - spec.evaluate(x - h)) / (2 * h)
    d = spec.derivative(x)
    assert np.all(np.abs(fd - d) <= 1e-6 * np.maximum(1.0, np.abs(d)))


def test_monotone_differentiable_at_threshold_and_below_quadratic():
    beta = 0.8
    mono, quad = LossSpec("monotone", beta), LossSpec("quadratic", beta)
    thr = 1 / (2 * beta)
    left = mono.derivative(np.array([thr - 1e-12]))[0]
    right = mono.derivative(np.array([thr + 1e-12]))[0]
    assert left == pytest.approx(right, abs=1e-9)
    x = np.linspace(-20, 20, 4001)
    assert np.all(mono.evaluate(x) <= quad.evaluate(x))
    # affine beyond the threshold
    assert np.allclose(np.diff(mono.evaluate(x[x > thr + 0.1]), 2), 0.0, atol=1e-9)


def test_exponential_large_negative_argument_is_finite_or_inf_without_warning():
    spec = LossSpec("exponential", 1.0)
    with np.errstate(all="raise"):
        v = spec.evaluate(np.array([-50.0, 50.0]))
    assert np.isfinite(v).all()


def test_closed_form_rules():
    assert LossSpec("quadratic", 1).closed_form_target == "mean"
    assert LossSpec("absolute", 1).closed_form_target == "median"
    assert LossSpec("monotone", 1).closed_form_target is None
    assert LossSpec("exponential", 1).closed_form_target is None
