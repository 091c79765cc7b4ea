import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from odorkit.numcore import (GradCheckReport, NonFiniteFunctionValue, ShapeMismatch,
                             grad_check, hadamard, layer_norm, layer_norm_backward,
                             layer_norm_forward, matmul, sigmoid, transpose)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_sigmoid_zero():
    assert sigmoid(np.array([0.0]))[0] == 0.5


def test_sigmoid_range_and_extremes():
    z = np.array([-800.0, -30.0, 0.0, 30.0, 800.0])
    s = sigmoid(z)
    assert np.all(np.isfinite(s))
    assert np.all((s >= 0) & (s <= 1))
    assert np.all((sigmoid(np.linspace(-20, 20, 41)) > 0) & (sigmoid(np.linspace(-20, 20, 41)) < 1))


def test_hadamard_ones_is_identity():
    A = np.random.default_rng(0).normal(size=(3, 4))
    np.testing.assert_array_equal(hadamard(A, np.ones_like(A)), A)


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ShapeMismatch):
        hadamard(np.ones((2, 3)), np.ones((3, 2)))
    with pytest.raises(ShapeMismatch):
        layer_norm(np.ones((2, 3)), np.ones(2), np.zeros(3))


def test_layer_norm_constant_row_is_zero():
    out = layer_norm(np.full((2, 5), 3.7), np.ones(5), np.zeros(5))
    np.testing.assert_array_equal(out, np.zeros((2, 5)))


def test_layer_norm_moments():
    A = np.random.default_rng(1).normal(3.0, 5.0, size=(6, 9))
    out = layer_norm(A, np.ones(9), np.zeros(9))
    np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-9)
    # eps in the denominator shrinks the variance by var/(var+eps)
    var = A.var(axis=1)
    np.testing.assert_allclose(out.var(axis=1), var / (var + 1e-5), atol=1e-9)


def test_layer_norm_backward_matches_finite_differences():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(4, 7))
    g, b = rng.normal(size=7), rng.normal(size=7)
    G = rng.normal(size=(4, 7))
    _, cache = layer_norm_forward(A, g, b)
    dA, dg, db = layer_norm_backward(G, cache, g)
    assert grad_check(lambda t: float((layer_norm(t, g, b) * G).sum()), dA, A).passed()
    assert grad_check(lambda t: float((layer_norm(A, t, b) * G).sum()), dg, g).passed()
    assert grad_check(lambda t: float((layer_norm(A, g, t) * G).sum()), db, b).passed()


@given(arrays(np.float64, (3, 4), elements=finite))
def test_transpose_involution(A):
    np.testing.assert_array_equal(transpose(transpose(A)), A)


@settings(max_examples=50)
@given(st.integers(0, 10_000))
def test_matmul_associative(seed):
    rng = np.random.default_rng(seed)
    A, B, C = rng.normal(size=(3, 4)), rng.normal(size=(4, 5)), rng.normal(size=(5, 2))
    left = matmul(matmul(A, B), C)
    right = matmul(A, matmul(B, C))
    assert np.max(np.abs(left - right)) <= 1e-9 * max(1.0, np.max(np.abs(left)))


def test_grad_check_quadratic():
    theta = np.random.default_rng(3).normal(size=(4, 3))
    rep = grad_check(lambda t: float((t ** 2).sum()), 2 * theta, theta)
    assert isinstance(rep, GradCheckReport)
    assert rep.max_rel_err < 1e-7


def test_grad_check_constant_is_exact_zero():
    theta = np.ones((2, 2))
    rep = grad_check(lambda t: 4.2, np.zeros_like(theta), theta)
    assert rep.max_rel_err == 0.0


def test_grad_check_reports_worst_entry():
    theta = np.zeros((2, 3))
    wrong = np.ones((2, 3))
    wrong[1, 2] = 5.0
    rep = grad_check(lambda t: float(t.sum() - t[1, 2]), wrong, theta)
    assert rep.worst_index == (1, 2)
    assert rep.analytic == 5.0 and rep.numeric == pytest.approx(0.0, abs=1e-9)
    assert rep.max_rel_err == pytest.approx(1.0)


def test_grad_check_non_finite():
    with pytest.raises(NonFiniteFunctionValue):
        grad_check(lambda t: float("nan"), np.zeros(2), np.zeros(2))
    with pytest.raises(NonFiniteFunctionValue):
        grad_check(lambda t: float(np.inf) if t[0] > 0 else 0.0, np.zeros(1), np.zeros(1))
