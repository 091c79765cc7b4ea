import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odorkit import gradcheck
from odorkit.cil import (LossConfig, class_energy, class_weights, energy_targets, loss_basis,
                         loss_class, loss_col, loss_sample, loss_stt, similar_pairs,
                         similarity_matrix, total_loss)
from odorkit.numcore import ShapeMismatch, grad_check, sigmoid

from oracles import class_loss_loop, col_loss_loop, stt_loss_loop

CFG = LossConfig()


def random_batch(seed, N=8, M=12, F=6):
    rng = np.random.default_rng(seed)
    Y = (rng.random((N, M)) < 0.3).astype(float)
    P = rng.uniform(0.01, 0.99, (N, M))
    S = rng.normal(size=(N, F))
    S[1] = S[0] * 2 + 0.01 * rng.normal(size=F)  # guarantee a similar pair
    return P, Y, S


def test_defaults():
    assert CFG.lambdas == (0.3, 0.3, 0.5, 0.3)
    assert (CFG.c, CFG.e1, CFG.e2, CFG.tau) == (0.2, 1.0, 1.0, 0.8)
    assert (CFG.weight_min, CFG.weight_max) == (0.1, 10.0)


@pytest.mark.parametrize("kw", [dict(lambda2=-0.1), dict(tau=0.0), dict(tau=1.5),
                                dict(weight_min=5, weight_max=1), dict(weight_scope="x"),
                                dict(sim_mode="x")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        LossConfig(**kw)


def test_class_weights_examples():
    Y = np.array([[1.0]] * 5 + [[0.0]] * 5)
    assert class_weights(Y)[0] == 1.0
    Y = np.zeros((1000, 1))
    Y[0] = 1
    assert class_weights(Y)[0] == 10.0
    assert class_weights(np.ones((9, 1)))[0] == 0.1


def test_basis_examples():
    assert loss_basis([[0.5]], [[1.0]], [1.0]) == pytest.approx(math.log(2), abs=1e-12)
    Y = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert loss_basis(Y, Y, [1.0, 1.0]) < 1e-5
    P, Y, _ = random_batch(0)
    plain = -np.mean(np.sum(Y * np.log(P) + (1 - Y) * np.log(1 - P), axis=1))
    assert abs(loss_basis(P, Y, np.ones(Y.shape[1])) - plain) <= 1e-12
    with pytest.raises(ShapeMismatch):
        loss_basis(P, Y, np.ones(3))
    with pytest.raises(ShapeMismatch):
        loss_basis(P[:, :3], Y, np.ones(12))


def test_basis_monotone_toward_positive_label():
    P, Y, _ = random_batch(1)
    w = class_weights(Y)
    i, j = map(int, np.argwhere(Y == 1)[0])
    prev = loss_basis(P, Y, w)
    for v in np.linspace(P[i, j], 1.0, 20):
        Q = P.copy()
        Q[i, j] = v
        cur = loss_basis(Q, Y, w)
        assert cur <= prev + 1e-15
        prev = cur


def test_stt_hand_case():
    S = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    cfg = LossConfig(tau=0.9)
    a, b, c = np.array([0.2, 0.7]), np.array([0.9, 0.1]), np.array([0.5, 0.5])
    assert loss_stt(np.vstack([a, a, b]), S, cfg) == 0.0
    expected = 2 / 9 * np.linalg.norm(a - c)
    assert loss_stt(np.vstack([a, c, b]), S, cfg) == pytest.approx(expected, abs=1e-15)
    mask = similar_pairs(S, cfg)
    assert mask.tolist() == [[0, 1, 0], [1, 0, 0], [0, 0, 0]]


def test_stt_identical_rows_and_strict_threshold():
    _, _, S = random_batch(2)
    P = np.tile([0.3, 0.6, 0.1], (8, 1))
    assert loss_stt(P, S) == 0.0
    P, _, S = random_batch(3)
    S = np.random.default_rng(3).normal(size=S.shape)
    assert loss_stt(P, S, LossConfig(tau=1.0)) == 0.0


def test_stt_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        loss_stt(np.ones((3, 2)), np.ones((2, 2)))


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.99))
def test_stt_matches_pair_enumeration(seed, tau):
    P, _, S = random_batch(seed)
    got = loss_stt(P, S, LossConfig(tau=tau))
    assert got == pytest.approx(stt_loss_loop(P.tolist(), S.tolist(), tau), abs=1e-12)


def test_frobenius_literal_mode():
    S = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
    sim = similarity_matrix(S, "frobenius_literal")
    np.testing.assert_allclose(sim, S @ S.T / 6.0, atol=0)
    cos = similarity_matrix(S)
    np.testing.assert_allclose(np.diag(cos), 1.0, atol=1e-12)
    assert cos[0, 1] == pytest.approx(1.0)
    assert similarity_matrix(np.zeros((2, 2)), "frobenius_literal").tolist() == [[0, 0], [0, 0]]


def test_class_energy_and_targets():
    assert class_energy(np.full((3, 2), 0.5)).tolist() == [0.5, 0.5]
    assert class_energy([[0.2], [0.6]])[0] == pytest.approx(0.4)
    m_in, m_out = energy_targets(np.array([[1.0, 0.0], [1.0, 0.0]]))
    assert m_in.tolist() == [1.2, 1.0]
    assert m_out.tolist() == [0.0, 0.2]
    m_in, m_out = energy_targets(np.array([[1.0, 0.0], [0.0, 1.0]]), LossConfig(c=0.0))
    assert m_in.tolist() == [1.0, 1.0] and m_out.tolist() == [0.0, 0.0]


def test_class_examples():
    assert loss_class([[0.1]], [[0.0]]) == pytest.approx(0.01, abs=1e-15)
    Y = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert loss_class(np.full((2, 2), 0.5), Y) == 0.0


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_class_matches_double_loop(seed, c):
    rng = np.random.default_rng(seed)
    N, M = 6, 5
    Y = (rng.random((N, M)) < 0.4).astype(float)
    # push some columns low so the lower hinge is active
    P = rng.uniform(0.0, 1.0, (N, M)) * rng.choice([0.05, 1.0], M)
    assert loss_class(P, Y, LossConfig(c=c)) == pytest.approx(
        class_loss_loop(P.tolist(), Y.tolist(), c), abs=1e-12)


def test_class_without_count_scaling():
    Y = np.array([[0.0], [0.0], [1.0]])
    P = np.array([[0.0], [0.0], [0.0]])
    scaled = loss_class(P, Y)
    plain = loss_class(P, Y, LossConfig(class_count_scaling=False))
    m_out = 0.2 * (2 / 3)
    assert plain == pytest.approx(m_out ** 2)
    assert scaled == pytest.approx(2 * m_out ** 2)


def test_sample_examples():
    Y = np.array([[1.0, 1.0, 0.0, 0.0]])
    assert loss_sample([[1.0, 1.0, 1.0, 0.5]], Y) == 0.0
    assert loss_sample([[0.5, 0.5, 0.5, 0.5]], Y) == pytest.approx(1.0)
    assert loss_sample([[0.1, 0.1, 0.1, 0.1]], np.zeros((1, 4))) == pytest.approx(0.36)


def test_col_examples():
    assert loss_col([[1.0, 1.0]], [[1.0, 0.0]]) == pytest.approx(3.0)
    _, Y, _ = random_batch(4)
    assert loss_col(Y, Y) == 0.0


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_col_matches_triple_loop(seed):
    P, Y, _ = random_batch(seed)
    assert loss_col(P, Y) == pytest.approx(col_loss_loop(P.tolist(), Y.tolist()), abs=1e-12)


def _logits(seed):
    P, Y, S = random_batch(seed)
    return np.log(P / (1 - P)), Y, S


def test_total_decomposition():
    z, Y, S = _logits(5)
    br = total_loss(z, Y, S)
    expected = br.basis + 0.3 * br.stt + 0.3 * br.class_energy + 0.5 * br.sample + 0.3 * br.col
    assert abs(br.total - expected) <= 1e-12
    zero = total_loss(z, Y, S, LossConfig(lambda1=0, lambda2=0, lambda3=0, lambda4=0))
    assert abs(zero.total - zero.basis) <= 1e-12
    assert set(br.as_dict()) == {"basis", "stt", "class", "sample", "col", "total"}


def test_total_components_match_functions():
    z, Y, S = _logits(6)
    P = sigmoid(z)
    br = total_loss(z, Y, S)
    assert br.basis == loss_basis(P, Y, class_weights(Y))
    assert br.stt == pytest.approx(loss_stt(P, S), abs=1e-15)
    assert br.class_energy == loss_class(P, Y)
    assert br.sample == loss_sample(P, Y)
    assert br.col == loss_col(P, Y)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_components_nonnegative_and_permutation_invariant(seed):
    z, Y, S = _logits(seed)
    br = total_loss(z, Y, S)
    assert min(br.basis, br.stt, br.class_energy, br.sample, br.col) >= 0
    perm = np.random.default_rng(seed).permutation(len(Y))
    bp = total_loss(z[perm], Y[perm], S[perm])
    for k, v in br.as_dict().items():
        assert bp.as_dict()[k] == pytest.approx(v, rel=1e-12, abs=1e-14)
    np.testing.assert_allclose(bp.grad_logits, br.grad_logits[perm], rtol=1e-9, atol=1e-14)


def test_stt_row_swap_symmetry():
    P, _, S = random_batch(7)
    P2, S2 = P.copy(), S.copy()
    P2[[0, 3]], S2[[0, 3]] = P[[3, 0]], S[[3, 0]]
    assert loss_stt(P2, S2) == pytest.approx(loss_stt(P, S), abs=1e-15)


def test_inactive_hinges_have_zero_gradient():
    Y = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    z = np.full((2, 3), 3.0)  # row sums 2.86 > e1 + e2, energies inside [m_out, m_in]
    br = total_loss(z, Y, np.eye(2))
    assert br.sample == 0 and not br.component_grads["sample"].any()
    assert br.class_energy == 0 and not br.component_grads["class"].any()


@pytest.mark.parametrize("seed", range(5))
def test_total_gradient_finite_differences(seed):
    z, Y, S, _ = gradcheck.loss_problem(seed)
    cfg = LossConfig()
    mask = similar_pairs(S, cfg)
    br = total_loss(z, Y, S, cfg, mask=mask)
    rep = grad_check(lambda t: total_loss(t, Y, S, cfg, mask=mask).total, br.grad_logits, z)
    assert rep.max_rel_err < 1e-4
