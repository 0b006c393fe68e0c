"""Tests for the structured losses."""

import itertools

import numpy as np
import pytest

from tools.smoothed_dp.dag import path_indicator
from tools.smoothed_dp.dtw import dtw_grad, dtw_value, hard_dtw
from tools.smoothed_dp.errors import ContractError, DomainError, InvalidStructureError
from tools.smoothed_dp.gradcheck import relative_error
from tools.smoothed_dp.losses import (
    area_loss,
    dtw_area_loss,
    hamming_cost,
    relaxed_marginal_loss,
    surrogate_loss,
)
from tools.smoothed_dp.models import Regularizer
from tools.smoothed_dp.oracle import enumerate_alignments, staircase_area
from tools.smoothed_dp.viterbi import sequence_to_tensor, viterbi_decode

from .conftest import SIGMA


def numeric_gradient(func, theta, eps=1e-6):
    grad = np.zeros_like(theta)
    for index in np.ndindex(theta.shape):
        step = np.zeros_like(theta)
        step[index] = eps
        grad[index] = (func(theta + step) - func(theta - step)) / (2 * eps)
    return grad


def random_potentials(rng, T, S):
    theta = rng.normal(size=(T, S, S))
    theta[0] = theta[0, :, :1]
    return theta


class TestSurrogateLoss:
    def test_dag_entropy_is_the_negative_log_likelihood(self, diamond, entropy):
        y = path_indicator(diamond, [(1, 0), (3, 1)])
        loss, grad = surrogate_loss(y, diamond.weights, None, entropy, diamond)
        assert loss == pytest.approx(-np.log(SIGMA), abs=1e-12)
        edge_marginals = np.where(y == 1, SIGMA, 1 - SIGMA)
        np.testing.assert_allclose(grad, edge_marginals - y, atol=1e-12)

    def test_dag_hinge_is_zero_at_a_margin(self, diamond):
        y = path_indicator(diamond, [(1, 0), (3, 1)])
        cost = 1.0 - y
        loss, _ = surrogate_loss(y, diamond.weights * 3, cost, None, diamond)
        assert loss == 0.0

    def test_dag_hinge_is_positive_when_violated(self, diamond):
        y = path_indicator(diamond, [(2, 0), (3, 2)])
        loss, grad = surrogate_loss(y, diamond.weights, None, None, diamond)
        assert loss == pytest.approx(2.0)
        np.testing.assert_array_equal(grad, path_indicator(diamond, [(1, 0), (3, 1)]) - y)

    def test_dag_rejects_a_non_path(self, diamond, entropy):
        with pytest.raises(InvalidStructureError):
            surrogate_loss([1.0, 1.0, 0.0, 0.0], diamond.weights, None, entropy, diamond)

    def test_viterbi_entropy_is_the_negative_log_likelihood(self, rng, entropy):
        theta = random_potentials(rng, 3, 2)
        sequence = [1, 0, 1]
        y = sequence_to_tensor(sequence, 2)
        scores = {s: np.sum(theta * sequence_to_tensor(s, 2)) for s in itertools.product(range(2), repeat=3)}
        log_z = np.log(np.sum(np.exp(list(scores.values()))))
        loss, grad = surrogate_loss(y, theta, None, entropy, "viterbi")
        assert loss == pytest.approx(log_z - scores[tuple(sequence)], abs=1e-10)
        assert loss >= 0
        np.testing.assert_allclose(grad, numeric_gradient(lambda t: surrogate_loss(y, t, None, entropy, "viterbi")[0], theta), atol=1e-6)

    def test_viterbi_hinge_with_hamming_cost(self, rng):
        for _ in range(10):
            theta = random_potentials(rng, 4, 3)
            _, best = viterbi_decode(theta)
            y = sequence_to_tensor(best, 3)
            assert surrogate_loss(y, theta, None, None, "viterbi")[0] == pytest.approx(0.0, abs=1e-12)
            other = sequence_to_tensor([(s + 1) % 3 for s in best], 3)
            assert surrogate_loss(other, theta, hamming_cost(other), None, "viterbi")[0] >= -1e-12

    def test_viterbi_cost_shape_mismatch(self, entropy):
        y = sequence_to_tensor([0, 1], 2)
        with pytest.raises(ContractError):
            surrogate_loss(y, np.zeros((2, 2, 2)), np.zeros((2, 3, 3)), entropy, "viterbi")

    def test_dtw_loss_and_gradient(self, reg, rng):
        theta = rng.normal(size=(3, 4))
        y = hard_dtw(rng.normal(size=(3, 4))).alignment
        loss, grad = surrogate_loss(y, theta, None, reg, "dtw")
        assert loss == pytest.approx(-dtw_value(theta, reg) + np.sum(y * theta), abs=1e-12)
        np.testing.assert_allclose(grad, y - dtw_grad(theta, reg).alignment, atol=1e-12)
        np.testing.assert_allclose(grad, numeric_gradient(lambda t: surrogate_loss(y, t, None, reg, "dtw")[0], theta), atol=1e-5)

    def test_dtw_loss_along_a_right_then_down_alignment(self, reg, rng):
        theta = rng.normal(size=(2, 3))
        y = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
        loss, grad = surrogate_loss(y, theta, None, reg, "dtw")
        assert loss == pytest.approx(-dtw_value(theta, reg) + np.sum(y * theta), abs=1e-12)
        np.testing.assert_allclose(grad, y - dtw_grad(theta, reg).alignment, atol=1e-12)

    def test_dtw_hinge_is_zero_at_the_optimal_alignment(self, rng):
        theta = rng.normal(size=(4, 4))
        y = hard_dtw(theta).alignment
        assert surrogate_loss(y, theta, None, None, "dtw")[0] == pytest.approx(0.0, abs=1e-12)

    def test_unknown_structure(self, entropy):
        with pytest.raises(ContractError):
            surrogate_loss(np.eye(2), np.zeros((2, 2)), None, entropy, "crf")


def test_hamming_cost():
    cost = hamming_cost([1, 0], n_states=2)
    np.testing.assert_array_equal(cost[0], [[1, 1], [0, 0]])
    np.testing.assert_array_equal(cost[1], [[0, 0], [1, 1]])
    np.testing.assert_array_equal(hamming_cost(sequence_to_tensor([1, 0], 2)), cost)
    assert np.sum(cost * sequence_to_tensor([1, 0], 2)) == 0.0


def test_hamming_cost_needs_the_state_count():
    with pytest.raises(ContractError):
        hamming_cost([0, 1])


class TestRelaxedMarginalLoss:
    def test_l2_divergence_example(self, entropy):
        theta = np.array([[[1.0, 1.0], [0.0, 0.0]]])
        sigma = np.e / (np.e + 1.0)
        loss, _ = relaxed_marginal_loss(sequence_to_tensor([0], 2), theta, entropy, "l2")
        assert loss == pytest.approx(2 * (1 - sigma) ** 2, abs=1e-12)
        assert loss == pytest.approx(0.144659, abs=1e-6)

    def test_kl_divergence_example(self, entropy):
        theta = np.array([[[1.0, 1.0], [0.0, 0.0]]])
        loss, _ = relaxed_marginal_loss(sequence_to_tensor([0], 2), theta, entropy, "kl")
        assert loss == pytest.approx(-np.log(np.e / (np.e + 1.0)), abs=1e-12)

    def test_kl_with_a_zero_marginal_is_a_domain_error(self):
        theta = np.array([[[5.0, 5.0], [0.0, 0.0]]])
        with pytest.raises(DomainError):
            relaxed_marginal_loss(sequence_to_tensor([1], 2), theta, Regularizer.l2(0.1), "kl")

    @pytest.mark.parametrize("divergence", ["l2", "kl"])
    def test_gradient_matches_finite_differences(self, divergence, entropy, rng):
        theta = random_potentials(rng, 3, 2)
        y = sequence_to_tensor([0, 1, 1], 2)
        _, grad = relaxed_marginal_loss(y, theta, entropy, divergence)
        numeric = numeric_gradient(lambda t: relaxed_marginal_loss(y, t, entropy, divergence)[0], theta)
        assert relative_error(grad, numeric) < 1e-4

    def test_unknown_divergence(self, entropy):
        with pytest.raises(ContractError):
            relaxed_marginal_loss(sequence_to_tensor([0], 2), np.zeros((1, 2, 2)), entropy, "hellinger")


class TestAreaLoss:
    def test_worked_value(self):
        loss, grad = area_loss(np.eye(2), [[1.0, 0.0], [1.0, 1.0]])
        assert loss == pytest.approx(2.0)
        np.testing.assert_allclose(grad, [[0.0, 0.0], [4.0, 2.0]])

    def test_identical_alignments(self):
        loss, grad = area_loss(np.eye(3), np.eye(3))
        assert loss == 0.0
        np.testing.assert_array_equal(grad, 0.0)

    def test_matches_the_lower_triangular_form(self, rng):
        Y, E = rng.random((3, 4)), rng.random((3, 4))
        L = np.tril(np.ones((4, 4)))
        expected = np.linalg.norm(L @ (E - Y).T, "fro") ** 2
        assert area_loss(Y, E)[0] == pytest.approx(expected, abs=1e-12)

    def test_gradient_matches_finite_differences(self, rng):
        Y, E = rng.random((3, 4)), rng.random((3, 4))
        numeric = numeric_gradient(lambda e: area_loss(Y, e)[0], E)
        np.testing.assert_allclose(area_loss(Y, E)[1], numeric, atol=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            area_loss(np.eye(2), np.eye(3))

    def test_squared_form_exceeds_the_area_on_long_horizontal_runs(self):
        y_true = np.array([[1.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
        y = np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
        assert area_loss(y_true, y)[0] == pytest.approx(14.0)
        assert staircase_area(y_true, y) == 2
        assert staircase_area(np.eye(2), [[1, 0], [1, 1]]) == 1

    @pytest.mark.parametrize("shape", list(itertools.product(range(1, 6), repeat=2)))
    def test_hard_alignments_against_cell_counting(self, shape):
        alignments = enumerate_alignments(*shape)
        for y_true, y in itertools.product(alignments, repeat=2):
            loss = area_loss(y_true, y)[0]
            area = staircase_area(y_true, y)
            assert loss >= area
            assert (loss == 0.0) == np.array_equal(y_true, y)
            if np.all(y_true.sum(axis=1) == 1) and np.all(y.sum(axis=1) == 1):
                assert loss == area

    def test_dtw_area_loss_gradient(self, entropy, rng):
        theta = rng.normal(size=(3, 3))
        y = np.eye(3)
        loss, grad = dtw_area_loss(y, theta, entropy)
        assert loss == pytest.approx(area_loss(y, dtw_grad(theta, entropy).alignment)[0])
        numeric = numeric_gradient(lambda t: dtw_area_loss(y, t, entropy)[0], theta)
        assert relative_error(grad, numeric) < 1e-4
