"""Tests for the brute-force oracle."""

import numpy as np
import pytest

from tools.smoothed_dp.dag import Dag, dp_grad, dp_value
from tools.smoothed_dp.dtw import export_dag
from tools.smoothed_dp.errors import CapExceededError
from tools.smoothed_dp.gradcheck import random_dag
from tools.smoothed_dp.models import Regularizer
from tools.smoothed_dp.oracle import (
    delannoy,
    enumerate_paths,
    expected_path_brute,
    log_partition_brute,
    lp_omega_brute,
    path_probabilities,
    path_scores,
)

from .conftest import SIGMA


def test_chain_has_one_path(chain):
    paths = enumerate_paths(chain)
    assert len(paths) == 1
    assert paths.node_sequences() == [[0, 1, 2]]


def test_diamond_paths_in_depth_first_order(diamond):
    paths = enumerate_paths(diamond)
    assert paths.node_sequences() == [[0, 1, 3], [0, 2, 3]]
    np.testing.assert_array_equal(path_scores(paths, diamond), [2.0, 0.0])


def test_paths_are_distinct_connected_paths(rng):
    dag = random_dag(rng, 9)
    paths = enumerate_paths(dag)
    sequences = [tuple(nodes) for nodes in paths.node_sequences()]
    assert len(set(sequences)) == len(sequences)
    for nodes in sequences:
        assert nodes[0] == 0 and nodes[-1] == dag.n_nodes - 1
        for parent, child in zip(nodes, nodes[1:]):
            dag.edge_index(child, parent)


def test_cap_reports_the_count():
    lattice = export_dag(np.zeros((4, 4)))
    with pytest.raises(CapExceededError) as info:
        enumerate_paths(lattice, cap=10)
    assert info.value.count == 63


@pytest.mark.parametrize("shape, expected", [((2, 2), 3), ((3, 3), 13), ((4, 3), 25), ((4, 4), 63)])
def test_lattice_path_counts(shape, expected):
    assert len(enumerate_paths(export_dag(np.zeros(shape)))) == expected
    assert delannoy(shape[0] - 1, shape[1] - 1) == expected


def test_lp_omega_on_the_diamond(diamond):
    paths = enumerate_paths(diamond)
    assert lp_omega_brute(paths, diamond, Regularizer.entropy()) == pytest.approx(2.1269280, abs=1e-7)
    assert lp_omega_brute(paths, diamond, Regularizer.l2()) == pytest.approx(1.5, abs=1e-12)


def test_log_partition(diamond, chain):
    assert log_partition_brute(enumerate_paths(diamond), diamond, 1.0) == pytest.approx(np.log(np.exp(2) + 1))
    assert log_partition_brute(enumerate_paths(chain), chain, 1.0) == pytest.approx(0.5 - 1.25)


def test_small_trellis_log_partition():
    # T=2, S=2 trellis as a DAG: start, two states per step, end
    theta = {(1, 0): 0.3, (2, 0): -0.2, (3, 1): 1.0, (3, 2): 0.1, (4, 1): -0.7, (4, 2): 0.4, (5, 3): 0.0, (5, 4): 0.0}
    dag = Dag.from_edges(6, [(c, p, w) for (c, p), w in theta.items()])
    scores = [0.3 + 1.0, -0.2 + 0.1, 0.3 - 0.7, -0.2 + 0.4]
    expected = np.log(np.sum(np.exp(scores)))
    assert log_partition_brute(enumerate_paths(dag), dag, 1.0) == pytest.approx(expected, abs=1e-12)
    assert dp_value(dag, Regularizer.entropy()) == pytest.approx(expected, abs=1e-12)


def test_expected_path_on_the_diamond(diamond, entropy):
    paths = enumerate_paths(diamond)
    _, expected, q = dp_grad(diamond, entropy)
    brute = expected_path_brute(paths, q)
    assert brute.total_probability == pytest.approx(1.0)
    np.testing.assert_allclose(path_probabilities(paths, q), [SIGMA, 1 - SIGMA], atol=1e-12)
    np.testing.assert_allclose(brute.path.edges, expected.edges, atol=1e-12)
    np.testing.assert_allclose(brute.path.nodes, expected.nodes, atol=1e-12)


@pytest.mark.parametrize("kind", ["entropy", "l2"])
def test_expected_path_identity_on_random_dags(kind, rng):
    for _ in range(200):
        dag = random_dag(rng, int(rng.integers(3, 11)))
        reg = Regularizer(kind=kind, gamma=float(rng.uniform(0.2, 2.0)))
        paths = enumerate_paths(dag)
        value, expected, q = dp_grad(dag, reg)
        brute = expected_path_brute(paths, q)
        assert brute.total_probability == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(brute.path.edges, expected.edges, atol=1e-10)
        if reg.is_entropy:
            assert value == pytest.approx(log_partition_brute(paths, dag, reg.gamma), abs=1e-9)


def test_l2_value_differs_from_the_flat_smoothed_max(diamond):
    reg = Regularizer.l2()
    dag = diamond.with_weights([0.1, 0.0, 0.0, 0.2])
    paths = enumerate_paths(dag)
    assert abs(dp_value(dag, reg) - lp_omega_brute(paths, dag, reg)) > 1e-3


def test_delannoy_small_values():
    assert delannoy(0, 5) == 1
    assert delannoy(1, 1) == 3
    assert delannoy(2, 2) == 13
