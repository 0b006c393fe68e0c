"""Brute-force references by exhaustive path enumeration.

Only meant for small graphs: everything here is exponential in the size of
the DAG and guarded by a path cap.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .config import LOG_SPACE_PATH_LENGTH, PATH_CAP
from .dag import Dag, ExpectedPath, count_paths
from .dtw import alignment_from_nodes, export_dag
from .errors import CapExceededError, ContractError
from .models import Regularizer
from .smoothed_max import max_omega

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PathSet:
    """All source-to-sink paths of a DAG, each a tuple of edge indices."""

    dag: Dag
    paths: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.paths)

    def indicators(self) -> np.ndarray:
        """|Y|×|E| matrix of 0/1 edge indicators."""
        matrix = np.zeros((len(self.paths), self.dag.n_edges))
        for row, path in enumerate(self.paths):
            matrix[row, list(path)] = 1.0
        return matrix

    def node_sequences(self) -> list[list[int]]:
        """Each path as its visited nodes, source first."""
        sequences = []
        for path in self.paths:
            nodes = [0] + [int(self.dag.children[k]) for k in path]
            sequences.append(nodes)
        return sequences


class BruteExpectation(NamedTuple):
    path: ExpectedPath
    total_probability: float


def enumerate_paths(dag: Dag, cap: int = PATH_CAP) -> PathSet:
    """All source-to-sink paths, depth first with children in ascending order.

    Raises:
        CapExceededError: if the DAG has more than ``cap`` paths; the error
            carries the exact count.
    """
    n_paths = count_paths(dag)
    if n_paths > cap:
        raise CapExceededError(f"DAG has {n_paths} paths, cap is {cap}", n_paths, cap)

    out_edges: list[list[int]] = [[] for _ in range(dag.n_nodes)]
    for k in np.argsort(dag.children, kind="stable"):
        out_edges[int(dag.parents[k])].append(int(k))

    sink = dag.n_nodes - 1
    paths: list[tuple[int, ...]] = []
    stack: list[tuple[int, tuple[int, ...]]] = [(0, ())]
    while stack:
        node, prefix = stack.pop()
        if node == sink:
            paths.append(prefix)
            continue
        for k in reversed(out_edges[node]):
            stack.append((int(dag.children[k]), prefix + (k,)))
    logger.debug(f"enumerated {len(paths)} paths over {dag.n_nodes} nodes")
    return PathSet(dag, tuple(paths))


def path_scores(paths: PathSet, dag: Dag) -> np.ndarray:
    """⟨Y, θ⟩ for every enumerated path, θ taken from ``dag``."""
    if dag.n_edges != paths.dag.n_edges:
        raise ContractError("paths were enumerated on a different DAG structure")
    return paths.indicators() @ dag.weights


def lp_omega_brute(paths: PathSet, dag: Dag, reg: Regularizer) -> float:
    """maxΩ applied once to the vector of all path scores."""
    return max_omega(path_scores(paths, dag), reg)


def log_partition_brute(paths: PathSet, dag: Dag, gamma: float) -> float:
    """γ log Σ_Y exp(⟨Y, θ⟩/γ)."""
    return float(gamma * logsumexp(path_scores(paths, dag) / gamma))


def path_probabilities(paths: PathSet, Q: np.ndarray) -> np.ndarray:
    """p(Y) = Π q_{i,j} over the edges of each path."""
    q = np.asarray(Q, dtype=float)
    if q.shape != (paths.dag.n_edges,):
        raise ContractError(f"Q must have {paths.dag.n_edges} entries, got shape {q.shape}")
    probabilities = np.empty(len(paths))
    longest = max((len(path) for path in paths.paths), default=0)
    if longest > LOG_SPACE_PATH_LENGTH:
        logger.warning(f"paths up to {longest} edges long; products taken in log space")
    for row, path in enumerate(paths.paths):
        weights = q[list(path)]
        if len(path) > LOG_SPACE_PATH_LENGTH:
            with np.errstate(divide="ignore"):
                probabilities[row] = np.exp(np.sum(np.log(weights)))
        else:
            probabilities[row] = np.prod(weights)
    return probabilities


def expected_path_brute(paths: PathSet, Q: np.ndarray) -> BruteExpectation:
    """Σ_Y p(Y)·Y under the random walk defined by ``Q``, with node marginals."""
    probabilities = path_probabilities(paths, Q)
    edges = probabilities @ paths.indicators()
    nodes = np.zeros(paths.dag.n_nodes)
    for probability, sequence in zip(probabilities, paths.node_sequences()):
        nodes[sequence] += probability
    return BruteExpectation(ExpectedPath(edges, nodes), float(probabilities.sum()))


@lru_cache(maxsize=None)
def delannoy(m: int, n: int) -> int:
    """Number of monotone lattice paths from (0, 0) to (m, n) with unit right, up and diagonal steps."""
    if m < 0 or n < 0:
        raise ContractError(f"delannoy needs non-negative arguments, got ({m}, {n})")
    if m == 0 or n == 0:
        return 1
    return delannoy(m - 1, n) + delannoy(m, n - 1) + delannoy(m - 1, n - 1)


def enumerate_alignments(n_a: int, n_b: int, cap: int = PATH_CAP) -> list[np.ndarray]:
    """Every monotone alignment of an N_A×N_B lattice as a 0/1 matrix.

    There are ``delannoy(n_a - 1, n_b - 1)`` of them, in the depth-first
    order of :func:`enumerate_paths` on the exported lattice.
    """
    if n_a < 1 or n_b < 1:
        raise ContractError(f"lattice needs positive sides, got {n_a}×{n_b}")
    paths = enumerate_paths(export_dag(np.zeros((n_a, n_b))), cap=cap)
    alignments = []
    for sequence in paths.node_sequences():
        marginals = np.zeros(n_a * n_b + 1)
        marginals[sequence] = 1.0
        alignments.append(alignment_from_nodes(marginals, (n_a, n_b)))
    return alignments


def staircase_area(y_true: np.ndarray, y: np.ndarray) -> int:
    """Cells lying between two alignments, counted row by row.

    In each row a cell is counted when its column falls between the first
    column the two paths enter that row at (left end inclusive). When both
    paths hold one cell per row this is Σ_i |j(i) − j_true(i)|.
    """
    y_true = np.asarray(y_true)
    y = np.asarray(y)
    if y_true.shape != y.shape:
        raise ContractError(f"alignments differ in shape: {y_true.shape} vs {y.shape}")
    n_a, n_b = y.shape
    area = 0
    for i in range(n_a):
        first_true = next(j for j in range(n_b) if y_true[i, j] == 1)
        first = next(j for j in range(n_b) if y[i, j] == 1)
        for j in range(n_b):
            if min(first, first_true) <= j < max(first, first_true):
                area += 1
    return area
