"""Smoothed dynamic time warping.

The recursion runs on 1-based padded arrays: ``values[i, j]`` is v_{i,j}
for 1 ≤ i ≤ N_A, 1 ≤ j ≤ N_B with a virtual v_{0,0} = 0, so the first
cell is θ_{1,1} + minΩ(0). The three predecessors of a cell are stored in
the order (left, diagonal, up); predecessors outside the lattice are
masked out instead of set to +∞.
"""

from __future__ import annotations

import logging
from typing import NamedTuple, Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy.spatial.distance import cdist
from scipy.special import log_softmax

from .config import NODE_CAP
from .dag import Dag
from .errors import ContractError, DomainError, InvalidStructureError
from .models import Regularizer
from .smoothed_max import SmoothedMax, _hess_vec, _max_and_grad, smoothed_max

logger = logging.getLogger(__name__)

LEFT, DIAGONAL, UP = 0, 1, 2


class DtwState(NamedTuple):
    """Padded forward/backward arrays of one smoothed DTW run."""

    values: np.ndarray  # (N_A + 1) × (N_B + 1)
    q: np.ndarray  # (N_A + 2) × (N_B + 2) × 3
    e: np.ndarray  # (N_A + 2) × (N_B + 2)


class DtwGradient(NamedTuple):
    value: float
    alignment: np.ndarray
    state: DtwState


class HardAlignment(NamedTuple):
    value: float
    alignment: np.ndarray


def min_omega(x: ArrayLike, reg: Regularizer, mask: Optional[ArrayLike] = None) -> SmoothedMax:
    """minΩ(x) = −maxΩ(−x) with gradient ∇maxΩ(−x).

    The Hessian of minΩ is −J_Ω applied at that gradient.
    """
    if isinstance(x, np.ma.MaskedArray):
        x = -x
    else:
        x = -np.asarray(x, dtype=float)
    value, gradient = smoothed_max(x, reg, mask)
    return SmoothedMax(-value, gradient)


def _check_costs(theta: ArrayLike) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[0] < 1 or theta.shape[1] < 1:
        raise ContractError(f"cost matrix must be a non-empty N_A×N_B matrix, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise DomainError("cost matrix must be finite")
    return theta


def _feasible(i: int, j: int) -> np.ndarray:
    """Which of (left, diagonal, up) exist for 1-based cell (i, j)."""
    return np.array([j > 1, (i > 1 and j > 1) or (i == 1 and j == 1), i > 1])


def _predecessors(values: np.ndarray, i: int, j: int) -> np.ndarray:
    return np.array([values[i, j - 1], values[i - 1, j - 1], values[i - 1, j]])


def _forward(theta: np.ndarray, reg: Regularizer) -> DtwState:
    n_a, n_b = theta.shape
    values = np.zeros((n_a + 1, n_b + 1))
    q = np.zeros((n_a + 2, n_b + 2, 3))
    for i in range(1, n_a + 1):
        for j in range(1, n_b + 1):
            keep = _feasible(i, j)
            maximum, gradient = _max_and_grad(-_predecessors(values, i, j)[keep], reg)
            values[i, j] = theta[i - 1, j - 1] - maximum
            q[i, j, keep] = gradient
    q[n_a + 1, n_b + 1] = (0.0, 1.0, 0.0)
    return DtwState(values, q, np.zeros((n_a + 2, n_b + 2)))


def _backward(q: np.ndarray, seed: float, out: np.ndarray) -> None:
    """Accumulate e_{i,j} from its three successors, in place."""
    n_a, n_b = out.shape[0] - 2, out.shape[1] - 2
    out[n_a + 1, n_b + 1] = seed
    for i in range(n_a, 0, -1):
        for j in range(n_b, 0, -1):
            out[i, j] = (
                q[i, j + 1, LEFT] * out[i, j + 1]
                + q[i + 1, j + 1, DIAGONAL] * out[i + 1, j + 1]
                + q[i + 1, j, UP] * out[i + 1, j]
            )


def dtw_value(theta: ArrayLike, reg: Regularizer) -> float:
    """DTWΩ(θ), the smoothed minimal alignment cost, in O(N_A·N_B)."""
    theta = _check_costs(theta)
    return float(_forward(theta, reg).values[-1, -1])


def dtw_grad(theta: ArrayLike, reg: Regularizer) -> DtwGradient:
    """DTWΩ(θ) and the soft alignment E = ∇DTWΩ(θ)."""
    theta = _check_costs(theta)
    logger.debug(f"dtw_grad: {theta.shape[0]}x{theta.shape[1]} {reg.kind} gamma={reg.gamma}")
    state = _forward(theta, reg)
    _backward(state.q, 1.0, state.e)
    return DtwGradient(float(state.values[-1, -1]), state.e[1:-1, 1:-1].copy(), state)


def dtw_hessian_product(theta: ArrayLike, Z: ArrayLike, reg: Regularizer) -> tuple[float, np.ndarray]:
    """⟨∇DTWΩ(θ), Z⟩ and ∇²DTWΩ(θ)·Z."""
    theta = _check_costs(theta)
    Z = np.asarray(Z, dtype=float)
    if Z.shape != theta.shape:
        raise ContractError(f"Z has shape {Z.shape}, cost matrix has shape {theta.shape}")
    _, _, state = dtw_grad(theta, reg)
    n_a, n_b = theta.shape
    q, e = state.q, state.e

    vdot = np.zeros((n_a + 1, n_b + 1))
    qdot = np.zeros_like(q)
    for i in range(1, n_a + 1):
        for j in range(1, n_b + 1):
            local = _predecessors(vdot, i, j)
            vdot[i, j] = Z[i - 1, j - 1] + q[i, j] @ local
            qdot[i, j] = -_hess_vec(q[i, j], local, reg)

    edot = np.zeros_like(e)
    for i in range(n_a, 0, -1):
        for j in range(n_b, 0, -1):
            edot[i, j] = (
                qdot[i, j + 1, LEFT] * e[i, j + 1]
                + q[i, j + 1, LEFT] * edot[i, j + 1]
                + qdot[i + 1, j + 1, DIAGONAL] * e[i + 1, j + 1]
                + q[i + 1, j + 1, DIAGONAL] * edot[i + 1, j + 1]
                + qdot[i + 1, j, UP] * e[i + 1, j]
                + q[i + 1, j, UP] * edot[i + 1, j]
            )
    return float(vdot[-1, -1]), edot[1:-1, 1:-1].copy()


def hard_dtw(theta: ArrayLike) -> HardAlignment:
    """Classic DTW with backtracking; ties prefer diagonal, then left, then up."""
    theta = _check_costs(theta)
    n_a, n_b = theta.shape
    values = np.zeros((n_a + 1, n_b + 1))
    moves = np.zeros((n_a + 1, n_b + 1), dtype=np.int64)
    preference = (DIAGONAL, LEFT, UP)
    for i in range(1, n_a + 1):
        for j in range(1, n_b + 1):
            keep = _feasible(i, j)
            candidates = _predecessors(values, i, j)
            best = min((k for k in preference if keep[k]), key=lambda k: candidates[k])
            values[i, j] = theta[i - 1, j - 1] + candidates[best]
            moves[i, j] = best

    alignment = np.zeros((n_a, n_b))
    i, j = n_a, n_b
    while i >= 1 and j >= 1:
        alignment[i - 1, j - 1] = 1.0
        move = moves[i, j]
        if move == LEFT:
            j -= 1
        elif move == UP:
            i -= 1
        else:
            i, j = i - 1, j - 1
    return HardAlignment(float(values[-1, -1]), alignment)


def squared_euclidean_costs(A: ArrayLike, B: ArrayLike) -> np.ndarray:
    """θ_{i,j} = ‖a_i − b_j‖²; 1-D series are read as one feature per observation."""
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    if A.ndim == 1:
        A = A[:, np.newaxis]
    if B.ndim == 1:
        B = B[:, np.newaxis]
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise ContractError(f"series must share their feature dimension, got {A.shape} and {B.shape}")
    return cdist(A, B, "sqeuclidean")


def classifier_costs(A: ArrayLike, keys: ArrayLike, W: ArrayLike, c: ArrayLike) -> np.ndarray:
    """θ_{i,j} = −log softmax(Wᵀa_i + c)[b_j]: negative log-likelihood of key b_j at frame i."""
    A, W, c = np.asarray(A, dtype=float), np.asarray(W, dtype=float), np.asarray(c, dtype=float)
    keys = np.asarray(keys, dtype=np.int64)
    if A.ndim != 2 or W.ndim != 2 or A.shape[1] != W.shape[0] or c.shape != (W.shape[1],):
        raise ContractError(f"incompatible shapes A={A.shape}, W={W.shape}, c={c.shape}")
    if keys.ndim != 1 or keys.size == 0 or keys.min() < 0 or keys.max() >= W.shape[1]:
        raise ContractError(f"keys must index the {W.shape[1]} classifier outputs")
    return -log_softmax(A @ W + c, axis=1)[:, keys]


def validate_alignment(Y: ArrayLike) -> np.ndarray:
    """Check that ``Y`` is a 0/1 monotone alignment from (1, 1) to (N_A, N_B)."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.size == 0:
        raise InvalidStructureError(f"an alignment must be a non-empty matrix, got shape {Y.shape}")
    if not np.all((Y == 0) | (Y == 1)):
        raise InvalidStructureError("alignment entries must be 0/1")
    n_a, n_b = Y.shape
    if Y[0, 0] != 1 or Y[-1, -1] != 1:
        raise InvalidStructureError("alignment must start at the first cell and end at the last")

    def on_path(a: int, b: int) -> bool:
        return a < n_a and b < n_b and Y[a, b] == 1

    # diagonal only when neither the right nor the down neighbour is on the path
    i, j, visited = 0, 0, 1
    while (i, j) != (n_a - 1, n_b - 1):
        right, down = on_path(i, j + 1), on_path(i + 1, j)
        if right and down:
            raise InvalidStructureError(f"alignment branches at cell ({i + 1}, {j + 1})")
        if right:
            j += 1
        elif down:
            i += 1
        elif on_path(i + 1, j + 1):
            i, j = i + 1, j + 1
        else:
            raise InvalidStructureError(f"alignment stops at cell ({i + 1}, {j + 1})")
        visited += 1
    if visited != int(Y.sum()):
        raise InvalidStructureError("alignment has cells off the monotone path")
    return Y


def export_dag(theta: ArrayLike, node_cap: int = NODE_CAP) -> Dag:
    """The DTW lattice as a DAG whose max recursion is the negated min recursion.

    Node 0 is the start; cell (i, j) (0-based) is node 1 + i·N_B + j. Every
    edge carries −θ of its destination cell, so that
    ``dtw_value(θ) == -dp_value(export_dag(θ))`` and the DAG's node
    marginals are the soft alignment.
    """
    theta = _check_costs(theta)
    n_a, n_b = theta.shape

    def node(i: int, j: int) -> int:
        return 1 + i * n_b + j

    edges = [(1, 0, -theta[0, 0])]
    for i in range(n_a):
        for j in range(n_b):
            weight = -theta[i, j]
            if j > 0:
                edges.append((node(i, j), node(i, j - 1), weight))
            if i > 0 and j > 0:
                edges.append((node(i, j), node(i - 1, j - 1), weight))
            if i > 0:
                edges.append((node(i, j), node(i - 1, j), weight))
    return Dag.from_edges(n_a * n_b + 1, edges, node_cap=node_cap)


def alignment_from_nodes(node_marginals: ArrayLike, shape: tuple[int, int]) -> np.ndarray:
    """Map node marginals of :func:`export_dag` back to an N_A×N_B matrix."""
    node_marginals = np.asarray(node_marginals, dtype=float)
    n_a, n_b = shape
    if node_marginals.shape != (n_a * n_b + 1,):
        raise ContractError(f"expected {n_a * n_b + 1} node marginals, got shape {node_marginals.shape}")
    return node_marginals[1:].reshape(n_a, n_b)
