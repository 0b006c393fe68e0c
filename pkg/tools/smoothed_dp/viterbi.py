"""Smoothed Viterbi on the T×S trellis.

Potentials are a T×S×S tensor: θ[t, i, j] scores state i at time t given
state j at time t-1. The first slice only reads column 0, the fixed virtual
start state; the input convention keeps θ[0, i, :] constant in j. A
virtual end node collects the S states of the last step with zero weights,
so the value is maxΩ(v_T) and, for entropy, equals the log-partition over
all S^T state sequences.
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike

from .dag import Dag
from .errors import ContractError, DomainError, InvalidStructureError
from .models import Regularizer
from .smoothed_max import _hess_vec, _max_and_grad, _rowwise_hess_vec, _rowwise_max_and_grad

logger = logging.getLogger(__name__)


class ViterbiState(NamedTuple):
    """Forward/backward quantities kept for the Hessian pass."""

    values: np.ndarray  # v, T×S
    q: np.ndarray  # local gradients, T×S×S
    q_end: np.ndarray  # gradient of the terminal maxΩ, S
    u: np.ndarray  # state marginals from the backward pass, T×S


class ViterbiGradient(NamedTuple):
    value: float
    marginals: np.ndarray
    state: ViterbiState


class TrellisGraph(NamedTuple):
    """Trellis as a generic DAG plus the tensor position of every edge.

    ``positions[k]`` is ``(t, i, j)`` for trellis edges and ``(-1, -1, -1)``
    for the zero-weight edges into the end node.
    """

    dag: Dag
    positions: np.ndarray

    def tensor_from_edges(self, values: ArrayLike) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        T = int(self.positions[:, 0].max()) + 1
        S = int(self.positions[:, 1].max()) + 1
        out = np.zeros((T, S, S))
        inner = self.positions[:, 0] >= 0
        t, i, j = self.positions[inner].T
        out[t, i, j] = values[inner]
        return out


def _check_potentials(theta: ArrayLike) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 3 or theta.shape[1] != theta.shape[2] or theta.shape[0] < 1 or theta.shape[1] < 1:
        raise ContractError(f"potentials must have shape T×S×S, got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise DomainError("potentials must be finite")
    return theta


def _forward(theta: np.ndarray, reg: Regularizer) -> tuple[float, ViterbiState]:
    T, S, _ = theta.shape
    values = np.zeros((T, S))
    q = np.zeros((T, S, S))
    values[0], q_start = _rowwise_max_and_grad(theta[0][:, :1], reg)
    q[0, :, 0] = q_start[:, 0]
    for t in range(1, T):
        values[t], q[t] = _rowwise_max_and_grad(theta[t] + values[t - 1][np.newaxis, :], reg)
    value, q_end = _max_and_grad(values[-1], reg)
    return value, ViterbiState(values, q, q_end, np.zeros((T, S)))


def viterbi_value(theta: ArrayLike, reg: Regularizer) -> float:
    """VitΩ(θ) in O(T·S²)."""
    value, _ = _forward(_check_potentials(theta), reg)
    return value


def viterbi_grad(theta: ArrayLike, reg: Regularizer) -> ViterbiGradient:
    """VitΩ(θ) and the edge marginals E = ∇VitΩ(θ)."""
    theta = _check_potentials(theta)
    logger.debug(f"viterbi_grad: T={theta.shape[0]} S={theta.shape[1]} {reg.kind} gamma={reg.gamma}")
    value, state = _forward(theta, reg)
    u = state.u
    u[-1] = state.q_end
    marginals = np.zeros_like(theta)
    for t in range(theta.shape[0] - 1, -1, -1):
        marginals[t] = state.q[t] * u[t][:, np.newaxis]
        if t > 0:
            u[t - 1] = marginals[t].sum(axis=0)
    return ViterbiGradient(value, marginals, state)


def viterbi_hessian_product(theta: ArrayLike, Z: ArrayLike, reg: Regularizer) -> tuple[float, np.ndarray]:
    """⟨∇VitΩ(θ), Z⟩ and ∇²VitΩ(θ)·Z."""
    theta = _check_potentials(theta)
    Z = np.asarray(Z, dtype=float)
    if Z.shape != theta.shape:
        raise ContractError(f"Z has shape {Z.shape}, potentials have shape {theta.shape}")
    _, _, state = viterbi_grad(theta, reg)
    T, S, _ = theta.shape

    vdot = np.zeros((T, S))
    qdot = np.zeros((T, S, S))
    vdot[0] = Z[0, :, 0]
    for t in range(1, T):
        local = Z[t] + vdot[t - 1][np.newaxis, :]
        vdot[t] = np.einsum("ij,ij->i", state.q[t], local)
        qdot[t] = _rowwise_hess_vec(state.q[t], local, reg)
    directional = float(state.q_end @ vdot[-1])

    udot = np.zeros((T, S))
    udot[-1] = _hess_vec(state.q_end, vdot[-1], reg)
    hessian_product = np.zeros_like(theta)
    for t in range(T - 1, -1, -1):
        hessian_product[t] = qdot[t] * state.u[t][:, np.newaxis] + state.q[t] * udot[t][:, np.newaxis]
        if t > 0:
            udot[t - 1] = hessian_product[t].sum(axis=0)
    return directional, hessian_product


def state_marginals(marginals: ArrayLike) -> np.ndarray:
    """p[t, i] = Σ_j e[t, i, j]; every row sums to one."""
    marginals = np.asarray(marginals, dtype=float)
    if marginals.ndim != 3:
        raise ContractError(f"edge marginals must be T×S×S, got shape {marginals.shape}")
    return marginals.sum(axis=2)


def viterbi_decode(theta: ArrayLike) -> tuple[float, list[int]]:
    """Unregularized Viterbi: best score and state sequence, ties toward the lowest state."""
    theta = _check_potentials(theta)
    T, S, _ = theta.shape
    values = theta[0, :, 0].copy()
    backpointers = np.zeros((T, S), dtype=np.int64)
    for t in range(1, T):
        scores = theta[t] + values[np.newaxis, :]
        backpointers[t] = np.argmax(scores, axis=1)
        values = scores[np.arange(S), backpointers[t]]
    state = int(np.argmax(values))
    best = float(values[state])
    sequence = [state]
    for t in range(T - 1, 0, -1):
        state = int(backpointers[t, state])
        sequence.append(state)
    return best, sequence[::-1]


def sequence_to_tensor(sequence: ArrayLike, n_states: int) -> np.ndarray:
    """0/1 T×S×S tensor of a state sequence; time 0 uses start column 0."""
    sequence = np.asarray(sequence, dtype=np.int64)
    if sequence.ndim != 1 or sequence.size == 0:
        raise InvalidStructureError("a state sequence must be a non-empty 1-D array")
    if sequence.min() < 0 or sequence.max() >= n_states:
        raise InvalidStructureError(f"states must lie in 0..{n_states - 1}")
    tensor = np.zeros((sequence.size, n_states, n_states))
    previous = np.concatenate([[0], sequence[:-1]])
    tensor[np.arange(sequence.size), sequence, previous] = 1.0
    return tensor


def tensor_to_sequence(tensor: ArrayLike) -> list[int]:
    """Inverse of :func:`sequence_to_tensor`, validating the structure."""
    tensor = np.asarray(tensor, dtype=float)
    if tensor.ndim != 3 or tensor.shape[1] != tensor.shape[2]:
        raise InvalidStructureError(f"expected a T×S×S tensor, got shape {tensor.shape}")
    if not np.all((tensor == 0) | (tensor == 1)) or not np.all(tensor.sum(axis=(1, 2)) == 1):
        raise InvalidStructureError("every time step needs exactly one active transition")
    sequence = []
    previous = 0
    for t, slab in enumerate(tensor):
        i, j = (int(k) for k in np.argwhere(slab)[0])
        if j != previous:
            raise InvalidStructureError(f"time {t} transitions from state {j}, expected {previous}")
        sequence.append(i)
        previous = i
    return sequence


def linear_potentials(X: ArrayLike, W: ArrayLike, b: ArrayLike, transitions: ArrayLike) -> np.ndarray:
    """θ[t, i, j] = ⟨w_i, x_t⟩ + b_i + T[i, j], without the transition term at t = 0."""
    X, W = np.asarray(X, dtype=float), np.asarray(W, dtype=float)
    b, transitions = np.asarray(b, dtype=float), np.asarray(transitions, dtype=float)
    if X.ndim != 2 or W.ndim != 2 or X.shape[1] != W.shape[1]:
        raise ContractError(f"X ({X.shape}) and W ({W.shape}) must share the feature dimension")
    S = W.shape[0]
    if b.shape != (S,) or transitions.shape != (S, S):
        raise ContractError(f"b must have shape ({S},) and transitions ({S}, {S})")
    unary = X @ W.T + b
    theta = unary[:, :, np.newaxis] + transitions[np.newaxis, :, :]
    theta[0] = unary[0][:, np.newaxis]
    return theta


def export_trellis(theta: ArrayLike) -> TrellisGraph:
    """The trellis as a DAG with N = T·S + 2 nodes (start, states, end)."""
    theta = _check_potentials(theta)
    T, S, _ = theta.shape
    end = T * S + 1

    def node(t: int, i: int) -> int:
        return 1 + t * S + i

    edges = [(node(0, i), 0, theta[0, i, 0]) for i in range(S)]
    edges += [(node(t, i), node(t - 1, j), theta[t, i, j]) for t in range(1, T) for i in range(S) for j in range(S)]
    edges += [(end, node(T - 1, i), 0.0) for i in range(S)]
    dag = Dag.from_edges(end + 1, edges)

    children = dag.children
    t, i = np.divmod(children - 1, S)
    j = np.where(t == 0, 0, dag.parents - 1 - (t - 1) * S)
    positions = np.stack([t, i, j], axis=1)
    positions[children == end] = -1
    return TrellisGraph(dag, positions)
