"""Structured losses and their gradients with respect to θ.

Every loss returns ``(loss, grad)`` with ``grad`` shaped like θ.
"""

from __future__ import annotations

import logging
from typing import Literal, Optional, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import rel_entr

from .dag import Dag, dp_grad, hard_value_and_path, path_indicator, validate_path
from .dtw import dtw_grad, dtw_hessian_product, hard_dtw, validate_alignment
from .errors import ContractError, DomainError
from .models import Regularizer
from .viterbi import (
    sequence_to_tensor,
    state_marginals,
    tensor_to_sequence,
    viterbi_decode,
    viterbi_grad,
    viterbi_hessian_product,
)

logger = logging.getLogger(__name__)

Structure = Union[Dag, Literal["viterbi", "dtw"]]
Divergence = Literal["l2", "kl"]


def _cost_like(theta: np.ndarray, cost: Optional[ArrayLike]) -> np.ndarray:
    if cost is None:
        return np.zeros_like(theta)
    cost = np.asarray(cost, dtype=float)
    if cost.shape != theta.shape:
        raise ContractError(f"cost has shape {cost.shape}, θ has shape {theta.shape}")
    if not np.all(np.isfinite(cost)):
        raise DomainError("cost augmentation must be finite")
    return cost


def surrogate_loss(
    y_true: ArrayLike,
    theta: ArrayLike,
    cost: Optional[ArrayLike],
    reg: Optional[Regularizer],
    structure: Structure,
) -> tuple[float, np.ndarray]:
    """ℓ(θ) = DPΩ(θ + C) − ⟨Y_true, θ⟩ and its gradient ∇DPΩ(θ + C) − Y_true.

    ``structure`` is a :class:`Dag` (θ is its edge vector; the DAG's own
    weights are ignored), ``"viterbi"`` (θ is a T×S×S tensor) or ``"dtw"``.
    For ``"dtw"`` θ is a cost matrix and the alignment scores are −θ, so the
    loss reads −DTWΩ(θ − C) + ⟨Y_true, θ⟩ and the returned gradient is taken
    with respect to the costs θ.

    With ``reg=None`` the hard max is used: this is the structured hinge
    loss when ``cost`` is a Hamming-type augmentation.
    """
    theta = np.asarray(theta, dtype=float)
    cost = _cost_like(theta, cost)

    if isinstance(structure, Dag):
        y = validate_path(structure, y_true)
        augmented = structure.with_weights(theta + cost)
        if reg is None:
            value, path = hard_value_and_path(augmented)
            expected = path_indicator(augmented, path)
        else:
            value, expected_path, _ = dp_grad(augmented, reg)
            expected = expected_path.edges
        return float(value - y @ theta), expected - y

    if structure == "viterbi":
        y = np.asarray(y_true, dtype=float)
        tensor_to_sequence(y)
        if y.shape != theta.shape:
            raise ContractError(f"Y_true has shape {y.shape}, θ has shape {theta.shape}")
        if reg is None:
            value, sequence = viterbi_decode(theta + cost)
            expected = sequence_to_tensor(sequence, theta.shape[1])
        else:
            value, expected, _ = viterbi_grad(theta + cost, reg)
        return float(value - np.sum(y * theta)), expected - y

    if structure == "dtw":
        y = validate_alignment(y_true)
        if y.shape != theta.shape:
            raise ContractError(f"Y_true has shape {y.shape}, θ has shape {theta.shape}")
        if reg is None:
            value, expected = hard_dtw(theta - cost)
        else:
            value, expected, _ = dtw_grad(theta - cost, reg)
        return float(-value + np.sum(y * theta)), y - expected

    raise ContractError(f"unknown structure {structure!r}")


def hamming_cost(y_true: ArrayLike, n_states: Optional[int] = None) -> np.ndarray:
    """c[t, i, j] = 1 if i differs from the true state at t, for every j.

    ``y_true`` is a state sequence (then ``n_states`` is required) or its
    T×S×S tensor form.
    """
    y_true = np.asarray(y_true)
    if y_true.ndim == 3:
        n_states = y_true.shape[1]
        sequence = np.asarray(tensor_to_sequence(y_true))
    else:
        if n_states is None:
            raise ContractError("n_states is required for a state sequence")
        sequence = np.asarray(y_true, dtype=np.int64)
        sequence_to_tensor(sequence, n_states)
    mistagged = (np.arange(n_states)[np.newaxis, :] != sequence[:, np.newaxis]).astype(float)
    return np.repeat(mistagged[:, :, np.newaxis], n_states, axis=2)


def relaxed_marginal_loss(
    y_true: ArrayLike,
    theta: ArrayLike,
    reg: Regularizer,
    divergence: Divergence = "l2",
) -> tuple[float, np.ndarray]:
    """Divergence between true and predicted state marginals, summed over time.

    ``"l2"`` is Σ (p − p_true)², ``"kl"`` is Σ p_true log(p_true / p). The
    gradient needs a single Hessian-vector product of the smoothed Viterbi.

    Raises:
        DomainError: for ``"kl"`` when a true state gets zero predicted
            probability, which sparse (l2) regularization can produce.
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y_true, dtype=float)
    tensor_to_sequence(y)
    if y.shape != theta.shape:
        raise ContractError(f"Y_true has shape {y.shape}, θ has shape {theta.shape}")
    target = state_marginals(y)
    _, marginals, _ = viterbi_grad(theta, reg)
    predicted = state_marginals(marginals)

    if divergence == "l2":
        residual = predicted - target
        loss = float(np.sum(residual**2))
        d_predicted = 2.0 * residual
    elif divergence == "kl":
        support = target > 0
        if np.any(predicted[support] <= 0):
            raise DomainError(
                f"KL divergence is infinite: a true state has zero predicted marginal under {reg.kind}; "
                "use the entropy regularizer"
            )
        loss = float(np.sum(rel_entr(target, predicted)))
        d_predicted = np.zeros_like(predicted)
        d_predicted[support] = -target[support] / predicted[support]
    else:
        raise ContractError(f"unknown divergence {divergence!r}")

    Z = np.repeat(d_predicted[:, :, np.newaxis], theta.shape[2], axis=2)
    _, grad = viterbi_hessian_product(theta, Z, reg)
    logger.debug(f"relaxed {divergence} loss {loss:.6g}")
    return loss, grad


def area_loss(y_true: ArrayLike, E: ArrayLike) -> tuple[float, np.ndarray]:
    """‖L(E − Y_true)ᵀ‖²_F with L lower-triangular ones, and its gradient in E.

    Row by row this is the squared cumulative difference along the columns
    of series B. Between two hard alignments that hold one cell per row it
    counts the cells between the two paths; horizontal runs make it larger
    than that count, never smaller.
    """
    y_true = np.asarray(y_true, dtype=float)
    E = np.asarray(E, dtype=float)
    if y_true.shape != E.shape or E.ndim != 2:
        raise ContractError(f"alignments must be matrices of the same shape, got {y_true.shape} and {E.shape}")
    cumulative = np.cumsum(E - y_true, axis=1)
    loss = float(np.sum(cumulative**2))
    grad = np.cumsum(2.0 * cumulative[:, ::-1], axis=1)[:, ::-1]
    return loss, grad


def dtw_area_loss(y_true: ArrayLike, theta: ArrayLike, reg: Regularizer) -> tuple[float, np.ndarray]:
    """Area loss of the soft alignment ∇DTWΩ(θ), with its gradient in θ."""
    _, alignment, _ = dtw_grad(theta, reg)
    loss, grad_alignment = area_loss(y_true, alignment)
    _, grad = dtw_hessian_product(theta, grad_alignment, reg)
    return loss, grad
