"""Smoothed max operators over the simplex.

maxΩ(x) = max_{q ∈ △} ⟨q, x⟩ − Ω(q) and its argmax q* = ∇maxΩ(x), in closed
form for the two supported regularizers:

- ``entropy``: γ·logsumexp(x/γ), gradient softmax(x/γ);
- ``l2``: ⟨q*, x⟩ − (γ/2)‖q*‖², gradient the Euclidean projection of x/γ
  onto the simplex.

Coordinates equal to −∞ are expressed with a boolean mask (``True`` means
excluded, as in ``numpy.ma``); −∞ never enters the arithmetic and masked
coordinates get exactly zero probability.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import logsumexp, softmax

from .errors import ContractError, DomainError
from .models import Regularizer


class SmoothedMax(NamedTuple):
    value: float
    gradient: np.ndarray


def project_simplex(x: ArrayLike) -> np.ndarray:
    """Euclidean projection of ``x`` onto the probability simplex.

    Sort-then-threshold, O(D log D): with u sorted decreasingly, the
    threshold is τ = (Σ_{k≤ρ} u_k − 1)/ρ for the largest ρ such that
    u_ρ − (Σ_{k≤ρ} u_k − 1)/ρ > 0.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ContractError(f"project_simplex expects a non-empty vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("project_simplex received non-finite entries")
    return _project_rows(x[np.newaxis, :])[0]


def _project_rows(X: np.ndarray) -> np.ndarray:
    n_features = X.shape[1]
    U = np.sort(X, axis=1)[:, ::-1]
    cssv = np.cumsum(U, axis=1) - 1.0
    ind = np.arange(1, n_features + 1)
    rho = np.count_nonzero(U - cssv / ind > 0, axis=1)
    tau = cssv[np.arange(len(X)), rho - 1] / rho
    return np.maximum(X - tau[:, np.newaxis], 0.0)


def _split_mask(x: ArrayLike, mask: Optional[ArrayLike]) -> tuple[np.ndarray, np.ndarray]:
    """Return the dense vector and its boolean *keep* selector."""
    if isinstance(x, np.ma.MaskedArray) and mask is None:
        mask = np.ma.getmaskarray(x)
        x = x.data
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ContractError(f"expected a non-empty vector, got shape {x.shape}")
    if mask is None:
        keep = np.ones(x.shape, dtype=bool)
    else:
        keep = ~np.asarray(mask, dtype=bool)
        if keep.shape != x.shape:
            raise ContractError(f"mask shape {keep.shape} does not match vector shape {x.shape}")
    if not keep.any():
        raise DomainError("all coordinates are masked; maxΩ of the empty set is -inf")
    if not np.all(np.isfinite(x[keep])):
        raise DomainError("unmasked coordinates must be finite")
    return x, keep


def _max_and_grad(x: np.ndarray, reg: Regularizer) -> tuple[float, np.ndarray]:
    """maxΩ and its gradient on a dense finite vector (no validation)."""
    gamma = reg.gamma
    if reg.is_entropy:
        z = x / gamma
        return float(gamma * logsumexp(z)), softmax(z)
    q = _project_rows(x[np.newaxis, :] / gamma)[0]
    return float(q @ x - 0.5 * gamma * (q @ q)), q


def _rowwise_max_and_grad(X: np.ndarray, reg: Regularizer) -> tuple[np.ndarray, np.ndarray]:
    """maxΩ applied independently to every row of ``X``."""
    gamma = reg.gamma
    if reg.is_entropy:
        Z = X / gamma
        return gamma * logsumexp(Z, axis=1), softmax(Z, axis=1)
    Q = _project_rows(X / gamma)
    values = np.einsum("ij,ij->i", Q, X) - 0.5 * gamma * np.einsum("ij,ij->i", Q, Q)
    return values, Q


def _hess_vec(q: np.ndarray, z: np.ndarray, reg: Regularizer) -> np.ndarray:
    if reg.is_entropy:
        return (q * z - q * (q @ z)) / reg.gamma
    s = (q > 0).astype(float)
    return (s * z - s * (s @ z) / s.sum()) / reg.gamma


def _rowwise_hess_vec(Q: np.ndarray, Z: np.ndarray, reg: Regularizer) -> np.ndarray:
    if reg.is_entropy:
        inner = np.einsum("ij,ij->i", Q, Z)
        return (Q * Z - Q * inner[:, np.newaxis]) / reg.gamma
    S = (Q > 0).astype(float)
    inner = np.einsum("ij,ij->i", S, Z) / S.sum(axis=1)
    return (S * Z - S * inner[:, np.newaxis]) / reg.gamma


def smoothed_max(x: ArrayLike, reg: Regularizer, mask: Optional[ArrayLike] = None) -> SmoothedMax:
    """Value and gradient of maxΩ in one call."""
    x, keep = _split_mask(x, mask)
    value, q = _max_and_grad(x[keep], reg)
    gradient = np.zeros_like(x)
    gradient[keep] = q
    return SmoothedMax(value, gradient)


def max_omega(x: ArrayLike, reg: Regularizer, mask: Optional[ArrayLike] = None) -> float:
    """Smoothed max of ``x`` over its unmasked coordinates.

    A single unmasked coordinate gives ``x`` for entropy and ``x − γ/2``
    for l2.

    Raises:
        DomainError: if every coordinate is masked or an unmasked one is
            not finite.
    """
    return smoothed_max(x, reg, mask).value


def grad_max_omega(x: ArrayLike, reg: Regularizer, mask: Optional[ArrayLike] = None) -> np.ndarray:
    """∇maxΩ(x): a simplex vector with zeros on masked coordinates."""
    return smoothed_max(x, reg, mask).gradient


def hess_vec(q: ArrayLike, z: ArrayLike, reg: Regularizer) -> np.ndarray:
    """J_Ω(q)·z, the Hessian of maxΩ applied to ``z``.

    ``q`` must be the gradient returned by :func:`grad_max_omega` under the
    same regularizer.
    """
    q = np.asarray(q, dtype=float)
    z = np.asarray(z, dtype=float)
    if q.shape != z.shape or q.ndim != 1:
        raise ContractError(f"hess_vec needs two vectors of equal length, got {q.shape} and {z.shape}")
    return _hess_vec(q, z, reg)


def omega(q: ArrayLike, reg: Regularizer) -> float:
    """Regularizer value Ω(q), with 0·log 0 = 0 for entropy."""
    q = np.asarray(q, dtype=float)
    if reg.is_entropy:
        positive = q[q > 0]
        return float(reg.gamma * np.sum(positive * np.log(positive)))
    return float(0.5 * reg.gamma * (q @ q))


def omega_bounds(reg: Regularizer, dim: int) -> tuple[float, float]:
    """(L, U) = (min, max) of Ω over the D-dimensional simplex.

    Every x satisfies max(x) − U ≤ maxΩ(x) ≤ max(x) − L.
    """
    if dim < 1:
        raise ContractError(f"dimension must be positive, got {dim}")
    if reg.is_entropy:
        return -reg.gamma * np.log(dim), 0.0
    return reg.gamma / (2.0 * dim), reg.gamma / 2.0
