"""Smoothed dynamic programming over a topologically ordered DAG.

Nodes are numbered 0..N-1 in topological order: node 0 is the source, node
N-1 the sink, and every parent index is smaller than its child. Edges are
stored per child in CSR form (``indptr``, ``parents``, ``weights``) with
parents sorted increasingly; every edge-indexed array in this module
(weights θ, perturbations Z, transition weights Q, expected path E) is a
flat vector aligned with that order.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Union

import numpy as np
from numpy.typing import ArrayLike

from .config import NODE_CAP, ROUNDING_THRESHOLD, TIE_ATOL
from .errors import CapExceededError, ContractError, InvalidDagError, InvalidStructureError, NonUniqueArgmaxError
from .models import Regularizer, RegularizerKind
from .smoothed_max import _hess_vec, _max_and_grad

logger = logging.getLogger(__name__)

Edge = tuple[int, int]
EdgeValues = Union[ArrayLike, Mapping[Edge, float]]


@dataclass(frozen=True, eq=False)
class Dag:
    """Weighted DAG in topological order, edges grouped by child."""

    n_nodes: int
    indptr: np.ndarray
    parents: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_edges(
        cls,
        n_nodes: int,
        edges: Iterable[tuple[int, int, float]],
        node_cap: int = NODE_CAP,
    ) -> "Dag":
        """Build a DAG from 0-based ``(child, parent, weight)`` triples.

        Raises:
            CapExceededError: if ``n_nodes`` exceeds ``node_cap``.
            InvalidDagError: if the topological-order or reachability
                invariants do not hold.
        """
        if n_nodes > node_cap:
            raise CapExceededError(f"DAG has {n_nodes} nodes, cap is {node_cap}", n_nodes, node_cap)
        if n_nodes < 2:
            raise InvalidDagError(f"a DAG needs at least 2 nodes, got {n_nodes}")

        by_child: dict[int, dict[int, float]] = {}
        for child, parent, weight in edges:
            child, parent, weight = int(child), int(parent), float(weight)
            if not 0 <= parent < child < n_nodes:
                raise InvalidDagError(
                    f"edge ({child}, {parent}) breaks topological order or lies outside 0..{n_nodes - 1}"
                )
            if not np.isfinite(weight):
                raise InvalidDagError(f"edge ({child}, {parent}) has non-finite weight {weight}")
            siblings = by_child.setdefault(child, {})
            if parent in siblings:
                raise InvalidDagError(f"duplicate edge ({child}, {parent})")
            siblings[parent] = weight

        counts = np.zeros(n_nodes, dtype=np.int64)
        parents: list[int] = []
        weights: list[float] = []
        for child in range(1, n_nodes):
            siblings = by_child.get(child)
            if not siblings:
                raise InvalidDagError(f"node {child} has no parent")
            for parent in sorted(siblings):
                parents.append(parent)
                weights.append(siblings[parent])
            counts[child] = len(siblings)

        dag = cls(
            n_nodes=n_nodes,
            indptr=np.concatenate([[0], np.cumsum(counts)]).astype(np.int64),
            parents=np.asarray(parents, dtype=np.int64),
            weights=np.asarray(weights, dtype=float),
        )
        childless = np.flatnonzero(np.bincount(dag.parents, minlength=n_nodes)[: n_nodes - 1] == 0)
        if childless.size:
            raise InvalidDagError(f"node {int(childless[0])} has no child and is not the sink")
        return dag

    @property
    def n_edges(self) -> int:
        return int(self.parents.size)

    def edges_of(self, child: int) -> slice:
        """Slice of the edge arrays holding the parents of ``child``."""
        return slice(int(self.indptr[child]), int(self.indptr[child + 1]))

    @cached_property
    def children(self) -> np.ndarray:
        """Child node of every edge."""
        return np.repeat(np.arange(self.n_nodes), np.diff(self.indptr))

    @cached_property
    def _edge_lookup(self) -> dict[Edge, int]:
        return {(int(c), int(p)): k for k, (c, p) in enumerate(zip(self.children, self.parents))}

    def edge_index(self, child: int, parent: int) -> int:
        try:
            return self._edge_lookup[(child, parent)]
        except KeyError:
            raise ContractError(f"({child}, {parent}) is not an edge of the DAG") from None

    def edge_list(self) -> list[tuple[int, int, float]]:
        return [(int(c), int(p), float(w)) for c, p, w in zip(self.children, self.parents, self.weights)]

    def with_weights(self, theta: EdgeValues) -> "Dag":
        """Same structure, new edge weights."""
        theta = self.edge_vector(theta)
        if not np.all(np.isfinite(theta)):
            raise InvalidDagError("edge weights must be finite")
        return Dag(self.n_nodes, self.indptr, self.parents, theta)

    def edge_vector(self, values: EdgeValues) -> np.ndarray:
        """Flat edge-aligned copy of ``values`` (array or ``{(child, parent): value}``)."""
        if isinstance(values, Mapping):
            out = np.zeros(self.n_edges)
            for (child, parent), value in values.items():
                out[self.edge_index(int(child), int(parent))] = value
            return out
        out = np.array(values, dtype=float)
        if out.shape != (self.n_edges,):
            raise ContractError(f"expected {self.n_edges} edge values, got shape {out.shape}")
        return out


@dataclass(frozen=True, eq=False)
class ExpectedPath:
    """∇DPΩ(θ): expected edge indicators and node marginals."""

    edges: np.ndarray
    nodes: np.ndarray

    def as_dense(self, dag: Dag) -> np.ndarray:
        """N×N matrix with E[child, parent] on edges and zero elsewhere."""
        dense = np.zeros((dag.n_nodes, dag.n_nodes))
        dense[dag.children, dag.parents] = self.edges
        return dense


class HardPath(NamedTuple):
    value: float
    path: frozenset[Edge]


class DpGradient(NamedTuple):
    value: float
    path: ExpectedPath
    q: np.ndarray


def path_indicator(dag: Dag, path: Iterable[Edge]) -> np.ndarray:
    """0/1 edge vector of a path given as ``(child, parent)`` pairs."""
    indicator = np.zeros(dag.n_edges)
    for child, parent in path:
        indicator[dag.edge_index(child, parent)] = 1.0
    return indicator


def validate_path(dag: Dag, indicator: ArrayLike) -> np.ndarray:
    """Check that a 0/1 edge vector is a single source-to-sink path."""
    y = dag.edge_vector(indicator)
    if not np.all((y == 0) | (y == 1)):
        raise InvalidStructureError("path indicator must be 0/1")
    node = dag.n_nodes - 1
    used = 0
    while node != 0:
        chosen = np.flatnonzero(y[dag.edges_of(node)])
        if chosen.size != 1:
            raise InvalidStructureError(f"node {node} must have exactly one incoming path edge, found {chosen.size}")
        used += 1
        node = int(dag.parents[dag.indptr[node] + chosen[0]])
    if used != int(y.sum()):
        raise InvalidStructureError("path indicator has edges off the source-to-sink path")
    return y


def _hard_forward(dag: Dag) -> tuple[np.ndarray, np.ndarray]:
    values = np.zeros(dag.n_nodes)
    best = np.zeros(dag.n_nodes, dtype=np.int64)
    for i in range(1, dag.n_nodes):
        sl = dag.edges_of(i)
        scores = dag.weights[sl] + values[dag.parents[sl]]
        k = int(np.argmax(scores))
        values[i] = scores[k]
        best[i] = sl.start + k
    return values, best


def hard_value_and_path(dag: Dag) -> HardPath:
    """LP(θ) and one maximizing path, ties toward the lowest parent index."""
    values, best = _hard_forward(dag)
    path = []
    node = dag.n_nodes - 1
    while node != 0:
        k = best[node]
        parent = int(dag.parents[k])
        path.append((node, parent))
        node = parent
    return HardPath(float(values[-1]), frozenset(path))


def count_paths(dag: Dag) -> int:
    """Number of source-to-sink paths."""
    counts = [0] * dag.n_nodes
    counts[0] = 1
    for i in range(1, dag.n_nodes):
        counts[i] = sum(counts[int(j)] for j in dag.parents[dag.edges_of(i)])
    return counts[-1]


def count_optimal_paths(dag: Dag, atol: float = TIE_ATOL) -> int:
    """Number of paths attaining LP(θ), ties judged within ``atol`` (relative)."""
    values, _ = _hard_forward(dag)
    counts = [0] * dag.n_nodes
    counts[0] = 1
    for i in range(1, dag.n_nodes):
        sl = dag.edges_of(i)
        scores = dag.weights[sl] + values[dag.parents[sl]]
        ties = scores >= values[i] - atol * (1.0 + abs(values[i]))
        counts[i] = sum(counts[int(j)] for j in dag.parents[sl][ties])
    return counts[-1]


def _forward(dag: Dag, reg: Regularizer) -> tuple[np.ndarray, np.ndarray]:
    values = np.zeros(dag.n_nodes)
    q = np.zeros(dag.n_edges)
    for i in range(1, dag.n_nodes):
        sl = dag.edges_of(i)
        values[i], q[sl] = _max_and_grad(dag.weights[sl] + values[dag.parents[sl]], reg)
    return values, q


def dp_value(dag: Dag, reg: Regularizer) -> float:
    """DPΩ(θ): smoothed value of the sink, v₀ = 0, O(|E|)."""
    values, _ = _forward(dag, reg)
    return float(values[-1])


def dp_grad(dag: Dag, reg: Regularizer) -> DpGradient:
    """DPΩ(θ), its gradient E = ∇DPΩ(θ) and the transition weights Q.

    The backward pass visits children in reverse topological order:
    e_{i,j} = ē_i q_{i,j} and ē_j accumulates the e_{i,j} of its children.
    """
    logger.debug(f"dp_grad: {dag.n_nodes} nodes, {dag.n_edges} edges, {reg.kind} gamma={reg.gamma}")
    values, q = _forward(dag, reg)
    node_marginals = np.zeros(dag.n_nodes)
    node_marginals[-1] = 1.0
    edge_marginals = np.zeros(dag.n_edges)
    for i in range(dag.n_nodes - 1, 0, -1):
        sl = dag.edges_of(i)
        edge_marginals[sl] = node_marginals[i] * q[sl]
        node_marginals[dag.parents[sl]] += edge_marginals[sl]
    return DpGradient(float(values[-1]), ExpectedPath(edge_marginals, node_marginals), q)


def dp_directional(dag: Dag, Z: EdgeValues, Q: np.ndarray) -> float:
    """⟨∇DPΩ(θ), Z⟩ by one forward pass over the transition weights ``Q``."""
    z = dag.edge_vector(Z)
    q = np.asarray(Q, dtype=float)
    if q.shape != (dag.n_edges,):
        raise ContractError(f"Q must have {dag.n_edges} entries, got shape {q.shape}")
    vdot = np.zeros(dag.n_nodes)
    for i in range(1, dag.n_nodes):
        sl = dag.edges_of(i)
        vdot[i] = q[sl] @ (z[sl] + vdot[dag.parents[sl]])
    return float(vdot[-1])


def dp_hessian_product(dag: Dag, Z: EdgeValues, reg: Regularizer) -> np.ndarray:
    """∇²DPΩ(θ)·Z, at roughly twice the cost of :func:`dp_grad`."""
    z = dag.edge_vector(Z)
    _, expected, q = dp_grad(dag, reg)
    vdot = np.zeros(dag.n_nodes)
    qdot = np.zeros(dag.n_edges)
    for i in range(1, dag.n_nodes):
        sl = dag.edges_of(i)
        local = z[sl] + vdot[dag.parents[sl]]
        vdot[i] = q[sl] @ local
        qdot[sl] = _hess_vec(q[sl], local, reg)

    ebar = expected.nodes
    ebar_dot = np.zeros(dag.n_nodes)
    edot = np.zeros(dag.n_edges)
    for i in range(dag.n_nodes - 1, 0, -1):
        sl = dag.edges_of(i)
        edot[sl] = qdot[sl] * ebar[i] + q[sl] * ebar_dot[i]
        ebar_dot[dag.parents[sl]] += edot[sl]
    return edot


def vanishing_regularization_limit(
    dag: Dag,
    kind: RegularizerKind,
    gammas: Sequence[float],
) -> frozenset[Edge]:
    """Rounded limit of ∇DP_{γΩ}(θ) as γ decreases over ``gammas``.

    Raises:
        ContractError: if ``gammas`` is empty.
        NonUniqueArgmaxError: if several paths attain LP(θ); the limit is
            then a mixture and has no single path to report.
    """
    if not gammas:
        raise ContractError("vanishing_regularization_limit needs at least one gamma")
    n_optimal = count_optimal_paths(dag)
    if n_optimal != 1:
        raise NonUniqueArgmaxError(
            f"{n_optimal} paths attain the maximum; the limit is not a single path",
            {"n_optimal": n_optimal},
        )
    hard = path_indicator(dag, hard_value_and_path(dag).path)
    edges = np.zeros(dag.n_edges)
    for gamma in sorted(gammas, reverse=True):
        edges = dp_grad(dag, Regularizer(kind=kind, gamma=gamma)).path.edges
        logger.debug(f"gamma={gamma}: max deviation from hard path {np.abs(edges - hard).max():.3e}")
    rounded = {
        (int(dag.children[k]), int(dag.parents[k])) for k in np.flatnonzero(edges >= ROUNDING_THRESHOLD)
    }
    if not np.array_equal(path_indicator(dag, rounded), hard):
        logger.warning(f"rounded gradient at gamma={min(gammas)} differs from the hard path")
    return frozenset(rounded)
