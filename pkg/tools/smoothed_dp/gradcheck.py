"""Finite-difference and oracle-equivalence checks on random instances.

Gradients are compared to central differences of the value, Hessian
products to central differences of the gradient along a random direction.
The l2 operators are piecewise, so a trial only counts when the support of
every local gradient is unchanged at all perturbed points.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd

from .batch import map_instances
from .config import (
    FD_EPSILON,
    FD_NORM_FLOOR,
    GRADIENT_RTOL,
    HESSIAN_RTOL,
    MIN_STABLE_FRACTION,
    ORACLE_PATH_ATOL,
    ORACLE_VALUE_ATOL,
)
from .dag import Dag, dp_grad, dp_hessian_product, dp_value
from .dtw import alignment_from_nodes, dtw_grad, dtw_hessian_product, dtw_value, export_dag
from .models import Regularizer
from .oracle import enumerate_paths, expected_path_brute, log_partition_brute
from .smoothed_max import grad_max_omega, hess_vec, max_omega
from .viterbi import export_trellis, viterbi_grad, viterbi_hessian_product, viterbi_value

logger = logging.getLogger(__name__)

FINITE_DIFFERENCE_SUITES = ("smoothed-max", "dag", "viterbi", "dtw")
ORACLE_SUITES = ("dag-oracle", "viterbi-oracle", "dtw-oracle")
SUITES = FINITE_DIFFERENCE_SUITES + ORACLE_SUITES

TOLERANCES = {
    "gradient": GRADIENT_RTOL,
    "hessian": HESSIAN_RTOL,
    "oracle-value": ORACLE_VALUE_ATOL,
    "oracle-path": ORACLE_PATH_ATOL,
}


@dataclass(frozen=True)
class Problem:
    """A differentiable function of ``x`` with its derivatives and support pattern."""

    x: np.ndarray
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian_product: Callable[[np.ndarray, np.ndarray], np.ndarray]
    support: Callable[[np.ndarray], np.ndarray]


class TrialSpec(NamedTuple):
    suite: str
    reg: Regularizer
    size: int
    seed: np.random.SeedSequence
    epsilon: float


class Measurement(NamedTuple):
    check: str
    stable: bool
    error: float


def relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    """‖a − b‖ / max(‖a‖, ‖b‖, floor)."""
    scale = max(np.linalg.norm(actual), np.linalg.norm(expected), FD_NORM_FLOOR)
    return float(np.linalg.norm(np.asarray(actual) - np.asarray(expected)) / scale)


def random_dag(rng: np.random.Generator, n_nodes: int, edge_probability: float = 0.5) -> Dag:
    """Random DAG in topological order with standard normal weights."""
    edges: set[tuple[int, int]] = set()
    for child in range(1, n_nodes):
        parents = [parent for parent in range(child) if rng.random() < edge_probability]
        if not parents:
            parents = [int(rng.integers(child))]
        edges.update((child, parent) for parent in parents)
    with_child = {parent for _, parent in edges}
    for node in range(n_nodes - 1):
        if node not in with_child:
            edges.add((int(rng.integers(node + 1, n_nodes)), node))
    ordered = sorted(edges)
    weights = rng.standard_normal(len(ordered))
    return Dag.from_edges(n_nodes, [(c, p, w) for (c, p), w in zip(ordered, weights)])


def smoothed_max_problem(rng: np.random.Generator, size: int, reg: Regularizer) -> Problem:
    x = rng.standard_normal(int(rng.integers(2, size + 2)))
    return Problem(
        x=x,
        value=lambda v: max_omega(v, reg),
        gradient=lambda v: grad_max_omega(v, reg),
        hessian_product=lambda v, z: hess_vec(grad_max_omega(v, reg), z, reg),
        support=lambda v: grad_max_omega(v, reg) > 0,
    )


def dag_problem(rng: np.random.Generator, size: int, reg: Regularizer) -> Problem:
    dag = random_dag(rng, int(rng.integers(3, 2 * size + 3)))
    return Problem(
        x=dag.weights,
        value=lambda v: dp_value(dag.with_weights(v), reg),
        gradient=lambda v: dp_grad(dag.with_weights(v), reg).path.edges,
        hessian_product=lambda v, z: dp_hessian_product(dag.with_weights(v), z, reg),
        support=lambda v: dp_grad(dag.with_weights(v), reg).q > 0,
    )


def _random_potentials(rng: np.random.Generator, size: int) -> np.ndarray:
    T, S = (int(k) for k in rng.integers(1, size + 1, size=2))
    theta = rng.standard_normal((T, S, S))
    theta[0] = theta[0, :, :1]
    return theta


def _viterbi_support(v: np.ndarray, reg: Regularizer) -> np.ndarray:
    state = viterbi_grad(v, reg).state
    return np.concatenate([state.q.ravel(), state.q_end]) > 0


def viterbi_problem(rng: np.random.Generator, size: int, reg: Regularizer) -> Problem:
    return Problem(
        x=_random_potentials(rng, size),
        value=lambda v: viterbi_value(v, reg),
        gradient=lambda v: viterbi_grad(v, reg).marginals,
        hessian_product=lambda v, z: viterbi_hessian_product(v, z, reg)[1],
        support=lambda v: _viterbi_support(v, reg),
    )


def _random_costs(rng: np.random.Generator, size: int) -> np.ndarray:
    n_a, n_b = (int(k) for k in rng.integers(1, size + 1, size=2))
    return rng.standard_normal((n_a, n_b))


def dtw_problem(rng: np.random.Generator, size: int, reg: Regularizer) -> Problem:
    return Problem(
        x=_random_costs(rng, size),
        value=lambda v: dtw_value(v, reg),
        gradient=lambda v: dtw_grad(v, reg).alignment,
        hessian_product=lambda v, z: dtw_hessian_product(v, z, reg)[1],
        support=lambda v: dtw_grad(v, reg).state.q > 0,
    )


PROBLEMS: dict[str, Callable[[np.random.Generator, int, Regularizer], Problem]] = {
    "smoothed-max": smoothed_max_problem,
    "dag": dag_problem,
    "viterbi": viterbi_problem,
    "dtw": dtw_problem,
}


def finite_difference_trial(problem: Problem, rng: np.random.Generator, epsilon: float) -> list[Measurement]:
    x = problem.x
    z = rng.standard_normal(x.shape)
    reference = problem.support(x)

    basis = np.eye(x.size).reshape((x.size,) + x.shape)
    stable = all(
        np.array_equal(problem.support(x + sign * epsilon * direction), reference)
        for direction in [*basis, z]
        for sign in (1.0, -1.0)
    )

    numeric_gradient = np.array(
        [(problem.value(x + epsilon * e) - problem.value(x - epsilon * e)) / (2 * epsilon) for e in basis]
    ).reshape(x.shape)
    numeric_hessian = (problem.gradient(x + epsilon * z) - problem.gradient(x - epsilon * z)) / (2 * epsilon)
    return [
        Measurement("gradient", stable, relative_error(problem.gradient(x), numeric_gradient)),
        Measurement("hessian", stable, relative_error(problem.hessian_product(x, z), numeric_hessian)),
    ]


def dag_oracle_trial(rng: np.random.Generator, size: int, reg: Regularizer) -> list[Measurement]:
    dag = random_dag(rng, int(rng.integers(3, 2 * size + 3)))
    paths = enumerate_paths(dag)
    value, expected, q = dp_grad(dag, reg)
    brute = expected_path_brute(paths, q).path
    measurements = [Measurement("oracle-path", True, float(np.abs(expected.edges - brute.edges).max()))]
    if reg.is_entropy:
        measurements.append(Measurement("oracle-value", True, abs(value - log_partition_brute(paths, dag, reg.gamma))))
    return measurements


def viterbi_oracle_trial(rng: np.random.Generator, size: int, reg: Regularizer) -> list[Measurement]:
    theta = _random_potentials(rng, size)
    trellis = export_trellis(theta)
    paths = enumerate_paths(trellis.dag)
    value, marginals, _ = viterbi_grad(theta, reg)
    brute = expected_path_brute(paths, dp_grad(trellis.dag, reg).q).path
    measurements = [
        Measurement("oracle-path", True, float(np.abs(marginals - trellis.tensor_from_edges(brute.edges)).max()))
    ]
    if reg.is_entropy:
        reference = log_partition_brute(paths, trellis.dag, reg.gamma)
    else:
        reference = dp_value(trellis.dag, reg)
    measurements.append(Measurement("oracle-value", True, abs(value - reference)))
    return measurements


def dtw_oracle_trial(rng: np.random.Generator, size: int, reg: Regularizer) -> list[Measurement]:
    theta = _random_costs(rng, size)
    lattice = export_dag(theta)
    paths = enumerate_paths(lattice)
    value, alignment, _ = dtw_grad(theta, reg)
    brute = expected_path_brute(paths, dp_grad(lattice, reg).q).path
    measurements = [
        Measurement("oracle-path", True, float(np.abs(alignment - alignment_from_nodes(brute.nodes, theta.shape)).max()))
    ]
    if reg.is_entropy:
        reference = -log_partition_brute(paths, lattice, reg.gamma)
    else:
        reference = -dp_value(lattice, reg)
    measurements.append(Measurement("oracle-value", True, abs(value - reference)))
    return measurements


ORACLE_TRIALS: dict[str, Callable[[np.random.Generator, int, Regularizer], list[Measurement]]] = {
    "dag-oracle": dag_oracle_trial,
    "viterbi-oracle": viterbi_oracle_trial,
    "dtw-oracle": dtw_oracle_trial,
}


def run_trial(spec: TrialSpec) -> list[Measurement]:
    rng = np.random.default_rng(spec.seed)
    if spec.suite in ORACLE_TRIALS:
        return ORACLE_TRIALS[spec.suite](rng, spec.size, spec.reg)
    problem = PROBLEMS[spec.suite](rng, spec.size, spec.reg)
    return finite_difference_trial(problem, rng, spec.epsilon)


def _summarize(suite: str, kind: str, check: str, measurements: Sequence[Measurement]) -> dict:
    stable = [m.error for m in measurements if m.stable]
    tolerance = TOLERANCES[check]
    max_error = max(stable) if stable else float("nan")
    stable_fraction = len(stable) / len(measurements)
    if stable_fraction < 1.0:
        logger.warning(f"{suite}/{kind}/{check}: {len(measurements) - len(stable)} unstable trials skipped")
    return {
        "suite": suite,
        "regularizer": kind,
        "check": check,
        "trials": len(measurements),
        "stable": len(stable),
        "max_error": max_error,
        "tolerance": tolerance,
        "passed": bool(stable) and max_error <= tolerance and stable_fraction >= MIN_STABLE_FRACTION,
    }


def run_gradcheck(
    regularizers: Sequence[Regularizer],
    size: int = 4,
    trials: int = 20,
    seed: int = 0,
    epsilon: float = FD_EPSILON,
    suites: Sequence[str] = SUITES,
    max_concurrency: int | None = None,
) -> pd.DataFrame:
    """Run every suite for every regularizer; one report row per (suite, regularizer, check).

    Results depend only on the arguments: each trial draws from its own
    spawned seed and the trials are collected in order.
    """
    streams = np.random.SeedSequence(seed).spawn(len(suites) * len(regularizers))
    specs = [
        TrialSpec(suite, reg, size, trial_seed, epsilon)
        for stream, (suite, reg) in zip(streams, [(s, r) for s in suites for r in regularizers])
        for trial_seed in stream.spawn(trials)
    ]
    logger.info(f"gradcheck: {len(specs)} trials over {len(suites)} suites")
    outcomes = map_instances(run_trial, specs, max_concurrency)

    grouped: dict[tuple[str, str, str], list[Measurement]] = {}
    for spec, measurements in zip(specs, outcomes):
        for measurement in measurements:
            grouped.setdefault((spec.suite, spec.reg.kind, measurement.check), []).append(measurement)
    rows = [_summarize(suite, kind, check, group) for (suite, kind, check), group in grouped.items()]
    return pd.DataFrame(rows)


def format_report(report: pd.DataFrame) -> str:
    """Markdown pass/fail table."""
    return report.to_markdown(index=False, floatfmt=".3e")
