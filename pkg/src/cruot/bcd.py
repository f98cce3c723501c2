"""Block coordinate descent over the plan and the linear cost map.

Each outer step solves the entropic UOT problem for the current cost
``C[i, j] = -<M x_i, y_j>`` and then replaces ``M`` by the norm-``r``
rescaling of the cross-correlation ``sum_ij P_ij y_j x_i^T``, which is the
exact minimizer over the Frobenius ball.
"""

from __future__ import annotations

import logging
import math
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core_types import (
    CouplingMatrix,
    DimensionMismatch,
    DiscreteMeasure,
    LinearCostMap,
    NonFiniteEntry,
    PointCloud,
    SolveConfig,
    SolveResult,
    validate,
)
from .divergence import kl_plan, phi_penalty
from .sinkhorn import SinkhornState, marginal_residual, solve_uot

log = logging.getLogger(__name__)

# below this Frobenius norm the cross-correlation counts as zero
ZERO_CORR = 1e-14


def _points(cloud) -> np.ndarray:
    return cloud.points if isinstance(cloud, PointCloud) else np.atleast_2d(np.asarray(cloud, dtype=float))


def _weights(measure) -> np.ndarray:
    return measure.weights if isinstance(measure, DiscreteMeasure) else np.asarray(measure, dtype=float)


def _entries(plan) -> np.ndarray:
    return plan.entries if isinstance(plan, CouplingMatrix) else np.asarray(plan, dtype=float)


def cross_correlation(plan, source, target) -> np.ndarray:
    """``sum_ij P[i, j] y_j x_i^T`` as a ``(q, p)`` array."""
    P = _entries(plan)
    X = _points(source)
    Y = _points(target)
    if P.shape != (X.shape[0], Y.shape[0]):
        raise DimensionMismatch(f"plan shape {P.shape} vs clouds ({X.shape[0]}, {Y.shape[0]})")
    return Y.T @ (P.T @ X)


def m_update(corr, radius: float) -> LinearCostMap:
    """Maximizer of ``<corr, M>_F`` over ``||M||_F <= radius``.

    A (numerically) zero ``corr`` maps to the zero matrix.
    """
    corr = np.asarray(corr, dtype=float)
    if not np.all(np.isfinite(corr)):
        raise NonFiniteEntry("cross-correlation contains NaN or Inf")
    norm = np.linalg.norm(corr)
    if norm <= ZERO_CORR:
        return LinearCostMap(np.zeros_like(corr), radius)
    M = corr * (radius / norm)
    # keep rounding from pushing the norm a hair above the radius
    M_norm = np.linalg.norm(M)
    if M_norm > radius:
        M *= radius / M_norm
    return LinearCostMap(M, radius)


def _penalties(P, a, b, entropy1, entropy2, epsilon) -> float:
    pen1 = phi_penalty(entropy1, P.sum(axis=1), a)
    pen2 = phi_penalty(entropy2, P.sum(axis=0), b)
    if math.isinf(pen1) or math.isinf(pen2):
        return math.inf
    return pen1 + pen2 + epsilon * kl_plan(P, a, b)


def objective(plan, cost_map, source, target, a, b, entropy1, entropy2, epsilon) -> float:
    """Joint objective ``J(P, M)``; ``inf`` if a hard marginal is violated."""
    P = _entries(plan)
    X, Y = _points(source), _points(target)
    a, b = _weights(a), _weights(b)
    if P.shape != (X.shape[0], Y.shape[0]) or P.shape != (a.size, b.size):
        raise DimensionMismatch("plan, clouds and measures disagree in size")
    M = cost_map.matrix if isinstance(cost_map, LinearCostMap) else np.asarray(cost_map, dtype=float)
    if M.shape != (Y.shape[1], X.shape[1]):
        raise DimensionMismatch(f"cost map shape {M.shape}, expected {(Y.shape[1], X.shape[1])}")
    pen = _penalties(P, a, b, entropy1, entropy2, epsilon)
    if math.isinf(pen):
        return math.inf
    linear = -float(np.sum(cross_correlation(P, X, Y) * M))
    return linear + pen


def reduced_objective(plan, source, target, a, b, entropy1, entropy2, epsilon, radius) -> float:
    """``J`` with the cost map already minimized out: ``-r ||C(P)||_F + penalties``."""
    P = _entries(plan)
    pen = _penalties(P, _weights(a), _weights(b), entropy1, entropy2, epsilon)
    if math.isinf(pen):
        return math.inf
    return -radius * float(np.linalg.norm(cross_correlation(P, source, target))) + pen


def stripped_objective(plan, cost_map, source, target, a, b, entropy1, entropy2, epsilon) -> float:
    """``J`` minus its entropic term ``eps * KL(P | a b^T)``."""
    J = objective(plan, cost_map, source, target, a, b, entropy1, entropy2, epsilon)
    return J - epsilon * kl_plan(_entries(plan), _weights(a), _weights(b))


def initial_map(init, X, Y, a, b, radius) -> LinearCostMap:
    q, p = Y.shape[1], X.shape[1]
    if init == "zero":
        return LinearCostMap(np.zeros((q, p)), radius)
    if init == "product":
        return m_update(cross_correlation(np.outer(a, b) / b.sum(), X, Y), radius)
    _, seed = init
    G = np.random.default_rng(seed).standard_normal((q, p))
    return m_update(G, radius)


def solve_cruot(
    source: PointCloud,
    a: DiscreteMeasure,
    target: PointCloud,
    b: DiscreteMeasure,
    config: SolveConfig,
    init_map: Optional[LinearCostMap] = None,
) -> SolveResult:
    """Alternate Sinkhorn plan updates with closed-form cost-map updates.

    ``objective_trace[k]`` is ``J`` after the k-th cost-map update. The run
    stops when the relative change of ``J`` falls below ``config.outer_tol``
    or after ``config.max_outer_iters`` steps; in the latter case the result
    is flagged ``converged=False``. ``config.standardize`` is a loading-time
    option and is ignored here.
    """
    validate(source, a)
    validate(target, b)
    X, Y = source.points, target.points
    wa, wb = a.weights, b.weights
    e1, e2, eps, r = config.entropy1, config.entropy2, config.epsilon, config.radius

    if init_map is not None:
        if init_map.matrix.shape != (Y.shape[1], X.shape[1]):
            raise DimensionMismatch("initial cost map has the wrong shape")
        cost_map = LinearCostMap(init_map.matrix * min(1.0, r / max(init_map.frobenius_norm, 1e-300)), r)
    else:
        cost_map = initial_map(config.m_init, X, Y, wa, wb, r)

    trace: List[float] = []
    sink_iters: List[int] = []
    state: Optional[SinkhornState] = None
    plan: Optional[CouplingMatrix] = None
    converged = False
    for k in range(1, config.max_outer_iters + 1):
        C = cost_map.cost_matrix(X, Y)
        plan, state = solve_uot(
            C,
            wa,
            wb,
            e1,
            e2,
            eps,
            tol=config.sinkhorn_tol,
            max_iters=config.max_sinkhorn_iters,
            warm_start=state if config.warm_start else None,
            newton_after=config.newton_after,
        )
        sink_iters.append(state.iters)
        cost_map = m_update(cross_correlation(plan, X, Y), r)
        J = objective(plan, cost_map, X, Y, wa, wb, e1, e2, eps)
        trace.append(J)
        log.debug("outer %d: J=%.12g sinkhorn_iters=%d", k, J, state.iters)
        if k > 1:
            prev = trace[-2]
            if math.isfinite(J) and math.isfinite(prev) and abs(J - prev) < config.outer_tol * (1 + abs(prev)):
                converged = True
                break
    if not converged:
        log.info("BCD hit the outer iteration cap (%d)", config.max_outer_iters)

    return SolveResult(
        cost_map=cost_map,
        plan=plan,
        objective_trace=tuple(trace),
        converged=converged,
        outer_iters_used=len(trace),
        marginal_residuals=marginal_residual(plan, wa, wb),
        sinkhorn_iters=tuple(sink_iters),
    )


def epsilon_sweep(
    source: PointCloud,
    a: DiscreteMeasure,
    target: PointCloud,
    b: DiscreteMeasure,
    config: SolveConfig,
    epsilons: Sequence[float],
) -> List[Tuple[float, float]]:
    """Solve along a descending epsilon schedule, warm-starting the cost map.

    Returns ``(epsilon, J - epsilon * KL)`` for each schedule point.
    """
    eps_list = [float(e) for e in epsilons]
    if any(e <= 0 for e in eps_list):
        raise ValueError("epsilons must be positive")
    if any(e2 > e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        raise ValueError("epsilons must be sorted in descending order")
    out = []
    init = None
    for eps in eps_list:
        res = solve_cruot(source, a, target, b, replace(config, epsilon=eps), init_map=init)
        init = res.cost_map
        val = stripped_objective(
            res.plan, res.cost_map, source, target, a, b, config.entropy1, config.entropy2, eps
        )
        out.append((eps, val))
    return out
