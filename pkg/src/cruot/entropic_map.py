"""Entropic estimate of the transport map from a solved (M, P) pair.

Given the plan ``P`` and cost map ``M`` from an outer solve, the map is fitted
by a balanced entropic OT problem between the pushed-forward row marginal
(atoms ``M x_i``) and the column marginal (atoms ``y_j``) with cost
``-<y', y>``. Evaluating the map at ``x`` is then a softmax-weighted
barycenter of the target atoms::

    T(x) = sum_j y_j w_j(x) / sum_j w_j(x),
    w_j(x) = b_j exp((g_j + <M x, y_j>) / eps)
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .core_types import (
    CruotError,
    DegenerateMarginal,
    DimensionMismatch,
    EntropySpec,
    LinearCostMap,
    NonFiniteEntry,
    PointCloud,
    SolveResult,
)
from .sinkhorn import DEFAULT_MAX_ITERS, DEFAULT_TOL, solve_uot

# marginal entries below this are treated as vanished mass
MIN_MARGINAL = 1e-300


class NotConverged(CruotError, RuntimeError):
    pass


@dataclass(frozen=True)
class EntropicMapModel:
    cost_map: LinearCostMap
    target_points: np.ndarray
    target_weights: np.ndarray
    potential_g: np.ndarray
    inner_epsilon: float
    outer_epsilon: Optional[float] = None
    converged: bool = True

    def __post_init__(self):
        Y = np.atleast_2d(np.asarray(self.target_points, dtype=float))
        w = np.asarray(self.target_weights, dtype=float).ravel()
        g = np.asarray(self.potential_g, dtype=float).ravel()
        if not (Y.shape[0] == w.size == g.size):
            raise DimensionMismatch("target points, weights and potential differ in length")
        if Y.shape[1] != self.cost_map.matrix.shape[0]:
            raise DimensionMismatch("target dimension does not match the cost map")
        if np.any(w <= 0):
            raise DegenerateMarginal("target weights must be strictly positive")
        if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(w)) and np.all(np.isfinite(g))):
            raise NonFiniteEntry("map model has non-finite entries")
        if not self.inner_epsilon > 0:
            raise ValueError("inner epsilon must be positive")
        for name, arr in (("target_points", Y), ("target_weights", w), ("potential_g", g)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def source_dim(self) -> int:
        return self.cost_map.matrix.shape[1]

    def with_target_weights(self, weights) -> "EntropicMapModel":
        return EntropicMapModel(
            self.cost_map,
            self.target_points,
            weights,
            self.potential_g,
            self.inner_epsilon,
            self.outer_epsilon,
            self.converged,
        )


def fit_map(
    solve_result: SolveResult,
    source,
    target,
    inner_epsilon: float,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    outer_epsilon: Optional[float] = None,
    strict: bool = False,
) -> EntropicMapModel:
    """Fit the inner balanced problem and keep its target potential.

    Both marginals of the outer plan are rescaled to unit mass before the
    inner solve; the resulting map does not depend on that scale. With
    ``strict=True`` an unconverged inner solve raises :class:`NotConverged`,
    otherwise it only warns and the model is flagged.
    """
    X = source.points if isinstance(source, PointCloud) else np.atleast_2d(np.asarray(source, dtype=float))
    Y = target.points if isinstance(target, PointCloud) else np.atleast_2d(np.asarray(target, dtype=float))
    P = solve_result.plan.entries
    if P.shape != (X.shape[0], Y.shape[0]):
        raise DimensionMismatch(f"plan shape {P.shape} vs clouds ({X.shape[0]}, {Y.shape[0]})")
    row, col = P.sum(axis=1), P.sum(axis=0)
    if row.min() < MIN_MARGINAL or col.min() < MIN_MARGINAL:
        raise DegenerateMarginal("a marginal of the outer plan has vanished; the pushforward is not fully supported")
    a = row / row.sum()
    b = col / col.sum()
    M = solve_result.cost_map
    C = M.cost_matrix(X, Y)
    balanced = EntropySpec.balanced()
    _, state = solve_uot(C, a, b, balanced, balanced, inner_epsilon, tol=tol, max_iters=max_iters)
    if not state.converged:
        msg = f"inner Sinkhorn did not converge in {state.iters} iterations (eps={inner_epsilon})"
        if strict:
            raise NotConverged(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return EntropicMapModel(
        cost_map=M,
        target_points=Y,
        target_weights=b,
        potential_g=state.g,
        inner_epsilon=float(inner_epsilon),
        outer_epsilon=outer_epsilon,
        converged=state.converged,
    )


def evaluate_map(model: EntropicMapModel, x) -> np.ndarray:
    """Map one point ``(p,)`` or a batch ``(n, p)`` into the target space."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.source_dim:
        raise DimensionMismatch(f"point dimension {X.shape[1]}, map expects {model.source_dim}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteEntry("cannot map non-finite points")
    Y = model.target_points
    S = model.cost_map.push(X) @ Y.T
    h = model.potential_g + model.inner_epsilon * np.log(model.target_weights)
    out = kernels.softmax_barycenters(S, h, model.inner_epsilon, Y)
    return out[0] if single else out


def map_weights(model: EntropicMapModel, x) -> np.ndarray:
    """Normalized barycentric weights ``sigma_j(x)`` (rows sum to one)."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    A = model.cost_map.push(X) @ model.target_points.T
    A = (A + model.potential_g[None, :]) / model.inner_epsilon + np.log(model.target_weights)[None, :]
    A -= A.max(axis=1, keepdims=True)
    W = np.exp(A)
    return W / W.sum(axis=1, keepdims=True)


def align(model: EntropicMapModel, source: PointCloud) -> PointCloud:
    """Map every source point; labels are carried over unchanged."""
    if source.dim != model.source_dim:
        raise DimensionMismatch(f"source dimension {source.dim}, map expects {model.source_dim}")
    return PointCloud(evaluate_map(model, source.points), source.labels, source.name)


def pushforward_within_ball(model: EntropicMapModel, source_points, atol: float = 1e-9) -> bool:
    """Check ``||M x_i|| <= r max_i ||x_i||`` for all source points."""
    X = np.atleast_2d(np.asarray(source_points, dtype=float))
    bound = model.cost_map.radius * np.linalg.norm(X, axis=1).max()
    return bool(np.all(np.linalg.norm(model.cost_map.push(X), axis=1) <= bound + atol))
