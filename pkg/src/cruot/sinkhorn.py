"""Log-domain entropic Sinkhorn for (un)balanced OT with a fixed cost.

The plan is parametrized against the product reference ``a b^T``::

    P[i, j] = a[i] b[j] exp((f[i] + g[j] - C[i, j]) / eps)

and the dual potentials are updated by exact block maximization. For a
``lam * KL`` marginal penalty the softmin is damped by ``lam / (lam + eps)``;
for the hard constraint the damping is 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import kernels
from .core_types import (
    CouplingMatrix,
    DimensionMismatch,
    DiscreteMeasure,
    EntropySpec,
    NonFiniteEntry,
    NumericalOverflow,
)
from .divergence import kl_plan, phi_penalty

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITERS = 10000
# plain sweeps before switching to Newton steps on the dual
DEFAULT_NEWTON_AFTER = 200
MAX_NEWTON_STEPS = 60


@dataclass(frozen=True)
class SinkhornState:
    f: np.ndarray
    g: np.ndarray
    iters: int = 0
    potential_delta: float = math.inf
    converged: bool = False
    newton_steps: int = 0


def _weights(w) -> np.ndarray:
    if isinstance(w, DiscreteMeasure):
        return w.weights
    w = np.asarray(w, dtype=float).ravel()
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("marginal weights must be finite and strictly positive")
    return w


def plan_from_potentials(C, a, b, f, g, epsilon) -> np.ndarray:
    logP = (f[:, None] + g[None, :] - C) / epsilon
    logP += np.log(a)[:, None] + np.log(b)[None, :]
    P = np.exp(logP)
    if not np.all(np.isfinite(P)):
        raise NumericalOverflow("transport plan overflowed; potentials are too large for this epsilon")
    return P


def solve_uot(
    cost,
    a,
    b,
    entropy1: EntropySpec,
    entropy2: EntropySpec,
    epsilon: float,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    warm_start: Optional[SinkhornState] = None,
    newton_after: Optional[int] = DEFAULT_NEWTON_AFTER,
) -> Tuple[CouplingMatrix, SinkhornState]:
    """Minimize ``<C, P> + D1(P 1 | a) + D2(P^T 1 | b) + eps KL(P | a b^T)``.

    Iteration stops once the sup-norm change of both potentials, measured
    in units of ``epsilon``, drops below ``tol``; this bounds the relative
    marginal error of the returned plan by roughly ``tol``. Running out of
    iterations is not an error: the state comes back with
    ``converged=False``.

    Sinkhorn slows to a crawl once the plan becomes nearly sparse (small
    ``epsilon`` relative to the cost range). After every ``newton_after``
    unconverged sweeps, safeguarded Newton steps on the concave dual are
    tried; the following sweeps certify convergence with the same stopping
    test. ``newton_after=None`` gives plain alternating updates.

    Raises:
        NumericalOverflow: a potential or plan entry became non-finite.
    """
    C = np.ascontiguousarray(cost, dtype=float)
    a = _weights(a)
    b = _weights(b)
    if C.shape != (a.size, b.size):
        raise DimensionMismatch(f"cost shape {C.shape} vs marginals ({a.size}, {b.size})")
    if not np.all(np.isfinite(C)):
        raise NonFiniteEntry("cost matrix contains NaN or Inf")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")

    eps_log_a = epsilon * np.log(a)
    eps_log_b = epsilon * np.log(b)
    damp1 = entropy1.damping(epsilon)
    damp2 = entropy2.damping(epsilon)

    if warm_start is not None and warm_start.f.shape == a.shape and warm_start.g.shape == b.shape:
        f = np.array(warm_start.f, dtype=float)
        g = np.array(warm_start.g, dtype=float)
    else:
        f = np.zeros(a.size)
        g = np.zeros(b.size)

    burst = max_iters if newton_after is None else max(1, newton_after)
    it, newton_steps = 0, 0
    delta, converged, finite = math.inf, False, True
    while it < max_iters:
        more, delta, converged, finite = kernels.sinkhorn_loop(
            C, eps_log_a, eps_log_b, epsilon, damp1, damp2, f, g, tol, min(burst, max_iters - it)
        )
        it += more
        if converged or not finite or it >= max_iters:
            break
        # a fresh Newton attempt after every burst; sweeps in between repair
        # states Newton cannot start from (rows whose mass underflowed)
        newton_steps += _newton_refine(C, a, b, entropy1, entropy2, epsilon, f, g, tol / 10)
    if not finite:
        raise NumericalOverflow(f"non-finite dual potential at Sinkhorn iteration {it}")
    if not converged:
        log.debug("Sinkhorn stopped after %d iterations, delta/eps=%.3e", it, delta / epsilon)

    P = plan_from_potentials(C, a, b, f, g, epsilon)
    state = SinkhornState(
        f=f, g=g, iters=it, potential_delta=float(delta), converged=converged, newton_steps=newton_steps
    )
    return CouplingMatrix(P), state


def _conjugate_parts(spec: EntropySpec, pot: np.ndarray):
    """Value, first and second derivative of ``-phi^*(-pot)`` per atom."""
    if spec.is_balanced:
        return pot, np.ones_like(pot), np.zeros_like(pot)
    e = np.exp(-pot / spec.lam)
    return -spec.lam * (e - 1.0), e, -e / spec.lam


def _plan(C, a, b, eps, f, g):
    with np.errstate(over="ignore", under="ignore"):
        return np.exp((f[:, None] + g[None, :] - C) / eps) * a[:, None] * b[None, :]


def _conjugate_increment(spec: EntropySpec, pot: np.ndarray, step: np.ndarray) -> np.ndarray:
    """``-phi^*(-(pot + step)) + phi^*(-pot)`` per atom, without cancellation."""
    if spec.is_balanced:
        return step
    return -spec.lam * np.exp(-pot / spec.lam) * np.expm1(-step / spec.lam)


def _dual_increment(C, a, b, e1, e2, eps, f, g, df, dg, P):
    """Change of the dual along ``(df, dg)`` and the new plan.

    Summing per-entry differences keeps the increment accurate far below
    the rounding level of the dual value itself, which matters once
    atoms with tiny weights are all that is left to fix.
    """
    P_new = _plan(C, a, b, eps, f + df, g + dg)
    with np.errstate(over="ignore", invalid="ignore"):
        inc = (
            np.dot(a, _conjugate_increment(e1, f, df))
            + np.dot(b, _conjugate_increment(e2, g, dg))
            - eps * np.sum(P_new - P)
        )
    return float(inc), P_new


def _newton_refine(C, a, b, e1, e2, eps, f, g, tol, max_steps=MAX_NEWTON_STEPS) -> int:
    """Damped Newton ascent on the dual, in place on ``f`` and ``g``.

    The linear system is reduced to the ``m x m`` Schur complement, which
    is Jacobi-scaled before solving so that atoms of very different weight
    are treated alike; a relative ridge removes the null direction (the
    potential gauge of the hard-constrained problem). Steps are
    backtracked until the dual increases, so every accepted step keeps
    the ascent property. Returns the number of accepted steps.
    """
    P = _plan(C, a, b, eps, f, g)
    for step in range(max_steps):
        r, c = P.sum(axis=1), P.sum(axis=0)
        _, d1, h1 = _conjugate_parts(e1, f)
        _, d2, h2 = _conjugate_parts(e2, g)
        grad_f = a * d1 - r
        grad_g = b * d2 - c
        if max(np.max(np.abs(grad_f) / a), np.max(np.abs(grad_g) / b)) < tol:
            return step
        diag_f = r - eps * a * h1
        diag_g = c - eps * b * h2
        if np.any(diag_f <= 0) or np.any(diag_g <= 0):
            return step
        PD = P / diag_f[:, None]
        S = np.diag(diag_g) - P.T @ PD
        sd = np.diag(S).copy()
        if np.any(sd <= 0):
            sd = diag_g
        scale = 1.0 / np.sqrt(sd)
        S_hat = S * scale[:, None] * scale[None, :]
        S_hat[np.diag_indices_from(S_hat)] += 1e-13
        rhs = eps * grad_g - PD.T @ (eps * grad_f)
        try:
            dg = scale * np.linalg.solve(S_hat, scale * rhs)
        except np.linalg.LinAlgError:
            return step
        df = (eps * grad_f - P @ dg) / diag_f
        slope = float(np.dot(grad_f, df) + np.dot(grad_g, dg))
        if not np.isfinite(slope):
            return step
        # near convergence the computed slope is rounding noise and may come
        # out slightly negative; the step must then at least not lose ground
        slope = max(slope, 0.0)
        t = 1.0
        while True:
            inc, P_new = _dual_increment(C, a, b, e1, e2, eps, f, g, t * df, t * dg, P)
            if np.isfinite(inc) and inc >= 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-10:
                return step
        f += t * df
        g += t * dg
        P = P_new
    return max_steps


def uot_objective(plan, cost, a, b, entropy1, entropy2, epsilon) -> float:
    """Primal entropic UOT objective at ``plan`` (may be ``inf``)."""
    P = plan.entries if isinstance(plan, CouplingMatrix) else np.asarray(plan, dtype=float)
    a = _weights(a)
    b = _weights(b)
    pen1 = phi_penalty(entropy1, P.sum(axis=1), a)
    pen2 = phi_penalty(entropy2, P.sum(axis=0), b)
    if math.isinf(pen1) or math.isinf(pen2):
        return math.inf
    return float(np.sum(cost * P)) + pen1 + pen2 + epsilon * kl_plan(P, a, b)


def uot_dual(f, g, cost, a, b, entropy1, entropy2, epsilon) -> float:
    """Dual objective; nondecreasing along the Sinkhorn iterates."""
    a = _weights(a)
    b = _weights(b)

    def conj_term(spec, pot, w):
        # -phi^*(-pot) integrated against w
        if spec.is_balanced:
            return float(np.dot(pot, w))
        return float(-spec.lam * np.dot(w, np.expm1(-pot / spec.lam)))

    P = plan_from_potentials(np.asarray(cost, dtype=float), a, b, f, g, epsilon)
    return conj_term(entropy1, f, a) + conj_term(entropy2, g, b) - epsilon * (P.sum() - a.sum() * b.sum())


def marginal_residual(plan, a, b) -> Tuple[float, float]:
    """Relative L1 errors of the row and column marginals."""
    P = plan.entries if isinstance(plan, CouplingMatrix) else np.asarray(plan, dtype=float)
    a = np.asarray(a.weights if isinstance(a, DiscreteMeasure) else a, dtype=float)
    b = np.asarray(b.weights if isinstance(b, DiscreteMeasure) else b, dtype=float)
    if P.shape != (a.size, b.size):
        raise DimensionMismatch(f"plan shape {P.shape} vs marginals ({a.size}, {b.size})")
    return (
        float(np.abs(P.sum(axis=1) - a).sum() / a.sum()),
        float(np.abs(P.sum(axis=0) - b).sum() / b.sum()),
    )
