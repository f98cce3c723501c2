"""Entropy functions and the phi-divergences built from them.

Conventions: ``phi_kl(0) = 1`` and a reference atom with zero mass and zero
argument contributes nothing. Infeasibility is reported as ``math.inf``.
"""

from __future__ import annotations

import math

import numpy as np

from .core_types import CouplingMatrix, DimensionMismatch, EntropySpec, NegativeArgument

# relative tolerance for the hard marginal constraint
BALANCED_RTOL = 1e-9


# below this |t - 1| the series is used: the closed form loses ~1e-16/|t-1| relative
_SERIES_RADIUS = 0.05
_SERIES_COEF = np.array([1.0 / (k * (k - 1)) for k in range(2, 18)])


def _phi_from_u(u):
    """``phi_kl(1 + u)`` for ``u >= -1``, accurate to a few ulp near ``u = 0``."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < _SERIES_RADIUS
    # phi(1+u) = u^2 * sum_{k>=2} (-u)^(k-2) / (k (k-1))
    v = np.where(small, -u, 0.0)
    acc = np.zeros_like(u)
    for c in _SERIES_COEF[::-1]:
        acc = acc * v + c
    t = 1.0 + u
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)) - u, 1.0)
    us = np.where(small, u, 0.0)
    return np.where(small, us * us * acc, direct)


def phi_kl(t):
    """``t log t - t + 1``, extended by continuity to ``phi_kl(0) = 1``."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise NegativeArgument("phi_kl is defined on [0, inf)")
    out = _phi_from_u(arr - 1.0)
    return float(out) if out.ndim == 0 else out


def _pair(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch(f"shapes differ: {p.shape} vs {q.shape}")
    return p, q


def kl_divergence(p, q) -> float:
    """Generalized KL divergence ``sum_i q_i phi_kl(p_i / q_i)``.

    Works on arrays of any (matching) shape. Returns ``inf`` when some
    ``p_i > 0`` sits on a ``q_i = 0``.
    """
    p, q = _pair(p, q)
    if np.any(p < 0) or np.any(q < 0):
        raise NegativeArgument("divergence arguments must be nonnegative")
    if np.any((q == 0) & (p > 0)):
        return math.inf
    pos_q = q > 0
    pq, qq = p[pos_q], q[pos_q]
    # termwise q * phi(p/q) avoids cancelling sums when p is close to q
    return float(np.sum(qq * _phi_from_u((pq - qq) / qq)))


def balanced_match(p, q, rtol: float = BALANCED_RTOL) -> bool:
    p, q = _pair(p, q)
    return bool(np.all(np.abs(p - q) <= rtol * np.abs(q)))


def phi_penalty(spec: EntropySpec, p, q) -> float:
    """Marginal penalty ``D_phi(p | q)`` for the given entropy spec."""
    p, q = _pair(p, q)
    if spec.is_balanced:
        return 0.0 if balanced_match(p, q) else math.inf
    return spec.lam * kl_divergence(p, q)


def kl_plan(plan, a, b) -> float:
    """``KL(P | a b^T)`` over the full grid."""
    P = plan.entries if isinstance(plan, CouplingMatrix) else np.asarray(plan, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if P.shape != (a.size, b.size):
        raise DimensionMismatch(f"plan shape {P.shape} vs marginals ({a.size}, {b.size})")
    return kl_divergence(P, np.outer(a, b))
