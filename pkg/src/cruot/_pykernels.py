"""NumPy implementations of the inner kernels.

Used when the compiled extension is missing or ``CRUOT_PURE_PYTHON`` is set.
Signatures and results match :mod:`cruot._ckernels` to rounding.
"""

from __future__ import annotations

import numpy as np


def lse_rows(C: np.ndarray, h: np.ndarray, eps: float) -> np.ndarray:
    """``out[i] = log sum_j exp((h[j] - C[i, j]) / eps)``."""
    A = (h[None, :] - C) / eps
    mx = A.max(axis=1)
    return mx + np.log(np.exp(A - mx[:, None]).sum(axis=1))


def lse_cols(C: np.ndarray, h: np.ndarray, eps: float) -> np.ndarray:
    """``out[j] = log sum_i exp((h[i] - C[i, j]) / eps)``."""
    A = (h[:, None] - C) / eps
    mx = A.max(axis=0)
    return mx + np.log(np.exp(A - mx[None, :]).sum(axis=0))


def softmax_barycenters(S: np.ndarray, h: np.ndarray, eps: float, Y: np.ndarray) -> np.ndarray:
    """Row-wise softmax of ``(S + h) / eps`` applied to the rows of ``Y``."""
    A = (S + h[None, :]) / eps
    A -= A.max(axis=1, keepdims=True)
    W = np.exp(A)
    W /= W.sum(axis=1, keepdims=True)
    return W @ Y


def sinkhorn_loop(C, eps_log_a, eps_log_b, eps, damp1, damp2, f, g, tol, max_iters):
    """Alternating dual updates, in place on ``f`` and ``g``.

    Returns ``(iters, delta, converged, finite)``.
    """
    delta = np.inf
    it = 0
    while it < max_iters:
        it += 1
        f_new = -damp1 * eps * lse_rows(C, g + eps_log_b, eps)
        g_new = -damp2 * eps * lse_cols(C, f_new + eps_log_a, eps)
        finite = bool(np.all(np.isfinite(f_new)) and np.all(np.isfinite(g_new)))
        delta = max(np.max(np.abs(f_new - f)), np.max(np.abs(g_new - g)))
        f[:] = f_new
        g[:] = g_new
        if not finite:
            return it, delta, False, False
        if delta / eps < tol:
            return it, delta, True, True
    return it, delta, False, True
