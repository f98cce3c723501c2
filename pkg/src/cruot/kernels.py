"""Backend selection for the inner kernels.

The compiled extension is used when it imports; set ``CRUOT_PURE_PYTHON=1``
to force the NumPy fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

BACKEND = "numpy"
_impl = _pykernels

if os.environ.get("CRUOT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass


def available_backends():
    names = {"numpy": _pykernels}
    try:
        from . import _ckernels

        names["cython"] = _ckernels
    except ImportError:
        pass
    return names


def set_backend(name: str) -> str:
    """Switch the active backend; returns the previous name."""
    global _impl, BACKEND
    impls = available_backends()
    if name not in impls:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(impls)}")
    previous = BACKEND
    _impl, BACKEND = impls[name], name
    return previous


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def lse_rows(C, h, eps):
    return _impl.lse_rows(_c(C), _c(h), float(eps))


def lse_cols(C, h, eps):
    return _impl.lse_cols(_c(C), _c(h), float(eps))


def softmax_barycenters(S, h, eps, Y):
    return _impl.softmax_barycenters(_c(S), _c(h), float(eps), _c(Y))


def sinkhorn_loop(C, eps_log_a, eps_log_b, eps, damp1, damp2, f, g, tol, max_iters):
    """Run Sinkhorn sweeps in place on the contiguous float arrays ``f``, ``g``."""
    return _impl.sinkhorn_loop(
        _c(C), _c(eps_log_a), _c(eps_log_b), float(eps), float(damp1), float(damp2), f, g, float(tol), int(max_iters)
    )
