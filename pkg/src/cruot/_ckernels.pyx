# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled log-sum-exp kernels and the fused Sinkhorn loop.

The per-row loops live in ``_vexp.h`` so the C compiler can vectorize them,
including the exponential.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport log, fabs, isfinite, INFINITY

cnp.import_array()

cdef extern from "_vexp.h" nogil:
    double cruot_exp(double x)
    double cruot_row_lse(const double *c, const double *h, double inv, long m)
    void cruot_col_max(const double *c, double hi, double inv, double *mx, long m)
    void cruot_col_acc(const double *c, double hi, double inv, const double *mx, double *acc, long m)
    double cruot_softmax_row(const double *s, const double *h, double inv, double *w, long m)

# below this many cost entries threading costs more than it saves
cdef Py_ssize_t PARALLEL_MIN = 65536


def vexp(const double[::1] x):
    """Elementwise exponential with the compiled routine (for testing)."""
    out = np.empty(x.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        o[i] = cruot_exp(x[i])
    return out


cdef void _lse_rows_into(const double[:, ::1] C, const double[::1] h, double inv,
                         double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = C.shape[0], m = C.shape[1], i
    if n == 0:
        return
    if m == 0:
        for i in range(n):
            out[i] = -INFINITY
        return
    if n * m >= PARALLEL_MIN:
        for i in prange(n, schedule="static"):
            out[i] = cruot_row_lse(&C[i, 0], &h[0], inv, m)
    else:
        for i in range(n):
            out[i] = cruot_row_lse(&C[i, 0], &h[0], inv, m)


cdef void _lse_cols_into(const double[:, ::1] C, const double[::1] h, double inv,
                         double[::1] mx, double[::1] out) noexcept nogil:
    # row-major sweeps keep the access pattern contiguous
    cdef Py_ssize_t n = C.shape[0], m = C.shape[1], i, j
    if m == 0:
        return
    for j in range(m):
        mx[j] = -INFINITY
        out[j] = 0.0
    for i in range(n):
        cruot_col_max(&C[i, 0], h[i], inv, &mx[0], m)
    for j in range(m):
        # an all -inf column would poison the accumulation below
        if not mx[j] > -INFINITY:
            mx[j] = 0.0
    for i in range(n):
        cruot_col_acc(&C[i, 0], h[i], inv, &mx[0], &out[0], m)
    for j in range(m):
        out[j] = mx[j] + log(out[j])


def lse_rows(const double[:, ::1] C, const double[::1] h, double eps):
    out = np.empty(C.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        _lse_rows_into(C, h, 1.0 / eps, o)
    return out


def lse_cols(const double[:, ::1] C, const double[::1] h, double eps):
    out = np.empty(C.shape[1], dtype=np.float64)
    buf = np.empty(C.shape[1], dtype=np.float64)
    cdef double[::1] o = out
    cdef double[::1] b = buf
    with nogil:
        _lse_cols_into(C, h, 1.0 / eps, b, o)
    return out


def sinkhorn_loop(const double[:, ::1] C, const double[::1] eps_log_a, const double[::1] eps_log_b,
                  double eps, double damp1, double damp2, double[::1] f, double[::1] g,
                  double tol, Py_ssize_t max_iters):
    """Alternating dual updates, in place on ``f`` and ``g``.

    Returns ``(iters, delta, converged, finite)`` where ``delta`` is the last
    sup-norm potential change.
    """
    cdef Py_ssize_t n = C.shape[0], m = C.shape[1], i, j, it = 0
    cdef double inv = 1.0 / eps, delta = INFINITY, d, v
    cdef bint converged = False, finite = True
    hb_arr = np.empty(m); ha_arr = np.empty(n)
    lr_arr = np.empty(n); lc_arr = np.empty(m); mx_arr = np.empty(m)
    cdef double[::1] hb = hb_arr, ha = ha_arr, lr = lr_arr, lc = lc_arr, mx = mx_arr
    with nogil:
        while it < max_iters:
            it += 1
            delta = 0.0
            for j in range(m):
                hb[j] = g[j] + eps_log_b[j]
            _lse_rows_into(C, hb, inv, lr)
            for i in range(n):
                v = -damp1 * eps * lr[i]
                if not isfinite(v):
                    finite = False
                d = fabs(v - f[i])
                if d > delta:
                    delta = d
                f[i] = v
                ha[i] = v + eps_log_a[i]
            _lse_cols_into(C, ha, inv, mx, lc)
            for j in range(m):
                v = -damp2 * eps * lc[j]
                if not isfinite(v):
                    finite = False
                d = fabs(v - g[j])
                if d > delta:
                    delta = d
                g[j] = v
            if not finite:
                break
            if delta * inv < tol:
                converged = True
                break
    return it, delta, converged, finite


def softmax_barycenters(const double[:, ::1] S, const double[::1] h, double eps,
                        const double[:, ::1] Y):
    cdef Py_ssize_t n = S.shape[0], m = S.shape[1], q = Y.shape[1], i, j, k
    cdef double inv = 1.0 / eps, s, w
    out = np.zeros((n, q), dtype=np.float64)
    wbuf = np.empty(m, dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[::1] wb = wbuf
    if m == 0:
        return out
    with nogil:
        for i in range(n):
            s = cruot_softmax_row(&S[i, 0], &h[0], inv, &wb[0], m)
            for j in range(m):
                w = wb[j]
                for k in range(q):
                    o[i, k] += w * Y[j, k]
            for k in range(q):
                o[i, k] = o[i, k] / s
    return out
