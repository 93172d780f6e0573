# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled curvature kernels for left-invariant metrics.

Everything here is per-call dense arithmetic on small n x n / n x n x n
arrays; the functions are evaluated at every Runge-Kutta stage, which is
why they are compiled. The pure-Python twin lives in ``_kernels_py`` and
must stay call-compatible.

Conventions: brackets [e_i, e_j] = sum_k c[k, i, j] e_k; the connection
array satisfies nabla_{e_i} e_j = sum_k gamma[k, i, j] e_k.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

from .errors import NonSPDMetricError

cnp.import_array()


cdef int _cholesky(const double[:, ::1] a, double[:, ::1] L, int n) noexcept nogil:
    """Lower Cholesky factor of a; returns -1 if a is not SPD."""
    cdef int i, j, k
    cdef double s
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= 0.0:
            return -1
        L[j, j] = sqrt(s)
        for i in range(j + 1, n):
            s = a[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    return 0


cdef void _lower_inverse(double[:, ::1] L, double[:, ::1] Linv, int n) noexcept nogil:
    cdef int i, k, col
    cdef double s
    for col in range(n):
        for i in range(col, n):
            s = 1.0 if i == col else 0.0
            for k in range(col, i):
                s -= L[i, k] * Linv[k, col]
            Linv[i, col] = s / L[i, i]


cdef void _koszul(const double[:, :, ::1] c, const double[:, ::1] g, double[:, ::1] ginv,
                  double[:, :, ::1] gamma, double[:, :, ::1] K, int n) noexcept nogil:
    """gamma[k,i,j] from the Koszul formula for left-invariant frames."""
    cdef int i, j, k, l, m
    cdef double s
    for i in range(n):
        for j in range(n):
            for l in range(n):
                s = 0.0
                for m in range(n):
                    s += c[m, i, j] * g[m, l] - c[m, j, l] * g[m, i] + c[m, l, i] * g[m, j]
                K[i, j, l] = 0.5 * s
    for k in range(n):
        for i in range(n):
            for j in range(n):
                s = 0.0
                for l in range(n):
                    s += ginv[k, l] * K[i, j, l]
                gamma[k, i, j] = s


cdef void _ricci_from_gamma(const double[:, :, ::1] c, double[:, :, ::1] gamma,
                            double[:, ::1] ric, int n) noexcept nogil:
    """Unsymmetrized Ricci: trace over the first slot of the curvature tensor."""
    cdef int i, j, k, l, m
    cdef double s
    for j in range(n):
        for k in range(n):
            s = 0.0
            for i in range(n):
                for l in range(n):
                    s += gamma[i, i, l] * gamma[l, j, k] - gamma[i, j, l] * gamma[l, i, k]
                for m in range(n):
                    s -= c[m, i, j] * gamma[i, m, k]
            ric[j, k] = s


def connection(cnp.ndarray c, cnp.ndarray g):
    """Connection coefficients gamma[k,i,j] of the metric g."""
    cdef int n = g.shape[0]
    cdef const double[:, :, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[:, ::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef cnp.ndarray L = np.zeros((n, n))
    cdef cnp.ndarray Linv = np.zeros((n, n))
    if _cholesky(gv, L, n) != 0:
        raise NonSPDMetricError("metric is not symmetric positive definite")
    _lower_inverse(L, Linv, n)
    ginv = Linv.T @ Linv
    cdef cnp.ndarray gamma = np.empty((n, n, n))
    cdef cnp.ndarray K = np.empty((n, n, n))
    cdef double[:, ::1] ginv_v = ginv
    _koszul(cv, gv, ginv_v, gamma, K, n)
    return gamma


def ricci_raw(cnp.ndarray c, cnp.ndarray g):
    """Ricci tensor before symmetrization (exposes the roundoff asymmetry)."""
    cdef int n = g.shape[0]
    cdef const double[:, :, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[:, ::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef cnp.ndarray L = np.zeros((n, n))
    cdef cnp.ndarray Linv = np.zeros((n, n))
    if _cholesky(gv, L, n) != 0:
        raise NonSPDMetricError("metric is not symmetric positive definite")
    _lower_inverse(L, Linv, n)
    ginv = Linv.T @ Linv
    cdef cnp.ndarray gamma = np.empty((n, n, n))
    cdef cnp.ndarray K = np.empty((n, n, n))
    cdef cnp.ndarray ric = np.empty((n, n))
    cdef double[:, ::1] ginv_v = ginv
    _koszul(cv, gv, ginv_v, gamma, K, n)
    _ricci_from_gamma(cv, gamma, ric, n)
    return ric


def curvature_core(cnp.ndarray c, cnp.ndarray g):
    """All pointwise curvature data of (c, g).

    Returns (ricci, B, R, ric2, dev) where ricci is the symmetrized Ricci
    bilinear form, B = Linv ricci Linv^T is its symmetric-gauge version
    (same eigenvalues as g^{-1} ricci), R = tr B, ric2 = |Ric|^2_g and
    dev = |Ric - (R/n) g|^2_g. ric2 and dev are sums of squares of B
    entries, hence nonnegative by construction.
    """
    cdef int n = g.shape[0]
    cdef const double[:, :, ::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef const double[:, ::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef cnp.ndarray L_arr = np.zeros((n, n))
    cdef cnp.ndarray Linv_arr = np.zeros((n, n))
    cdef double[:, ::1] L = L_arr
    cdef double[:, ::1] Linv = Linv_arr
    if _cholesky(gv, L, n) != 0:
        raise NonSPDMetricError("metric is not symmetric positive definite")
    _lower_inverse(L, Linv, n)

    cdef cnp.ndarray gamma = np.empty((n, n, n))
    cdef cnp.ndarray K = np.empty((n, n, n))
    cdef cnp.ndarray raw_arr = np.empty((n, n))
    cdef cnp.ndarray ginv_arr = np.empty((n, n))
    cdef double[:, ::1] ginv = ginv_arr
    cdef int i, j, k
    cdef double s
    with nogil:
        for i in range(n):
            for j in range(n):
                s = 0.0
                for k in range(max(i, j), n):
                    s += Linv[k, i] * Linv[k, j]
                ginv[i, j] = s
    cdef double[:, :, ::1] gamma_v = gamma
    cdef double[:, :, ::1] K_v = K
    cdef double[:, ::1] raw = raw_arr
    _koszul(cv, gv, ginv, gamma_v, K_v, n)
    _ricci_from_gamma(cv, gamma_v, raw, n)

    cdef cnp.ndarray ric_arr = np.empty((n, n))
    cdef cnp.ndarray B_arr = np.empty((n, n))
    cdef double[:, ::1] ric = ric_arr
    cdef double[:, ::1] B = B_arr
    cdef double R = 0.0, ric2 = 0.0, dev = 0.0
    cdef double t, b
    with nogil:
        for i in range(n):
            for j in range(n):
                ric[i, j] = 0.5 * (raw[i, j] + raw[j, i])
        # B = Linv ric Linv^T, via tmp = ric Linv^T stored in raw
        for i in range(n):
            for j in range(n):
                s = 0.0
                for k in range(n):
                    s += ric[i, k] * Linv[j, k]
                raw[i, j] = s
        for i in range(n):
            for j in range(n):
                s = 0.0
                for k in range(n):
                    s += Linv[i, k] * raw[k, j]
                B[i, j] = s
        for i in range(n):
            R += B[i, i]
        for i in range(n):
            for j in range(n):
                b = B[i, j]
                ric2 += b * b
                t = b - (R / n if i == j else 0.0)
                dev += t * t
    return ric_arr, B_arr, R, ric2, dev
