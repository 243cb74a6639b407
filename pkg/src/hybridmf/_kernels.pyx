# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled loops over rating entries and similarity pairs.

Every reduction runs strictly left to right, in the order the entries are
given, so results are bit-identical to a naive Python loop. Built with
``-ffp-contract=off``: no fused multiply-add.
"""

from libc.stdint cimport int64_t


def rating_sse(const int64_t[::1] rows, const int64_t[::1] cols, const double[::1] vals,
               const double[:, ::1] P, const double[:, ::1] Q):
    cdef Py_ssize_t e, k, d = P.shape[1]
    cdef int64_t u, i
    cdef double dot, err, total = 0.0
    with nogil:
        for e in range(rows.shape[0]):
            u = rows[e]
            i = cols[e]
            dot = 0.0
            for k in range(d):
                dot = dot + P[u, k] * Q[i, k]
            err = vals[e] - dot
            total = total + err * err
    return total


def frob_sq(const double[:, ::1] A):
    cdef Py_ssize_t r, k
    cdef double total = 0.0
    with nogil:
        for r in range(A.shape[0]):
            for k in range(A.shape[1]):
                total = total + A[r, k] * A[r, k]
    return total


def pair_sse(const int64_t[::1] prow, const int64_t[::1] pcol, const double[::1] pval,
             const double[:, ::1] Q):
    cdef Py_ssize_t e, k, d = Q.shape[1]
    cdef int64_t j, n
    cdef double dot, err, total = 0.0
    with nogil:
        for e in range(prow.shape[0]):
            j = prow[e]
            n = pcol[e]
            dot = 0.0
            for k in range(d):
                dot = dot + Q[j, k] * Q[n, k]
            err = pval[e] - dot
            total = total + err * err
    return total


def rating_grad(const int64_t[::1] rows, const int64_t[::1] cols, const double[::1] vals,
                const double[:, ::1] P, const double[:, ::1] Q,
                double[:, ::1] dP, double[:, ::1] dQ):
    """Accumulate ``-e_ui Q_i`` into ``dP_u`` and ``-e_ui P_u`` into ``dQ_i``."""
    cdef Py_ssize_t e, k, d = P.shape[1]
    cdef int64_t u, i
    cdef double dot, err
    with nogil:
        for e in range(rows.shape[0]):
            u = rows[e]
            i = cols[e]
            dot = 0.0
            for k in range(d):
                dot = dot + P[u, k] * Q[i, k]
            err = vals[e] - dot
            for k in range(d):
                dP[u, k] -= err * Q[i, k]
                dQ[i, k] -= err * P[u, k]


def pair_grad(const int64_t[::1] prow, const int64_t[::1] pcol, const double[::1] pval,
              const double[:, ::1] Q, double[:, ::1] dQ, double coef):
    """Accumulate the gradient of ``coef/2 * sum (s - Q_j.Q_n)^2`` over ordered pairs."""
    cdef Py_ssize_t e, k, d = Q.shape[1]
    cdef int64_t j, n
    cdef double dot, g
    with nogil:
        for e in range(prow.shape[0]):
            j = prow[e]
            n = pcol[e]
            dot = 0.0
            for k in range(d):
                dot = dot + Q[j, k] * Q[n, k]
            g = coef * (pval[e] - dot)
            for k in range(d):
                dQ[j, k] -= g * Q[n, k]
                dQ[n, k] -= g * Q[j, k]
