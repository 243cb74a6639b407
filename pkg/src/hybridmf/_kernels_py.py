"""NumPy implementations of the compiled kernels.

Reductions use ``np.cumsum`` so the summation order is strictly sequential and
losses match the compiled kernels bit for bit. Gradient accumulation goes
through ``np.bincount`` and may differ from the compiled path in the last ulp.
"""

import numpy as np


def _seq_sum(x):
    return float(np.cumsum(x)[-1]) if len(x) else 0.0


def _row_dots(A, ia, B, ib):
    if len(ia) == 0:
        return np.zeros(0)
    return np.cumsum(A[ia] * B[ib], axis=1)[:, -1]


def rating_sse(rows, cols, vals, P, Q):
    err = vals - _row_dots(P, rows, Q, cols)
    return _seq_sum(err * err)


def frob_sq(A):
    flat = np.ascontiguousarray(A).ravel()
    return _seq_sum(flat * flat)


def pair_sse(prow, pcol, pval, Q):
    err = pval - _row_dots(Q, prow, Q, pcol)
    return _seq_sum(err * err)


def _scatter_sub(target, index, weights, source, source_index):
    n = target.shape[0]
    for k in range(target.shape[1]):
        target[:, k] -= np.bincount(index, weights=weights * source[source_index, k], minlength=n)


def rating_grad(rows, cols, vals, P, Q, dP, dQ):
    if len(rows) == 0:
        return
    err = vals - _row_dots(P, rows, Q, cols)
    _scatter_sub(dP, rows, err, Q, cols)
    _scatter_sub(dQ, cols, err, P, rows)


def pair_grad(prow, pcol, pval, Q, dQ, coef):
    if len(prow) == 0:
        return
    g = coef * (pval - _row_dots(Q, prow, Q, pcol))
    _scatter_sub(dQ, prow, g, Q, pcol)
    _scatter_sub(dQ, pcol, g, Q, prow)
