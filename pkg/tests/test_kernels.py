import numpy as np
import pytest

from hybridmf import _kernels_py, kernels

COMPILED = "cython" in kernels.available()


def _problem(seed=0, m=7, n=9, d=3, nnz=30, npairs=40):
    rng = np.random.default_rng(seed)
    key = rng.choice(m * n, size=nnz, replace=False)
    rows, cols = np.divmod(np.sort(key), n)
    vals = rng.uniform(0, 5, nnz)
    P = rng.normal(size=(m, d))
    Q = rng.normal(size=(n, d))
    prow = rng.integers(0, n, npairs)
    pcol = rng.integers(0, n, npairs)
    pval = rng.random(npairs)
    return rows.astype(np.int64), cols.astype(np.int64), vals, P, Q, prow, pcol, pval


def test_python_backend_always_available():
    assert "python" in kernels.available()


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.use("fortran")


def test_python_sums_are_sequential():
    x = np.array([1e16, 1.0, -1e16, 1.0])
    # left-to-right: ((1e16 + 1) - 1e16) + 1 == 1
    assert _kernels_py._seq_sum(x) == 1.0
    assert _kernels_py.frob_sq(np.array([[3.0, 4.0]])) == 25.0


def test_rating_sse_hand_value(backend):
    K = kernels.active()
    P = np.array([[2.0]])
    Q = np.array([[3.0]])
    idx = np.array([0], dtype=np.int64)
    assert K.rating_sse(idx, idx, np.array([5.0]), P, Q) == 1.0


def test_pair_grad_hand_value(backend):
    K = kernels.active()
    Q = np.array([[1.0], [2.0]])
    dQ = np.zeros_like(Q)
    # d/dQ of 1/2 (0.5 - Q0.Q1)^2 for the single ordered pair (0, 1); residual -1.5
    K.pair_grad(np.array([0], dtype=np.int64), np.array([1], dtype=np.int64), np.array([0.5]), Q, dQ, 1.0)
    np.testing.assert_array_equal(dQ, [[1.5 * 2.0], [1.5 * 1.0]])


@pytest.mark.skipif(not COMPILED, reason="compiled kernels not built")
class TestBackendParity:
    @pytest.mark.parametrize("seed", range(5))
    def test_losses_bit_identical(self, seed):
        from hybridmf import _kernels as C
        rows, cols, vals, P, Q, prow, pcol, pval = _problem(seed)
        assert C.rating_sse(rows, cols, vals, P, Q) == _kernels_py.rating_sse(rows, cols, vals, P, Q)
        assert C.frob_sq(P) == _kernels_py.frob_sq(P)
        assert C.pair_sse(prow, pcol, pval, Q) == _kernels_py.pair_sse(prow, pcol, pval, Q)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradients_agree(self, seed):
        from hybridmf import _kernels as C
        rows, cols, vals, P, Q, prow, pcol, pval = _problem(seed)
        out = []
        for K in (C, _kernels_py):
            dP, dQ = np.zeros_like(P), np.zeros_like(Q)
            K.rating_grad(rows, cols, vals, P, Q, dP, dQ)
            K.pair_grad(prow, pcol, pval, Q, dQ, 0.3)
            out.append((dP, dQ))
        np.testing.assert_allclose(out[0][0], out[1][0], rtol=0, atol=1e-12)
        np.testing.assert_allclose(out[0][1], out[1][1], rtol=0, atol=1e-12)
