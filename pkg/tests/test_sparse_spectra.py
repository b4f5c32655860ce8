import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from ringsim import sparse_spectra as ss


def random_hermitian(n, seed, clusters=()):
    """Random Hermitian matrix with prescribed degenerate clusters at the bottom."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    vals = np.sort(rng.uniform(0, 10, n))
    i = 0
    for value, mult in clusters:
        vals[i : i + mult] = value
        i += mult
    vals = np.sort(vals)
    return (q * vals) @ q.conj().T, vals


def subspace_distance(a, b):
    """Largest principal-angle sine between the column spans of a and b."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    # ||(1 - P_b) Q_a||_2 avoids the sqrt(eps) floor of 1 - cos^2
    return float(np.linalg.norm(qa - qb @ (qb.conj().T @ qa), 2))


def test_diagonal_matrix():
    A = sp.diags(np.arange(1.0, 1001.0)).tocsr()
    res = ss.lowest_k(A, 3)
    np.testing.assert_allclose(res.values, [1, 2, 3], rtol=1e-12)


def test_random_hermitian_512_with_degenerate_cluster():
    H, vals = random_hermitian(512, 3, clusters=[(-1.0, 1), (-0.5, 3)])
    ref = ss.dense_reference(H, cap=512)
    res = ss.lowest_k(ss.SparseHermitian.from_dense(H), 2, tol=1e-11)
    # cluster completion returns all three copies of the second level
    assert len(res.values) == 4
    np.testing.assert_allclose(res.values, ref.values[:4], rtol=1e-8, atol=1e-8)
    assert subspace_distance(res.vectors[:, 1:4], ref.vectors[:, 1:4]) < 1e-8
    assert np.max(res.residuals) < 1e-8


def test_sparse_hermitian_roundtrip_and_triangles():
    H, _ = random_hermitian(40, 1)
    A = ss.SparseHermitian.from_dense(H)
    np.testing.assert_allclose(A.toarray(), H, atol=1e-14)
    # lower-triangle input is mirrored
    r, c = np.nonzero(np.tril(np.ones((40, 40))))
    B = ss.SparseHermitian(40, r, c, H[r, c])
    np.testing.assert_allclose(B.toarray(), H, atol=1e-14)
    x = np.random.default_rng(0).standard_normal(40)
    np.testing.assert_allclose(A.matvec(x), H @ x, atol=1e-12)


def test_bad_triplets():
    with pytest.raises(IndexError):
        ss.SparseHermitian(3, [0], [3], [1.0])
    with pytest.raises(ValueError):
        ss.matvec(ss.SparseHermitian(3, [0], [0], [1.0]), np.ones(4))


def test_dense_cap():
    with pytest.raises(ss.CapacityError):
        ss.dense_reference(sp.identity(10).tocsr(), cap=5)


def test_small_problem_falls_back_to_dense():
    H, vals = random_hermitian(20, 5)
    res = ss.lowest_k(H, 4)
    np.testing.assert_allclose(res.values, vals[:4], atol=1e-12)


@given(seed=st.integers(0, 2**31 - 1), k=st.integers(1, 5))
def test_lowest_k_property(seed, k):
    H, vals = random_hermitian(120, seed)
    res = ss.lowest_k(H, k, tol=1e-11, complete_clusters=False)
    np.testing.assert_allclose(res.values, vals[:k], atol=1e-8)
    V = res.vectors
    np.testing.assert_allclose(V.conj().T @ V, np.eye(k), atol=1e-10)


def test_eigenvector_file_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    V = rng.standard_normal((50, 3)) + 1j * rng.standard_normal((50, 3))
    path = tmp_path / "vecs.bin"
    ss.save_eigenvectors(path, V)
    assert path.stat().st_size == 16 + 50 * 3 * 16
    np.testing.assert_array_equal(ss.load_eigenvectors(path), V)


def test_warm_start_converges_faster():
    H, _ = random_hermitian(400, 9)
    cold = ss.lowest_k(H, 2, complete_clusters=False)
    v0 = cold.vectors[:, 0] + cold.vectors[:, 1]
    warm = ss.lowest_k(H, 2, v0=v0, complete_clusters=False)
    np.testing.assert_allclose(warm.values, cold.values, atol=1e-9)
    assert warm.iterations <= cold.iterations
