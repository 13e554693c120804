import numpy as np

from fieldtopo.snf import (
    integer_kernel_basis,
    integer_rank,
    rank_mod_p,
    smith_normal_form,
)


def bareiss_det(M):
    """Exact integer determinant (fraction-free elimination)."""
    M = [[int(v) for v in row] for row in M]
    n = len(M)
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k]:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[-1][-1]


def minor_gcd_factors(A):
    """Brute-force invariant factors: d_k = gcd(k-minors)/gcd((k-1)-minors)."""
    from itertools import combinations
    from math import gcd

    A = [[int(v) for v in row] for row in np.atleast_2d(A)]
    m, n = len(A), len(A[0])
    prev = 1
    factors = []
    for k in range(1, min(m, n) + 1):
        g = 0
        for rows in combinations(range(m), k):
            for cols in combinations(range(n), k):
                sub = [[A[i][j] for j in cols] for i in rows]
                g = gcd(g, bareiss_det(sub))
                if g == prev:
                    break  # cannot get smaller: gcd(k-1 minors) divides it
            if g == prev:
                break
        if g == 0:
            break
        factors.append(g // prev)
        prev = g
    return factors


def test_identity():
    assert smith_normal_form(np.eye(3, dtype=int)).invariant_factors == [1, 1, 1]


def test_known_2x2():
    # d1 = gcd of entries = 2, d1*d2 = |det| = 8
    assert smith_normal_form([[2, 4], [6, 8]]).invariant_factors == [2, 4]


def test_zero_matrix():
    r = smith_normal_form(np.zeros((3, 5), dtype=int))
    assert r.rank == 0
    assert r.invariant_factors == []


def test_torsion_example():
    # diag(2,6) has factors (2,6); the off-diagonal mix still reduces to it
    assert smith_normal_form([[2, 0], [0, 6]]).invariant_factors == [2, 6]
    assert smith_normal_form([[6, 4], [4, 4]]).invariant_factors == [2, 4]


def test_random_vs_minor_oracle():
    rng = np.random.default_rng(7)
    for _ in range(40):
        m, n = rng.integers(1, 7, size=2)
        A = rng.integers(-9, 10, size=(m, n))
        assert smith_normal_form(A).invariant_factors == minor_gcd_factors(A)


def test_transforms_unimodular_and_diagonal():
    rng = np.random.default_rng(11)
    for _ in range(25):
        m, n = rng.integers(1, 8, size=2)
        A = rng.integers(-9, 10, size=(m, n))
        r = smith_normal_form(A, transforms=True)
        D = r.U @ A.astype(object) @ r.V
        expect = r.diagonal()
        assert np.array_equal(D, expect)
        # divisibility chain
        f = r.invariant_factors
        assert all(f[i + 1] % f[i] == 0 for i in range(len(f) - 1))
        # unimodular transforms
        assert abs(bareiss_det(r.U.tolist())) == 1
        assert abs(bareiss_det(r.V.tolist())) == 1


def test_sparse_path_matches_dense():
    rng = np.random.default_rng(3)
    A = np.zeros((90, 70), dtype=np.int64)
    for _ in range(300):
        A[rng.integers(0, 90), rng.integers(0, 70)] = rng.integers(-5, 6)
    import scipy.sparse as sp

    dense = smith_normal_form(A.tolist()).invariant_factors
    sparse = smith_normal_form(sp.csr_matrix(A)).invariant_factors
    assert dense == sparse


def test_rank_helpers():
    A = np.array([[2, 4], [6, 8]])
    assert integer_rank(A) == 2
    assert rank_mod_p(A) == 2
    B = np.array([[1, 2], [2, 4]])
    assert integer_rank(B) == 1
    assert rank_mod_p(B) == 1


def test_kernel_basis_exact():
    rng = np.random.default_rng(5)
    for _ in range(20):
        m, n = rng.integers(2, 7, size=2)
        A = rng.integers(-4, 5, size=(m, n))
        K = integer_kernel_basis(A)
        assert len(K) == n - smith_normal_form(A).rank
        for vec in K:
            assert np.all(A @ vec == 0)


def test_kernel_basis_saturated():
    # kernel of [2 0 4; 0 3 6] is generated by (-2,-2,1), primitively
    K = integer_kernel_basis(np.array([[2, 0, 4], [0, 3, 6]]))
    assert len(K) == 1
    from math import gcd

    g = gcd(gcd(int(K[0][0]), int(K[0][1])), int(K[0][2]))
    assert g == 1


def test_boundary_matrix_factors_all_unit(cube4):
    for mat in (cube4.D0, cube4.D1, cube4.D2):
        f = smith_normal_form(mat).invariant_factors
        assert all(v == 1 for v in f)
