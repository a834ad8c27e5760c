import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from detrank.field import INTEGERS, make_field
from detrank.linalg import (
    Matrix,
    batch_rank,
    complete_to_sl,
    det,
    in_span,
    kernel_basis,
    rank,
    rank_deficient_probability,
)

F2, F3, F5 = make_field(2), make_field(3), make_field(5)


def brute_rank(M):
    """Largest invertible square submatrix."""
    m, n = M.shape
    for k in range(min(m, n), 0, -1):
        for rows in itertools.combinations(range(m), k):
            for cols in itertools.combinations(range(n), k):
                sub = Matrix(M.spec, tuple(tuple(M.rows[i][j] for j in cols) for i in rows))
                if det(sub) != 0:
                    return k
    return 0


def brute_deficient_count(m, n, q):
    """Matrices whose rows admit a nontrivial vanishing combination."""
    coeffs = np.array([c for c in itertools.product(range(q), repeat=m) if any(c)], dtype=np.int64)
    total = 0
    N = q ** (m * n)
    for lo in range(0, N, 1 << 16):
        idx = np.arange(lo, min(N, lo + (1 << 16)))
        digits = (idx[:, None] // q ** np.arange(m * n)[None, :]) % q
        mats = digits.reshape(-1, m, n)
        combos = np.einsum("cm,bmn->bcn", coeffs, mats) % q
        total += int((combos == 0).all(axis=2).any(axis=1).sum())
    return total


def test_rank_trivial():
    assert rank(Matrix.identity(F5, 4)) == 4
    assert rank(Matrix.zeros(F5, 3, 4)) == 0


@pytest.mark.parametrize("seed", range(5))
def test_rank_matches_submatrix_oracle(seed):
    rng = np.random.default_rng(seed)
    M = Matrix(F3, tuple(map(tuple, rng.integers(0, 3, size=(4, 5)).tolist())))
    assert rank(M) == brute_rank(M)
    assert rank(M) == rank(M.transpose())


def test_kernel_examples():
    assert len(kernel_basis(Matrix.zeros(F2, 2, 3))) == 3
    assert kernel_basis(Matrix.identity(F2, 3)) == []


@pytest.mark.parametrize("n", [2, 3, 4])
def test_kernel_matches_enumeration(n):
    rng = np.random.default_rng(n)
    for _ in range(10):
        M = Matrix(F2, tuple(map(tuple, rng.integers(0, 2, size=(3, n)).tolist())))
        basis = kernel_basis(M)
        span = {
            tuple(sum(c * v[i] for c, v in zip(cs, basis)) % 2 for i in range(n))
            for cs in itertools.product(range(2), repeat=len(basis))
        }
        brute = {v for v in itertools.product(range(2), repeat=n) if all(x == 0 for x in M @ v)}
        assert span == brute
        assert len(span) == 2 ** len(basis)


def test_rank_nullity_all_2x3_over_f2():
    for entries in itertools.product(range(2), repeat=6):
        M = Matrix(F2, (entries[:3], entries[3:]))
        assert rank(M) + len(kernel_basis(M)) == 3


def test_kernel_over_integers_is_primitive():
    M = Matrix(INTEGERS, ((2, 4, 6),))
    for v in kernel_basis(M):
        assert M @ v == (0,)
        assert np.gcd.reduce(v) == 1


def test_det_and_span():
    assert det(Matrix(INTEGERS, ((2, 1), (1, 3)))) == 5
    assert det(Matrix(F5, ((2, 1), (1, 3)))) == 0
    assert in_span(F3, [(1, 0, 1), (0, 1, 1)], (1, 1, 2)) == (1, 1)
    assert in_span(F3, [(1, 0, 1)], (0, 1, 0)) is None
    assert in_span(INTEGERS, [(2, 0)], (1, 0)) is None


@given(st.lists(st.integers(-5, 5), min_size=9, max_size=9))
def test_bareiss_matches_leibniz(entries):
    M = Matrix(INTEGERS, (tuple(entries[:3]), tuple(entries[3:6]), tuple(entries[6:])))
    a = entries
    leibniz = (
        a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) + a[2] * (a[3] * a[7] - a[4] * a[6])
    )
    assert det(M) == leibniz


def test_complete_to_sl_examples():
    A = complete_to_sl([(1, 0, 0)], F2)
    assert det(A) == 1 and A.column(0) == (1, 0, 0)
    A = complete_to_sl([(1, 1, 0), (0, 1, 1)], F2)
    assert det(A) == 1 and A.column(0) == (1, 1, 0) and A.column(1) == (0, 1, 1)
    A = complete_to_sl([(2, 0), (0, 1)], F5)
    assert det(A) == 1 and A.column(0) == (2, 0)


def test_complete_to_sl_rejects_dependent():
    with pytest.raises(ValueError, match="vector 1"):
        complete_to_sl([(1, 1, 0), (2, 2, 0)], F3)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.sampled_from([2, 3, 5, 7]))
def test_complete_to_sl_property(seed, n, p):
    F = make_field(p)
    rng = np.random.default_rng(seed)
    k = int(rng.integers(0, n + 1))
    vs = []
    while len(vs) < k:
        v = tuple(rng.integers(0, p, size=n).tolist())
        if rank(Matrix.from_columns(F, vs + [v])) == len(vs) + 1:
            vs.append(v)
    A = complete_to_sl(vs, F, n)
    assert det(A) == 1
    for i, v in enumerate(vs[: n - 1] if k == n else vs):
        assert A.column(i) == v


def test_rank_deficient_examples():
    assert rank_deficient_probability(1, 2, 2) == Fraction(1, 4)
    assert rank_deficient_probability(2, 3, 2) == Fraction(22, 64)
    with pytest.raises(ValueError):
        rank_deficient_probability(3, 2, 2)


def test_rank_deficient_bounds():
    for q in (2, 3, 5):
        for n in range(1, 9):
            for m in range(1, n + 1):
                ratio = rank_deficient_probability(m, n, q) * q ** (n - m + 1)
                assert 1 <= ratio < 1 + Fraction(1, q - 1)
                assert (rank_deficient_probability(m, n, q) * q ** (m * n)).denominator == 1


@pytest.mark.parametrize("m,n,q", [(1, 3, 2), (2, 3, 2), (2, 4, 2), (3, 4, 2), (2, 2, 3), (2, 3, 3), (2, 2, 5)])
def test_rank_deficient_brute_force(m, n, q):
    assert rank_deficient_probability(m, n, q) == Fraction(brute_deficient_count(m, n, q), q ** (m * n))


@pytest.mark.parametrize("p", [2, 3, 7])
def test_batch_rank_matches_rank(p):
    rng = np.random.default_rng(p)
    mats = rng.integers(0, p, size=(60, 4, 5))
    mats[:10, 2] = mats[:10, 0]
    expected = [rank(Matrix(make_field(p), tuple(map(tuple, M.tolist())))) for M in mats]
    assert batch_rank(mats, p).tolist() == expected
