"""Exact linear algebra over ``F_p`` (and over ``Q`` for integer-ring inputs)."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Sequence

import numpy as np

from .field import FieldError, FieldSpec

Vector = tuple[int, ...]


@dataclass(frozen=True)
class Matrix:
    spec: FieldSpec
    rows: tuple[Vector, ...]

    def __post_init__(self):
        rows = tuple(tuple(self.spec.reduce(int(v)) for v in r) for r in self.rows)
        if rows and len({len(r) for r in rows}) != 1:
            raise ValueError("ragged matrix")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_columns(cls, spec: FieldSpec, columns: Sequence[Sequence[int]]) -> Matrix:
        return cls(spec, tuple(zip(*columns)))

    @classmethod
    def identity(cls, spec: FieldSpec, n: int) -> Matrix:
        return cls(spec, tuple(tuple(int(i == j) for j in range(n)) for i in range(n)))

    @classmethod
    def zeros(cls, spec: FieldSpec, m: int, n: int) -> Matrix:
        return cls(spec, tuple((0,) * n for _ in range(m)))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), (len(self.rows[0]) if self.rows else 0)

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def column(self, j: int) -> Vector:
        return tuple(r[j] for r in self.rows)

    def transpose(self) -> Matrix:
        return Matrix(self.spec, tuple(zip(*self.rows)))

    def __matmul__(self, other):
        if isinstance(other, Matrix):
            cols = list(zip(*other.rows))
            return Matrix(self.spec, tuple(tuple(_dot(self.spec, r, c) for c in cols) for r in self.rows))
        return tuple(_dot(self.spec, r, other) for r in self.rows)


def _dot(spec: FieldSpec, u: Sequence[int], v: Sequence[int]) -> int:
    return spec.reduce(sum(a * b for a, b in zip(u, v)))


def _as_rows(M) -> tuple[FieldSpec, list[list]]:
    if not isinstance(M, Matrix):
        raise TypeError("expected a Matrix")
    if M.spec.is_prime_field:
        return M.spec, [list(r) for r in M.rows]
    return M.spec, [[Fraction(v) for v in r] for r in M.rows]


def _echelon(spec: FieldSpec, rows: list[list]) -> tuple[list[list], list[int]]:
    """Reduced row echelon form, first-nonzero pivoting. Returns (rows, pivot columns)."""
    prime = spec.is_prime_field
    p = spec.p
    m = len(rows)
    n = len(rows[0]) if rows else 0
    pivots: list[int] = []
    r = 0
    for c in range(n):
        if r == m:
            break
        piv = next((i for i in range(r, m) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        if prime:
            inv = pow(rows[r][c], p - 2, p)
            rows[r] = [(v * inv) % p for v in rows[r]]
        else:
            inv = 1 / rows[r][c]
            rows[r] = [v * inv for v in rows[r]]
        for i in range(m):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                if prime:
                    rows[i] = [(a - f * b) % p for a, b in zip(rows[i], rows[r])]
                else:
                    rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
    return rows, pivots


def rank(M: Matrix) -> int:
    spec, rows = _as_rows(M)
    if not rows:
        return 0
    return len(_echelon(spec, rows)[1])


def kernel_basis(M: Matrix) -> list[Vector]:
    """Basis of ``{v : M v = 0}``, one vector per free column in ascending order.

    Over the integer ring the kernel is computed over ``Q`` and each basis
    vector is scaled to a primitive integer vector.
    """
    spec, rows = _as_rows(M)
    n = M.shape[1]
    if not rows:
        return [tuple(int(i == j) for j in range(n)) for i in range(n)]
    rows, pivots = _echelon(spec, rows)
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        v = [0] * n
        v[f] = 1
        for r, pc in enumerate(pivots):
            v[pc] = -rows[r][f]
        if spec.is_prime_field:
            basis.append(tuple(x % spec.p for x in v))
        else:
            den = lcm(*(Fraction(x).denominator for x in v))
            basis.append(tuple(spec.reduce(int(Fraction(x) * den)) for x in v))
    return basis


def det(M: Matrix) -> int:
    """Scalar determinant by elimination (Bareiss over the integers)."""
    m, n = M.shape
    if m != n:
        raise ValueError("determinant of a non-square matrix")
    spec = M.spec
    if n == 0:
        return 1
    if spec.is_prime_field:
        p = spec.p
        a = [list(r) for r in M.rows]
        d = 1
        for c in range(n):
            piv = next((i for i in range(c, n) if a[i][c]), None)
            if piv is None:
                return 0
            if piv != c:
                a[c], a[piv] = a[piv], a[c]
                d = -d
            d = d * a[c][c] % p
            inv = pow(a[c][c], p - 2, p)
            for i in range(c + 1, n):
                if a[i][c]:
                    f = a[i][c] * inv % p
                    a[i] = [(x - f * y) % p for x, y in zip(a[i], a[c])]
        return d % p
    a = [list(r) for r in M.rows]
    sign = 1
    prev = 1
    for c in range(n - 1):
        piv = next((i for i in range(c, n) if a[i][c]), None)
        if piv is None:
            return 0
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            sign = -sign
        for i in range(c + 1, n):
            for j in range(c + 1, n):
                a[i][j] = (a[i][j] * a[c][c] - a[i][c] * a[c][j]) // prev
        prev = a[c][c]
    return spec.reduce(sign * a[n - 1][n - 1])


def in_span(spec: FieldSpec, vectors: Sequence[Sequence[int]], target: Sequence[int]):
    """Coefficients ``c`` with ``sum c_j vectors[j] == target``, or ``None``."""
    k = len(vectors)
    n = len(target)
    if k == 0:
        return () if all(spec.reduce(t) == 0 for t in target) else None
    aug = Matrix(spec, tuple(tuple(vectors[j][i] for j in range(k)) + (target[i],) for i in range(n)))
    spec_, rows = _as_rows(aug)
    rows, pivots = _echelon(spec_, rows)
    if k in pivots:
        return None
    c = [0] * k
    for r, pc in enumerate(pivots):
        c[pc] = rows[r][k]
    if spec.is_prime_field:
        return tuple(x % spec.p for x in c)
    if any(Fraction(x).denominator != 1 for x in c):
        return None
    return tuple(int(x) for x in c)


def complete_to_sl(vectors: Sequence[Sequence[int]], spec: FieldSpec, n: int | None = None) -> Matrix:
    """A determinant-one matrix whose first columns are the given vectors.

    Missing columns are filled greedily from the standard basis and the last
    column is divided by the resulting determinant. When ``k == n`` that
    rescales ``v_n`` itself.
    """
    vs = [tuple(spec.reduce(x) for x in v) for v in vectors]
    if n is None:
        if not vs:
            raise ValueError("dimension required when no vectors are given")
        n = len(vs[0])
    if len(vs) > n:
        raise ValueError(f"{len(vs)} vectors cannot be independent in dimension {n}")
    cols: list[Vector] = []
    for i, v in enumerate(vs):
        if len(v) != n:
            raise ValueError(f"vector {i} has length {len(v)}, expected {n}")
        if rank(Matrix.from_columns(spec, cols + [v])) != len(cols) + 1:
            raise ValueError(f"vector {i} is linearly dependent on the preceding vectors")
        cols.append(v)
    for j in range(n):
        if len(cols) == n:
            break
        e = tuple(int(i == j) for i in range(n))
        if rank(Matrix.from_columns(spec, cols + [e])) == len(cols) + 1:
            cols.append(e)
    g = det(Matrix.from_columns(spec, cols))
    if g != 1:
        try:
            ginv = spec.inv(g)
        except FieldError:
            raise FieldError(f"cannot rescale by determinant {g} in {spec}") from None
        cols[-1] = tuple(spec.mul(x, ginv) for x in cols[-1])
    return Matrix.from_columns(spec, cols)


def rank_deficient_probability(m: int, n: int, q: int) -> Fraction:
    """Exact probability that a uniform ``m x n`` matrix over ``F_q`` has rank below ``m``."""
    if not (1 <= m <= n):
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    if q < 2:
        raise ValueError(f"field size must be at least 2, got {q}")
    full = Fraction(1)
    for i in range(m):
        full *= 1 - Fraction(q**i, q**n)
    return 1 - full


def batch_rank(mats: np.ndarray, p: int) -> np.ndarray:
    """Ranks of a stack of matrices over ``F_p``, shape ``(B, m, n)`` -> ``(B,)``."""
    a = np.array(mats, dtype=np.int64) % p
    B, m, n = a.shape
    inv_table = np.zeros(p, dtype=np.int64)
    inv_table[1:] = [pow(x, p - 2, p) for x in range(1, p)]
    rk = np.zeros(B, dtype=np.int64)
    rows = np.arange(m)
    bidx = np.arange(B)
    for c in range(n):
        cand = (a[:, :, c] != 0) & (rows[None, :] >= rk[:, None])
        has = cand.any(axis=1)
        if not has.any():
            continue
        sel = bidx[has]
        piv = cand[has].argmax(axis=1)
        tgt = rk[has]
        tgt_safe = np.minimum(tgt, m - 1)
        prow = a[sel, piv].copy()
        a[sel, piv] = a[sel, tgt_safe]
        prow = prow * inv_table[prow[:, c]][:, None] % p
        a[sel, tgt_safe] = prow
        f = a[sel, :, c].copy()
        f[np.arange(len(sel)), tgt_safe] = 0
        a[sel] = (a[sel] - f[:, :, None] * prow[:, None, :]) % p
        rk[sel] += 1
    return rk
