"""Sparse multilinear forms on ``(F^n)^d``.

Index tuples are 0-based internally; the text format and :func:`levi_civita`
use 1-based indices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .field import FieldSpec, parse_field
from .linalg import Matrix

Key = tuple[int, ...]


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class MultilinearForm:
    """A ``d``-linear form stored as a sorted tuple of ``(index tuple, coefficient)`` pairs.

    Zero coefficients are never stored, so two forms are equal exactly when
    their coefficient tuples match. ``d == 0`` encodes a scalar under the
    empty key.
    """

    spec: FieldSpec
    d: int
    n: int
    coeffs: tuple[tuple[Key, int], ...] = ()

    def __post_init__(self):
        if self.d < 0 or self.n < 1:
            raise ShapeError(f"invalid shape d={self.d}, n={self.n}")

    @classmethod
    def from_dict(cls, spec: FieldSpec, d: int, n: int, mapping: Mapping[Sequence[int], int]) -> MultilinearForm:
        acc: dict[Key, int] = {}
        for key, v in mapping.items():
            key = tuple(int(i) for i in key)
            if len(key) != d or any(not 0 <= i < n for i in key):
                raise ShapeError(f"index {key} out of range for d={d}, n={n}")
            acc[key] = spec.add(acc.get(key, 0), int(v))
        items = tuple(sorted((k, v) for k, v in acc.items() if v != 0))
        return cls(spec, d, n, items)

    @classmethod
    def zero(cls, spec: FieldSpec, d: int, n: int) -> MultilinearForm:
        return cls(spec, d, n, ())

    @classmethod
    def scalar(cls, spec: FieldSpec, n: int, value: int) -> MultilinearForm:
        return cls.from_dict(spec, 0, n, {(): value})

    @classmethod
    def from_dense(cls, spec: FieldSpec, arr: np.ndarray) -> MultilinearForm:
        arr = np.asarray(arr)
        d = arr.ndim
        n = arr.shape[0] if d else 1
        if any(s != n for s in arr.shape):
            raise ShapeError("all slots must share one dimension")
        idx = np.argwhere(arr != 0)
        mapping = {tuple(int(i) for i in k): int(arr[tuple(k)]) for k in idx}
        return cls.from_dict(spec, d, n, mapping)

    @cached_property
    def as_dict(self) -> dict[Key, int]:
        return dict(self.coeffs)

    def __getitem__(self, key: Sequence[int]) -> int:
        return self.as_dict.get(tuple(key), 0)

    def __len__(self):
        return len(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def to_dense(self) -> np.ndarray:
        """Dense coefficient array of shape ``(n,) * d``; needs a prime field."""
        if not self.spec.is_prime_field:
            arr = np.zeros((self.n,) * self.d, dtype=object)
        else:
            arr = np.zeros((self.n,) * self.d, dtype=np.int64)
        for k, v in self.coeffs:
            arr[k] = v
        return arr

    def __add__(self, other: MultilinearForm) -> MultilinearForm:
        _check_same(self, other)
        acc = dict(self.coeffs)
        for k, v in other.coeffs:
            acc[k] = self.spec.add(acc.get(k, 0), v)
        return MultilinearForm.from_dict(self.spec, self.d, self.n, acc)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c: int) -> MultilinearForm:
        c = self.spec.reduce(c)
        return MultilinearForm.from_dict(self.spec, self.d, self.n, {k: self.spec.mul(v, c) for k, v in self.coeffs})

    def with_field(self, spec: FieldSpec) -> MultilinearForm:
        """Reinterpret integer coefficients in another coefficient domain."""
        return MultilinearForm.from_dict(spec, self.d, self.n, dict(self.coeffs))

    @cached_property
    def f2_masks(self) -> dict[Key, int]:
        # prefix (i_1..i_{d-1}) -> bitmask of last-slot indices with coefficient 1
        masks: dict[Key, int] = {}
        for key, v in self.coeffs:
            if v & 1:
                masks[key[:-1]] = masks.get(key[:-1], 0) | (1 << key[-1])
        return masks

    def leading(self) -> int:
        return self.coeffs[0][1] if self.coeffs else 0


def _check_same(a: MultilinearForm, b: MultilinearForm):
    if (a.spec, a.d, a.n) != (b.spec, b.d, b.n):
        raise ShapeError(f"shape mismatch: ({a.d},{a.n},{a.spec}) vs ({b.d},{b.n},{b.spec})")


# --- Levi-Civita symbols -------------------------------------------------------


def permutation_sign(perm: Sequence[int]) -> int:
    """Sign of a sequence of distinct comparable items by inversion count; 0 on repeats."""
    if len(set(perm)) != len(perm):
        return 0
    inv = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])
    return -1 if inv % 2 else 1


def levi_civita(indices: Sequence[int]) -> int:
    """Levi-Civita symbol with 1-based indices.

    For ``d == 2`` any integers are accepted (``+1`` if ``i < j``, ``-1`` if
    ``i > j``, ``0`` on ties); otherwise each index must lie in ``1..d``.
    """
    idx = tuple(indices)
    d = len(idx)
    if d == 0:
        raise ValueError("Levi-Civita symbol needs at least one index")
    if d == 2:
        i, j = idx
        return (i < j) - (i > j)
    for i in idx:
        if not 1 <= i <= d:
            raise ValueError(f"index {i} out of range 1..{d}")
    return permutation_sign(idx)


@dataclass
class IdentityReport:
    total: int = 0
    passed: int = 0
    permutations: int = 0
    degenerate: int = 0
    violations: list[tuple[Key, int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and self.passed == self.total

    def to_record(self) -> dict:
        return {
            "total": self.total,
            "passed": self.passed,
            "permutations": self.permutations,
            "degenerate": self.degenerate,
            "violations": [{"indices": list(k), "lhs": a, "rhs": b} for k, a, b in self.violations],
        }


def check_4to2_identity(symbol: Callable[[Sequence[int]], int] = levi_civita) -> IdentityReport:
    """Check ``e_ijkl = e_ij e_kl - e_ik e_jl + e_il e_jk`` on all of ``[4]^4``.

    ``symbol`` is the Levi-Civita implementation under test; it is used for
    both the 4- and 2-index symbols.
    """
    rep = IdentityReport()
    for i, j, k, l in itertools.product(range(1, 5), repeat=4):
        lhs = symbol((i, j, k, l))
        rhs = symbol((i, j)) * symbol((k, l)) - symbol((i, k)) * symbol((j, l)) + symbol((i, l)) * symbol((j, k))
        rep.total += 1
        if len({i, j, k, l}) == 4:
            rep.permutations += 1
        else:
            rep.degenerate += 1
        if lhs == rhs:
            rep.passed += 1
        else:
            rep.violations.append(((i, j, k, l), lhs, rhs))
    return rep


# --- constructors ---------------------------------------------------------------


def det_form(n: int, spec: FieldSpec) -> MultilinearForm:
    """``det_n`` as an ``n``-linear form in the rows."""
    if n < 1:
        raise ShapeError("n must be positive")
    mapping = {perm: permutation_sign(perm) for perm in itertools.permutations(range(n))}
    return MultilinearForm.from_dict(spec, n, n, mapping)


def minor_form(spec: FieldSpec, n: int, columns: Sequence[int]) -> MultilinearForm:
    """The ``k x k`` minor on the given (0-based) columns as a ``k``-linear form on ``F^n``."""
    cols = sorted(columns)
    k = len(cols)
    mapping = {perm: permutation_sign(perm) for perm in itertools.permutations(cols)}
    return MultilinearForm.from_dict(spec, k, n, mapping)


def basis_vector(n: int, i: int) -> tuple[int, ...]:
    return tuple(int(j == i) for j in range(n))


# --- evaluation -------------------------------------------------------------------


def _check_points(T: MultilinearForm, xs: Sequence[Sequence[int]], k: int):
    if len(xs) != k:
        raise ShapeError(f"expected {k} vectors, got {len(xs)}")
    for x in xs:
        if len(x) != T.n:
            raise ShapeError(f"vector of length {len(x)} for dimension {T.n}")


def evaluate(T: MultilinearForm, xs: Sequence[Sequence[int]]) -> int:
    _check_points(T, xs, T.d)
    spec = T.spec
    xs = [[spec.reduce(v) for v in x] for x in xs]
    total = 0
    for key, c in T.coeffs:
        term = c
        for slot, i in enumerate(key):
            term *= xs[slot][i]
            if term == 0:
                break
        total += term
    return spec.reduce(total)


def evaluate_many(T: MultilinearForm, points: np.ndarray) -> np.ndarray:
    """Vectorized evaluation; ``points`` has shape ``(B, d, n)``. Prime fields only."""
    p = T.spec.p
    pts = np.asarray(points, dtype=np.int64) % p
    B = pts.shape[0]
    out = np.zeros(B, dtype=np.int64)
    if not T.coeffs:
        return out
    keys = np.array([k for k, _ in T.coeffs], dtype=np.int64).reshape(len(T.coeffs), T.d)
    vals = np.array([v for _, v in T.coeffs], dtype=np.int64)
    chunk = max(1, 2**20 // max(1, len(vals)))
    for s in range(0, B, chunk):
        blk = pts[s : s + chunk]
        prod = np.broadcast_to(vals, (blk.shape[0], len(vals))).copy()
        for slot in range(T.d):
            prod = prod * blk[:, slot, :][:, keys[:, slot]] % p
        out[s : s + chunk] = prod.sum(axis=1) % p
    return out


def evaluate_f2_packed(T: MultilinearForm, xs: Sequence[Sequence[int]]) -> int:
    """Bit-packed evaluation over ``F_2``: output-equivalent to :func:`evaluate`."""
    if T.spec.p != 2:
        raise ValueError("packed path requires F_2")
    _check_points(T, xs, T.d)
    if T.d == 0:
        return T[()]
    masks = T.f2_masks
    bits = [sum((v & 1) << i for i, v in enumerate(x)) for x in xs]
    last = bits[-1]
    acc = 0
    for prefix, mask in masks.items():
        if all(bits[s] >> i & 1 for s, i in enumerate(prefix)):
            acc ^= (mask & last).bit_count() & 1
    return acc


def is_nontrivial(xs: Sequence[Sequence[int]], spec: FieldSpec | None = None) -> bool:
    """True when every vector of the tuple is nonzero."""
    red = spec.reduce if spec is not None else (lambda v: v)
    return all(any(red(v) != 0 for v in x) for x in xs)


# --- restriction, gradient, basis change ------------------------------------------


def restrict(T: MultilinearForm, slots: Sequence[int], vectors: Sequence[Sequence[int]]) -> MultilinearForm:
    """Fix the (0-based) ``slots`` of ``T`` to ``vectors``; remaining slots keep their order."""
    slots = list(slots)
    if len(slots) != len(vectors) or len(set(slots)) != len(slots):
        raise ShapeError("slots and vectors must pair up one-to-one")
    if any(not 0 <= s < T.d for s in slots):
        raise ShapeError(f"slot out of range for d={T.d}")
    _check_points(T, vectors, len(slots))
    spec = T.spec
    fixed = {s: [spec.reduce(v) for v in vec] for s, vec in zip(slots, vectors)}
    keep = [s for s in range(T.d) if s not in fixed]
    acc: dict[Key, int] = {}
    for key, c in T.coeffs:
        val = c
        for s, vec in fixed.items():
            val *= vec[key[s]]
            if val == 0:
                break
        if val:
            nk = tuple(key[s] for s in keep)
            acc[nk] = acc.get(nk, 0) + val
    return MultilinearForm.from_dict(spec, len(keep), T.n, acc)


def gradient_form(T: MultilinearForm) -> list[MultilinearForm]:
    """Partial derivatives with respect to the last slot, one ``(d-1)``-form per coordinate."""
    if T.d < 2:
        raise ShapeError("gradient needs d >= 2; a linear form is its own coefficient vector")
    parts: list[dict[Key, int]] = [{} for _ in range(T.n)]
    for key, c in T.coeffs:
        parts[key[-1]][key[:-1]] = c
    return [MultilinearForm.from_dict(T.spec, T.d - 1, T.n, m) for m in parts]


def compose_slot(T: MultilinearForm, slot: int, A: Matrix) -> MultilinearForm:
    """The form ``x -> T(..., A x^(slot), ...)``."""
    if A.shape != (T.n, T.n) or A.spec != T.spec:
        raise ShapeError(f"expected an {T.n}x{T.n} matrix over {T.spec}")
    if not 0 <= slot < T.d:
        raise ShapeError(f"slot {slot} out of range")
    acc: dict[Key, int] = {}
    for key, c in T.coeffs:
        row = A.rows[key[slot]]
        for b, a in enumerate(row):
            if a:
                nk = key[:slot] + (b,) + key[slot + 1 :]
                acc[nk] = acc.get(nk, 0) + c * a
    return MultilinearForm.from_dict(T.spec, T.d, T.n, acc)


def compose_all(T: MultilinearForm, A: Matrix) -> MultilinearForm:
    for s in range(T.d):
        T = compose_slot(T, s, A)
    return T


def permute_slots(T: MultilinearForm, order: Sequence[int]) -> MultilinearForm:
    """The form ``y -> T(x)`` where ``x[order[t]] = y[t]``."""
    order = list(order)
    if sorted(order) != list(range(T.d)):
        raise ShapeError("order must be a permutation of the slots")
    return MultilinearForm.from_dict(T.spec, T.d, T.n, {tuple(k[s] for s in order): v for k, v in T.coeffs})


def tensor_product(Q: MultilinearForm, q_slots: Sequence[int], R: MultilinearForm, r_slots: Sequence[int]) -> MultilinearForm:
    """Product of two forms on complementary slot lists, as a form on all their slots."""
    if Q.spec != R.spec or Q.n != R.n:
        raise ShapeError("factors must share field and dimension")
    q_slots, r_slots = list(q_slots), list(r_slots)
    d = len(q_slots) + len(r_slots)
    if sorted(q_slots + r_slots) != list(range(d)) or len(q_slots) != Q.d or len(r_slots) != R.d:
        raise ShapeError("factor slots must partition the slots")
    spec = Q.spec
    acc: dict[Key, int] = {}
    for kq, vq in Q.coeffs:
        for kr, vr in R.coeffs:
            key = [0] * d
            for s, i in zip(q_slots, kq):
                key[s] = i
            for s, i in zip(r_slots, kr):
                key[s] = i
            acc[tuple(key)] = spec.mul(vq, vr)
    return MultilinearForm.from_dict(spec, d, Q.n, acc)


def matrix_space_map(T: MultilinearForm, L: Matrix) -> MultilinearForm:
    """Compose a row-slot form on ``M_n`` with a linear map of the ``n^2`` entries.

    ``L`` acts on row-major vectorized matrices. The composed polynomial
    must again be multilinear in the rows; otherwise ``ValueError``.
    """
    from ._poly import Poly

    if T.d != T.n:
        raise ShapeError("matrix-space maps need a form with d == n")
    n = T.n
    if L.shape != (n * n, n * n):
        raise ShapeError(f"map must be {n * n}x{n * n}, got {L.shape[0]}x{L.shape[1]}")
    P = Poly.from_form(T, range(T.d)).substitute(L)
    out = P.to_form(range(n))
    if out is None:
        raise ValueError("composed form is not multilinear in the rows")
    return out


def transpose_map(spec: FieldSpec, n: int) -> Matrix:
    """Row-major ``n^2 x n^2`` matrix of ``X -> X^T``."""
    rows = []
    for r in range(n):
        for c in range(n):
            row = [0] * (n * n)
            row[c * n + r] = 1
            rows.append(tuple(row))
    return Matrix(spec, tuple(rows))


# --- text format ------------------------------------------------------------------


def dumps(T: MultilinearForm) -> str:
    """Header ``d n p`` then ``i1,...,id : value`` per coefficient (1-based)."""
    lines = [f"{T.d} {T.n} {T.spec.modulus}"]
    for key, v in T.coeffs:
        lines.append(f"{','.join(str(i + 1) for i in key)} : {v}")
    return "\n".join(lines) + "\n"


def _parse_header(line: str) -> tuple[int, int, FieldSpec]:
    parts = line.split()
    if len(parts) != 3:
        raise ValueError(f"bad form header {line!r}")
    d, n, p = (int(x) for x in parts)
    return d, n, parse_field(p)


def parse_lines(lines: list[str]) -> MultilinearForm:
    d, n, spec = _parse_header(lines[0])
    mapping: dict[Key, int] = {}
    for line in lines[1:]:
        lhs, _, rhs = line.partition(":")
        key = tuple(int(t) - 1 for t in lhs.split(",") if t.strip())
        if key in mapping:
            raise ValueError(f"duplicate index {key}")
        mapping[key] = int(rhs)
    return MultilinearForm.from_dict(spec, d, n, mapping)


def _clean(text: str) -> list[str]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def loads(text: str) -> MultilinearForm:
    lines = _clean(text)
    if not lines:
        raise ValueError("empty form text")
    return parse_lines(lines)


def iter_points(q: int, n: int, k: int) -> Iterable[tuple[tuple[int, ...], ...]]:
    """All ``k``-tuples of vectors in ``F_q^n`` (pure Python, for small oracles)."""
    vecs = list(itertools.product(range(q), repeat=n))
    return itertools.product(vecs, repeat=k)
