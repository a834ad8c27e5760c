"""Zeroing vectors, the support-restriction step, and exhaustive partition-rank search."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .decomp import Decomposition, Term, _is_normal, make_term, verify
from .field import FieldSpec
from .linalg import Matrix, complete_to_sl, kernel_basis, rank
from .multilinear import (
    MultilinearForm,
    basis_vector,
    compose_all,
    det_form,
    permutation_sign,
    restrict,
)
from .rank import BudgetExceeded, all_vectors

DEFAULT_SEARCH_BUDGET = 10**9


# --- zeroing vectors -----------------------------------------------------------------


class UnverifiedDecomposition(ValueError):
    """The input decomposition does not sum to its target; ``witness`` is 1-based."""

    def __init__(self, what: str, witness):
        self.witness = tuple(i + 1 for i in witness)
        super().__init__(f"decomposition does not verify against {what}: witness {self.witness}")


def zeroing_vectors(forms: Sequence[MultilinearForm], n: int | None = None, k: int | None = None) -> list[tuple[int, ...]]:
    """``k`` independent vectors on which every ``k``-linear form in ``forms`` vanishes.

    The first ``k-1`` vectors are ``e_1..e_{k-1}``; the last is the first
    kernel basis vector of ``x -> (Q_i(e_1, ..., e_{k-1}, x))_i`` outside
    their span. Requires ``k + len(forms) <= n``.
    """
    if forms:
        spec, n, k = forms[0].spec, forms[0].n, forms[0].d
        if any((f.spec, f.n, f.d) != (spec, n, k) for f in forms):
            raise ValueError("all forms must share field, dimension and degree")
    elif n is None or k is None:
        raise ValueError("n and k are required when no forms are given")
    ell = len(forms)
    if k < 1:
        raise ValueError("k must be at least 1")
    if k + ell > n:
        raise ValueError(f"k + l = {k + ell} exceeds n = {n}")
    head = [basis_vector(n, i) for i in range(k - 1)]
    if not forms:
        return head + [basis_vector(n, k - 1)]
    spec = forms[0].spec
    rows = []
    for f in forms:
        lin = restrict(f, list(range(k - 1)), head) if k > 1 else f
        rows.append(tuple(lin[(j,)] for j in range(n)))
    for v in kernel_basis(Matrix(spec, tuple(rows))):
        if rank(Matrix.from_columns(spec, head + [v])) == k:
            return head + [v]
    raise AssertionError("kernel too small; dimension count violated")


# --- restriction step ----------------------------------------------------------------


@dataclass(frozen=True)
class RestrictionOutcome:
    branch: str  # "reduced" | "certificate"
    k: int
    r: int
    support: tuple[int, ...]
    ell: int = 0
    target: MultilinearForm | None = None
    decomposition: Decomposition | None = None
    vectors: tuple[tuple[int, ...], ...] = ()
    basis_change: Matrix | None = None
    row_order: tuple[int, ...] = ()
    sign: int = 1

    def to_record(self) -> dict:
        rec = {
            "branch": self.branch,
            "k": self.k,
            "r": self.r,
            "support": [s + 1 for s in self.support],
            "terms_with_support": self.ell,
        }
        if self.branch == "reduced":
            from .decomp import dumps

            rec.update(
                reduced_terms=self.decomposition.r,
                target_degree=self.target.d,
                vectors=[list(v) for v in self.vectors],
                decomposition=dumps(self.decomposition),
            )
            if self.basis_change is not None:
                rec["basis_change"] = [list(row) for row in self.basis_change.rows]
                rec["row_order"] = [s + 1 for s in self.row_order]
                rec["sign"] = self.sign
        return rec


def choose_support(dec: Decomposition) -> tuple[int, ...]:
    """Smallest normalized support, ties broken lexicographically (hence inclusion-minimal)."""
    return min((t.support for t in dec.terms), key=lambda s: (len(s), s))


def _restrict_term(t: Term, fixed: dict[int, Sequence[int]]):
    """Restrict slots in ``fixed`` within both factors; returns (q_slots, q, r_slots, r)."""
    out = []
    for slots, f in ((t.support, t.q), (t.complement, t.r)):
        local = [i for i, s in enumerate(slots) if s in fixed]
        rest = [s for s in slots if s not in fixed]
        out.append((tuple(rest), restrict(f, local, [fixed[slots[i]] for i in local])))
    return out


def _project(f: MultilinearForm, k: int) -> MultilinearForm:
    """Restrict to vectors whose first ``k`` coordinates vanish, as a form on ``F^(n-k)``."""
    return MultilinearForm.from_dict(
        f.spec, f.d, f.n - k, {tuple(i - k for i in key): v for key, v in f.coeffs if all(i >= k for i in key)}
    )


def restriction_step(dec: Decomposition, force: bool = False) -> RestrictionOutcome:
    """One inductive step of the partition-rank lower bound for a decomposition of ``det_n``.

    Returns a certificate when ``k + r > n``. With ``force=True`` the
    restriction is carried out anyway whenever zeroing vectors exist
    (``k + l <= n``), which exercises the reduction on known short
    expansions such as the quadratic ``det_4`` one.
    """
    spec, n = dec.spec, dec.n
    if not spec.is_prime_field:
        raise ValueError("restriction needs a finite field")
    if dec.d != n:
        raise ValueError("expected a decomposition of det_n (d == n)")
    if not all(t.is_multilinear for t in dec.terms):
        raise ValueError("all factors must be multilinear")
    if not dec.terms:
        raise ValueError("empty decomposition cannot sum to det_n")
    res = verify(dec, det_form(n, spec))
    if not res.ok:
        raise UnverifiedDecomposition(f"det_{n}", res.witness)
    dec = dec.normalized()
    I = choose_support(dec)
    k, r = len(I), dec.r
    ell = sum(t.support == I for t in dec.terms)
    if k + r > n and not (force and k + ell <= n):
        return RestrictionOutcome("certificate", k, r, I, ell)

    vs = zeroing_vectors([t.q for t in dec.terms if t.support == I])
    A = complete_to_sl(vs, spec, n)
    order = I + tuple(s for s in range(n) if s not in I)
    pos = {s: t for t, s in enumerate(order)}
    sign = permutation_sign(order)
    fixed = {j: basis_vector(n, j) for j in range(k)}
    terms = []
    for t in dec.terms:
        q = compose_all(t.q, A).scale(sign)
        rf = compose_all(t.r, A)
        moved = Term(n, tuple(pos[s] for s in t.support), q, rf)
        (qs, qf), (rs, rfr) = _restrict_term(moved, fixed)
        if t.support == I:
            if qf[()] != 0:
                raise AssertionError("zeroing vectors failed to annihilate a minimal-support factor")
            continue
        if not qs or not rs:
            raise AssertionError(f"term with support {t.support} collapsed under restriction")
        qf, rfr = _project(qf, k), _project(rfr, k)
        if qf.is_zero() or rfr.is_zero():
            continue
        terms.append(make_term(n - k, tuple(s - k for s in qs), qf, rfr))
    new_target = det_form(n - k, spec)
    kind = "slice" if terms and all(t.is_slice for t in terms) else "partition"
    reduced = Decomposition(spec, n - k, n - k, tuple(terms), kind)
    check = verify(reduced, new_target)
    if not check.ok:
        raise AssertionError(f"reduced decomposition fails verification at {check.witness}")
    return RestrictionOutcome("reduced", k, r, I, ell, new_target, reduced, tuple(vs), A, order, sign)


def restriction_step_general(target: MultilinearForm, dec: Decomposition) -> RestrictionOutcome:
    """Restrict the minimal support's slots to zeroing vectors, without any basis change."""
    if not target.spec.is_prime_field:
        raise ValueError("restriction needs a finite field")
    res = verify(dec, target)
    if not res.ok:
        raise UnverifiedDecomposition("the target", res.witness)
    if not dec.terms:
        raise ValueError("nothing to restrict in an empty decomposition")
    if not all(t.is_multilinear for t in dec.terms):
        raise ValueError("all factors must be multilinear")
    dec = dec.normalized()
    d, n, spec = dec.d, dec.n, dec.spec
    I = choose_support(dec)
    k, r = len(I), dec.r
    ell = sum(t.support == I for t in dec.terms)
    for idx, t in enumerate(dec.terms):
        if t.support != I and (set(t.support) <= set(I) or set(t.complement) <= set(I)):
            raise ValueError(f"term {idx + 1} (support {[s + 1 for s in t.support]}) would lose a factor")
    vs = zeroing_vectors([t.q for t in dec.terms if t.support == I])
    fixed = dict(zip(I, vs))
    remaining = [s for s in range(d) if s not in fixed]
    pos = {s: i for i, s in enumerate(remaining)}
    new_target = restrict(target, list(I), vs)
    terms = []
    for t in dec.terms:
        (qs, qf), (rs, rfr) = _restrict_term(t, fixed)
        if t.support == I:
            if qf[()] != 0:
                raise AssertionError("zeroing vectors failed to annihilate a minimal-support factor")
            continue
        if qf.is_zero() or rfr.is_zero():
            continue
        terms.append(make_term(d - k, tuple(pos[s] for s in qs), qf, rfr))
    kind = "slice" if terms and all(t.is_slice for t in terms) else "partition"
    reduced = Decomposition(spec, d - k, n, tuple(terms), kind)
    check = verify(reduced, new_target)
    if not check.ok:
        raise AssertionError(f"reduced decomposition fails verification at {check.witness}")
    return RestrictionOutcome("reduced", k, r, I, ell, new_target, reduced, tuple(vs))


def synthetic_two_term(spec: FieldSpec, n: int = 6) -> tuple[MultilinearForm, Decomposition]:
    """``Q1 R1 + Q2 R2`` on ``(F^n)^n`` with supports {1} and {1, 2}."""
    d = n
    q1 = MultilinearForm.from_dict(spec, 1, n, {(0,): 1, (1,): 1})
    r1 = MultilinearForm.from_dict(spec, d - 1, n, {tuple(range(d - 1)): 1, tuple(range(1, d)): 1})
    q2 = MultilinearForm.from_dict(spec, 2, n, {(0, 0): 1, (2, 1): 1})
    r2 = MultilinearForm.from_dict(spec, d - 2, n, {tuple(range(d - 2)): 1, tuple(range(2, d)): 1})
    dec = Decomposition(spec, d, n, (make_term(d, (0,), q1, r1), make_term(d, (0, 1), q2, r2)))
    target = sum((t.product() for t in dec.terms[1:]), dec.terms[0].product())
    return target, dec


def prk_lower_bound_value(n: int) -> float:
    """``log2(n) + 1``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return math.log2(n) + 1


def prk_lower_bound_int(n: int) -> int:
    """The integer form ``ceil(log2 n) + 1``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return (n - 1).bit_length() + 1


# --- exhaustive search ----------------------------------------------------------------

RULES = (
    "normalized supports: |I| <= d/2, slot 1 in I when |I| = d/2",
    "leading nonzero coefficient of the first factor fixed to 1",
    "zero factors skipped",
    "identical product tensors merged",
    "first r-1 terms in nondecreasing table order",
    "last term resolved by exact residual lookup in the full table",
)


@dataclass(frozen=True)
class SearchCertificate:
    target_id: str
    q: int
    bound: int
    verdict: str  # "found" | "exhausted-none"
    table_size: int
    enumeration_size: int
    decomposition: Decomposition | None = None
    partitions: tuple[tuple[int, int], ...] = ()
    rules: tuple[str, ...] = RULES

    def to_record(self) -> dict:
        from .decomp import dumps

        rec = {
            "target": self.target_id,
            "q": self.q,
            "max_rank": self.bound,
            "verdict": self.verdict,
            "table_size": self.table_size,
            "enumeration_size": self.enumeration_size,
            "partitions": [list(p) for p in self.partitions],
            "rules": list(self.rules),
        }
        if self.decomposition is not None:
            rec["decomposition"] = dumps(self.decomposition)
            rec["terms"] = self.decomposition.r
        return rec


def _splits(d: int) -> list[tuple[int, ...]]:
    out = []
    for k in range(1, d):
        for I in itertools.combinations(range(d), k):
            if _is_normal(d, I):
                out.append(I)
    return out


def estimate_table_size(d: int, n: int, q: int) -> int:
    total = 0
    for I in _splits(d):
        a, b = n ** len(I), n ** (d - len(I))
        total += (q**a - 1) // (q - 1) * (q**b - 1)
    return total


def count_multisets(size: int, r: int) -> int:
    """Number of multisets of at most ``r`` items drawn from ``size`` kinds."""
    return sum(math.comb(size + j - 1, j) for j in range(r + 1))


class _Table:
    """Distinct rank-one partition tensors, as base-q digit rows plus integer codes."""

    def __init__(self, d: int, n: int, q: int):
        self.d, self.n, self.q = d, n, q
        N = n**d
        if N * math.log2(q) >= 62:
            raise ValueError("tensor too large for integer coding")
        self.powers = q ** np.arange(N, dtype=np.int64)
        digits, origin = [], []
        for si, I in enumerate(_splits(d)):
            Ic = tuple(s for s in range(d) if s not in I)
            a, b = n ** len(I), n ** len(Ic)
            Qs = all_vectors(q, a)[1:]
            Qs = Qs[Qs[np.arange(len(Qs)), (Qs != 0).argmax(axis=1)] == 1]
            Rs = all_vectors(q, b)[1:]
            prod = (Qs[:, None, :, None] * Rs[None, :, None, :]) % q
            prod = prod.reshape((len(Qs), len(Rs)) + (n,) * d)
            perm = [0, 1] + [2 + (I + Ic).index(s) for s in range(d)]
            prod = prod.transpose(perm).reshape(len(Qs) * len(Rs), N)
            digits.append(prod.astype(np.int64))
            qi, ri = np.divmod(np.arange(len(Qs) * len(Rs)), len(Rs))
            origin.append(np.stack([np.full_like(qi, si), qi, ri], axis=1))
        digits = np.concatenate(digits)
        origin = np.concatenate(origin)
        codes = digits @ self.powers
        self.codes, first = np.unique(codes, return_index=True)
        self.digits = digits[first]
        self.origin = origin[first]

    def __len__(self):
        return len(self.codes)

    def encode(self, digits: np.ndarray) -> np.ndarray:
        return digits @ self.powers

    def contains(self, codes: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.codes, codes)
        pos = np.minimum(pos, len(self.codes) - 1)
        return self.codes[pos] == codes

    def index_of(self, code: int) -> int:
        return int(np.searchsorted(self.codes, code))

    def term(self, idx: int, spec: FieldSpec) -> Term:
        si, qi, ri = (int(x) for x in self.origin[idx])
        I = _splits(self.d)[si]
        Ic = tuple(s for s in range(self.d) if s not in I)
        a, b = self.n ** len(I), self.n ** len(Ic)
        Qs = all_vectors(self.q, a)[1:]
        Qs = Qs[Qs[np.arange(len(Qs)), (Qs != 0).argmax(axis=1)] == 1]
        qv = Qs[qi].reshape((self.n,) * len(I))
        rv = all_vectors(self.q, b)[1 + ri].reshape((self.n,) * len(Ic))
        return make_term(self.d, I, MultilinearForm.from_dense(spec, qv), MultilinearForm.from_dense(spec, rv))


_WORKER: dict = {}


def _init_worker(table: _Table, target_digits: np.ndarray, r: int):
    _WORKER.update(table=table, target=target_digits, r=r)


def _search_range(lo: int, hi: int) -> list[int] | None:
    """Search decompositions whose first term index lies in ``[lo, hi)``; returns term indices."""
    table, target, r = _WORKER["table"], _WORKER["target"], _WORKER["r"]
    q = table.q

    def rec(residual: np.ndarray, start: int, stop: int, depth: int, chosen: list[int]):
        # depth = number of terms still to place, at least 2 here
        if depth == 2:
            cand = (residual[None, :] - table.digits[start:stop]) % q
            codes = table.encode(cand)
            zero = np.flatnonzero(codes == 0)
            if zero.size:
                return chosen + [start + int(zero[0])]
            hit = np.flatnonzero(table.contains(codes))
            if hit.size:
                j = start + int(hit[0])
                return chosen + [j, table.index_of(int(codes[hit[0]]))]
            return None
        for j in range(start, stop):
            nxt = (residual - table.digits[j]) % q
            if not nxt.any():
                return chosen + [j]
            found = rec(nxt, j, len(table), depth - 1, chosen + [j])
            if found is not None:
                return found
        return None

    return rec(target, lo, hi, r, [])


def exhaustive_prk_at_most(
    target: MultilinearForm,
    r: int,
    budget: int | None = None,
    workers: int = 1,
    target_id: str | None = None,
) -> SearchCertificate:
    """Decide whether ``target`` has a partition decomposition with at most ``r`` terms over ``F_q``."""
    spec = target.spec
    if not spec.is_prime_field:
        raise ValueError("exhaustive search runs over finite fields only")
    if r < 0:
        raise ValueError("r must be nonnegative")
    budget = DEFAULT_SEARCH_BUDGET if budget is None else budget
    d, n, q = target.d, target.n, spec.p
    tid = target_id or f"form(d={d},n={n})"
    if target.is_zero():
        return SearchCertificate(tid, q, r, "found", 0, 1, Decomposition(spec, d, n, ()))
    if r == 0 or d < 2:
        return SearchCertificate(tid, q, r, "exhausted-none", 0, 1)
    est = estimate_table_size(d, n, q)
    if est > budget:
        raise BudgetExceeded(est, budget, "term table too large")
    est_enum = count_multisets(est, r)
    if est_enum > budget:
        raise BudgetExceeded(est_enum, budget, f"about {est_enum} canonical decompositions")
    table = _Table(d, n, q)
    T = len(table)
    size = count_multisets(T, r)
    digits = np.zeros(n**d, dtype=np.int64)
    for key, v in target.coeffs:
        digits[np.ravel_multi_index(key, (n,) * d)] = v
    if r == 1:
        code = int(table.encode(digits))
        found = [table.index_of(code)] if table.contains(np.array([code]))[0] else None
        plan = ((0, T),)
    else:
        chunks = max(1, workers * 4)
        step = -(-T // chunks)
        plan = tuple((lo, min(T, lo + step)) for lo in range(0, T, step))
        found = None
        if workers > 1:
            with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(table, digits, r)) as ex:
                for res in ex.map(_search_range, *zip(*plan)):
                    if res is not None and found is None:
                        found = res
        else:
            _init_worker(table, digits, r)
            for lo, hi in plan:
                found = _search_range(lo, hi)
                if found is not None:
                    break
    if found is None:
        return SearchCertificate(tid, q, r, "exhausted-none", T, size, None, plan)
    dec = Decomposition(spec, d, n, tuple(table.term(i, spec) for i in found))
    if all(t.is_slice for t in dec.terms):
        dec = Decomposition(spec, d, n, dec.terms, "slice")
    check = verify(dec, target)
    if not check.ok:
        raise AssertionError(f"search produced a decomposition that fails at {check.witness}")
    return SearchCertificate(tid, q, r, "found", T, size, dec, plan)
