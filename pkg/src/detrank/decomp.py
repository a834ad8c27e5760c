"""Partition-rank and slice-rank decompositions: generators, verifier, reductions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Literal, Sequence, Union

from ._poly import Poly, parse_poly_lines
from .field import INTEGERS, FieldSpec, parse_field
from .linalg import Matrix, in_span
from .multilinear import (
    MultilinearForm,
    ShapeError,
    _clean,
    det_form,
    dumps as form_dumps,
    matrix_space_map,
    minor_form,
    parse_lines,
    tensor_product,
)

Factor = Union[MultilinearForm, Poly]


class ReductionError(ValueError):
    """A reduction precondition failed."""


def _complement(d: int, support: Sequence[int]) -> tuple[int, ...]:
    return tuple(s for s in range(d) if s not in support)


def _is_normal(d: int, support: Sequence[int]) -> bool:
    k = len(support)
    return 2 * k < d or (2 * k == d and 0 in support)


@dataclass(frozen=True)
class Term:
    """``q`` on the slots ``support`` times ``r`` on the remaining slots.

    ``r`` is a :class:`Poly` only after a reduction leaves the multilinear
    world (slice terms only); otherwise both factors are multilinear forms
    whose slots follow ascending slot order.
    """

    d: int
    support: tuple[int, ...]
    q: MultilinearForm
    r: Factor

    def __post_init__(self):
        sup = tuple(self.support)
        object.__setattr__(self, "support", sup)
        if not sup or len(sup) >= self.d or sorted(set(sup)) != list(sup) or sup[-1] >= self.d or sup[0] < 0:
            raise ShapeError(f"support {sup} must be a nonempty proper sorted subset of {self.d} slots")
        if self.q.d != len(sup):
            raise ShapeError("first factor degree does not match its support")
        if isinstance(self.r, MultilinearForm):
            if self.r.d != self.d - len(sup) or self.r.n != self.q.n or self.r.spec != self.q.spec:
                raise ShapeError("second factor does not match the complementary slots")

    @property
    def complement(self) -> tuple[int, ...]:
        return _complement(self.d, self.support)

    @property
    def is_slice(self) -> bool:
        return len(self.support) == 1

    @property
    def is_multilinear(self) -> bool:
        return isinstance(self.r, MultilinearForm)

    def q_poly(self) -> Poly:
        return Poly.from_form(self.q, self.support)

    def r_poly(self) -> Poly:
        return self.r if isinstance(self.r, Poly) else Poly.from_form(self.r, self.complement)

    def product(self) -> MultilinearForm:
        return tensor_product(self.q, self.support, self.r, self.complement)

    def scale(self, c: int) -> Term:
        return Term(self.d, self.support, self.q.scale(c), self.r)


def make_term(d: int, support: Sequence[int], q: MultilinearForm, r: Factor) -> Term:
    """Build a term, swapping factors so that ``|I| <= d/2`` (``0 in I`` on ties)."""
    support = tuple(sorted(support))
    if isinstance(r, MultilinearForm) and not _is_normal(d, support):
        return Term(d, _complement(d, support), r, q)
    return Term(d, support, q, r)


@dataclass(frozen=True)
class Decomposition:
    spec: FieldSpec
    d: int
    n: int
    terms: tuple[Term, ...] = ()
    kind: Literal["slice", "partition"] = "partition"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.kind not in ("slice", "partition"):
            raise ValueError(f"unknown decomposition kind {self.kind!r}")
        for i, t in enumerate(self.terms):
            if t.d != self.d or t.q.n != self.n or t.q.spec != self.spec:
                raise ShapeError(f"term {i + 1} does not match the decomposition shape")
            if self.kind == "slice" and not t.is_slice:
                raise ShapeError(f"term {i + 1} has support {t.support}; slice terms need one slot")

    def __len__(self):
        return len(self.terms)

    @property
    def r(self) -> int:
        return len(self.terms)

    def with_field(self, spec: FieldSpec) -> Decomposition:
        terms = []
        for t in self.terms:
            if not t.is_multilinear:
                raise ValueError("cannot change the field of a decomposition with general factors")
            terms.append(Term(t.d, t.support, t.q.with_field(spec), t.r.with_field(spec)))
        return Decomposition(spec, self.d, self.n, tuple(terms), self.kind)

    def normalized(self) -> Decomposition:
        return Decomposition(
            self.spec, self.d, self.n, tuple(make_term(t.d, t.support, t.q, t.r) for t in self.terms), self.kind
        )


def _kind_for(terms: Sequence[Term]) -> str:
    return "slice" if terms and all(t.is_slice for t in terms) else "partition"


# --- expansion and verification ----------------------------------------------


def expand_poly(dec: Decomposition) -> Poly:
    acc = Poly(dec.spec, dec.n)
    for t in dec.terms:
        acc = acc + t.q_poly() * t.r_poly()
    return acc


def expand(dec: Decomposition) -> MultilinearForm:
    """The sum of the term products as a single coefficient map."""
    if all(t.is_multilinear for t in dec.terms):
        acc: dict[tuple[int, ...], int] = {}
        spec = dec.spec
        for t in dec.terms:
            for k, v in t.product().coeffs:
                acc[k] = spec.add(acc.get(k, 0), v)
        return MultilinearForm.from_dict(spec, dec.d, dec.n, acc)
    out = expand_poly(dec).to_form(range(dec.d))
    if out is None:
        raise ValueError("decomposition does not sum to a multilinear form")
    return out


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    witness: tuple | None = None
    expected: int | None = None
    actual: int | None = None

    def __bool__(self):
        return self.ok

    def to_record(self) -> dict:
        rec = {"verified": self.ok}
        if not self.ok:
            w = self.witness
            if w and isinstance(w[0], tuple):
                rec["witness"] = [f"{s + 1}.{i + 1}" for s, i in w]
            else:
                rec["witness"] = [i + 1 for i in w]
            rec["expected"] = self.expected
            rec["actual"] = self.actual
        return rec


def _first_mismatch(a: dict, b: dict) -> VerifyResult:
    for key in sorted(set(a) | set(b)):
        if a.get(key, 0) != b.get(key, 0):
            return VerifyResult(False, key, b.get(key, 0), a.get(key, 0))
    return VerifyResult(True)


def verify(dec: Decomposition, target: MultilinearForm) -> VerifyResult:
    """Compare ``expand(dec)`` with ``target`` coefficient by coefficient."""
    if (dec.spec, dec.d, dec.n) != (target.spec, target.d, target.n):
        raise ShapeError(
            f"decomposition shape ({dec.d},{dec.n},{dec.spec}) does not match target ({target.d},{target.n},{target.spec})"
        )
    if all(t.is_multilinear for t in dec.terms):
        return _first_mismatch(expand(dec).as_dict, target.as_dict)
    return _first_mismatch(expand_poly(dec).as_dict, Poly.from_form(target, range(target.d)).as_dict)


# --- generators ------------------------------------------------------------------


def laplace(n: int, row: int = 1, spec: FieldSpec = INTEGERS) -> Decomposition:
    """Cofactor expansion of ``det_n`` along ``row`` (1-based): ``n`` slice terms."""
    if n < 2 or not 1 <= row <= n:
        raise ValueError(f"need n >= 2 and 1 <= row <= n, got n={n}, row={row}")
    i = row - 1
    terms = []
    for j in range(n):
        sign = -1 if (i + j) % 2 else 1
        alpha = MultilinearForm.from_dict(spec, 1, n, {(j,): sign})
        minor = minor_form(spec, n, [c for c in range(n) if c != j])
        terms.append(make_term(n, (i,), alpha, minor))
    return Decomposition(spec, n, n, tuple(terms), "slice")


def two_row_laplace(rows: Sequence[int] = (1, 2), spec: FieldSpec = INTEGERS) -> Decomposition:
    """Generalized Laplace expansion of ``det_4`` along two rows (1-based): six terms."""
    I = tuple(sorted(r - 1 for r in rows))
    if len(I) != 2 or len(set(I)) != 2 or not all(0 <= i < 4 for i in I):
        raise ValueError(f"rows must be two distinct values in 1..4, got {rows}")
    terms = []
    for J in itertools.combinations(range(4), 2):
        Jc = tuple(c for c in range(4) if c not in J)
        sign = -1 if (sum(I) + sum(J) + 4) % 2 else 1  # (-1)^{sum of 1-based row and column labels}
        q = minor_form(spec, 4, J).scale(sign)
        r = minor_form(spec, 4, Jc)
        terms.append(make_term(4, I, q, r))
    return Decomposition(spec, 4, 4, tuple(terms), "partition")


def _minor_sum(spec: FieldSpec) -> MultilinearForm:
    acc = MultilinearForm.zero(spec, 2, 4)
    for J in itertools.combinations(range(4), 2):
        acc = acc + minor_form(spec, 4, J)
    return acc


def det4_quadratic(spec: FieldSpec = INTEGERS) -> Decomposition:
    """Three-term quadratic expansion of ``det_4`` with supports {1,2}, {1,3}, {1,4}."""
    s = _minor_sum(spec)
    terms = []
    for sign, other in ((1, 1), (-1, 2), (1, 3)):
        terms.append(make_term(4, (0, other), s.scale(sign), s))
    return Decomposition(spec, 4, 4, tuple(terms), "partition")


# --- reductions ----------------------------------------------------------------------


@dataclass(frozen=True)
class LinearReduction:
    """New linear factors ``betas`` (slot, linear form) with ``alpha_i = sum_j c[i][j] beta_j``.

    ``c`` may be omitted; it is then solved over the span of the betas.
    """

    betas: tuple[tuple[int, MultilinearForm], ...]
    c: tuple[tuple[int, ...], ...] | None = None
    kind: str = field(default="linear", init=False)


@dataclass(frozen=True)
class SyzygyReduction:
    """Alternating matrix of degree ``d-2`` forms; ``None`` entries are zero."""

    q: tuple[tuple[Poly | None, ...], ...]
    kind: str = field(default="syzygy", init=False)


@dataclass(frozen=True)
class SymmetricReduction:
    """Linear map ``L`` of the ``n^2`` matrix entries (row-major) fixing the target."""

    L: Matrix
    kind: str = field(default="symmetric", init=False)


ReductionStep = Union[LinearReduction, SyzygyReduction, SymmetricReduction]


def _factor_from_poly(P: Poly, d: int, slots: Sequence[int]) -> Factor:
    f = P.to_form(slots)
    if f is not None:
        return f
    if P.is_zero():
        return MultilinearForm.zero(P.spec, len(slots), P.n)
    return P


def _require_slice(dec: Decomposition, what: str):
    if not all(t.is_slice for t in dec.terms):
        raise ReductionError(f"{what} reduction needs a slice decomposition")


def _linear(dec: Decomposition, step: LinearReduction) -> Decomposition:
    _require_slice(dec, "linear")
    r, d, n, spec = dec.r, dec.d, dec.n, dec.spec
    if len(step.betas) != r:
        raise ReductionError(f"expected {r} new linear forms, got {len(step.betas)}")
    beta_vecs = []
    for j, (slot, b) in enumerate(step.betas):
        if b.d != 1 or b.n != n or b.spec != spec or not 0 <= slot < d:
            raise ReductionError(f"beta_{j + 1} is not a linear form on one slot")
        beta_vecs.append(Poly.from_form(b, [slot]).linear_vector(d))
    alpha_vecs = [t.q_poly().linear_vector(d) for t in dec.terms]
    if step.c is None:
        c = []
        for i, a in enumerate(alpha_vecs):
            sol = in_span(spec, beta_vecs, a)
            if sol is None:
                raise ReductionError(f"alpha_{i + 1} is not in the span of the betas")
            c.append(sol)
    else:
        c = [tuple(spec.reduce(x) for x in row) for row in step.c]
        if len(c) != r or any(len(row) != r for row in c):
            raise ReductionError(f"coefficient matrix must be {r}x{r}")
        for i, a in enumerate(alpha_vecs):
            combo = tuple(spec.reduce(sum(c[i][j] * beta_vecs[j][t] for j in range(r))) for t in range(d * n))
            if combo != a:
                raise ReductionError(f"alpha_{i + 1} != sum_j c[{i + 1}][j] beta_j")
    gs = [t.r_poly() for t in dec.terms]
    terms = []
    for j, (slot, b) in enumerate(step.betas):
        h = Poly(spec, n)
        for i in range(r):
            if c[i][j]:
                h = h + gs[i].scale(c[i][j])
        terms.append(make_term(d, (slot,), b, _factor_from_poly(h, d, _complement(d, (slot,)))))
    return Decomposition(spec, d, n, tuple(terms), "slice")


def _syzygy(dec: Decomposition, step: SyzygyReduction) -> Decomposition:
    _require_slice(dec, "syzygy")
    r, d, n, spec = dec.r, dec.d, dec.n, dec.spec
    q = step.q
    if len(q) != r or any(len(row) != r for row in q):
        raise ReductionError(f"syzygy matrix must be {r}x{r}")
    zero = Poly(spec, n)
    Q = [[zero if e is None else e for e in row] for row in q]
    for i in range(r):
        if not Q[i][i].is_zero():
            raise ReductionError(f"syzygy matrix is not alternating: q[{i + 1}][{i + 1}] != 0")
        for j in range(r):
            if Q[i][j].degrees() - {d - 2}:
                raise ReductionError(f"q[{i + 1}][{j + 1}] must have degree {d - 2}")
            if not (Q[i][j] + Q[j][i]).is_zero():
                raise ReductionError(f"syzygy matrix is not alternating: q[{i + 1}][{j + 1}] != -q[{j + 1}][{i + 1}]")
    alphas = [t.q_poly() for t in dec.terms]
    terms = []
    for i, t in enumerate(dec.terms):
        h = t.r_poly()
        for j in range(r):
            if j != i and not Q[i][j].is_zero():
                h = h - Q[i][j] * alphas[j]
        terms.append(Term(d, t.support, t.q, _factor_from_poly(h, d, t.complement)))
    return Decomposition(spec, d, n, tuple(terms), dec.kind)


def _symmetric(dec: Decomposition, step: SymmetricReduction, target: MultilinearForm) -> Decomposition:
    d, n, spec = dec.d, dec.n, dec.spec
    try:
        composed = matrix_space_map(target, step.L)
    except ValueError as exc:
        raise ReductionError(f"target composed with L: {exc}") from None
    check = _first_mismatch(composed.as_dict, target.as_dict)
    if not check.ok:
        raise ReductionError(
            f"f o L != f at index {tuple(i + 1 for i in check.witness)}: {check.actual} vs {check.expected}"
        )
    terms = []
    for idx, t in enumerate(dec.terms):
        qp = t.q_poly().substitute(step.L).as_multilinear()
        rp = t.r_poly().substitute(step.L).as_multilinear()
        if qp is None or rp is None:
            raise ReductionError(f"term {idx + 1} is not a product of multilinear factors after the map")
        (qs, qf), (rs, rf) = qp, rp
        if sorted(qs + rs) != list(range(d)):
            raise ReductionError(f"term {idx + 1} factors no longer live on complementary slots")
        terms.append(make_term(d, qs, qf, rf))
    kind = "slice" if dec.kind == "slice" and all(t.is_slice for t in terms) else "partition"
    return Decomposition(spec, d, n, tuple(terms), kind)


def apply_reduction(dec: Decomposition, step: ReductionStep, target: MultilinearForm | None = None) -> Decomposition:
    """Apply one linear, syzygy or symmetric reduction; the result still sums to the target."""
    if isinstance(step, LinearReduction):
        out = _linear(dec, step)
    elif isinstance(step, SyzygyReduction):
        out = _syzygy(dec, step)
    elif isinstance(step, SymmetricReduction):
        if target is None:
            target = expand(dec)
        out = _symmetric(dec, step, target)
    else:
        raise TypeError(f"unknown reduction step {step!r}")
    if target is not None:
        res = verify(out, target)
        if not res.ok:
            raise ReductionError(f"reduced decomposition fails verification at {res.witness}")
    return out


# --- structural comparison -------------------------------------------------------------


def _canonical_term(t: Term):
    q, r = t.q, t.r
    lead = q.leading()
    if q.spec.is_prime_field and lead not in (0, 1):
        inv = q.spec.inv(lead)
        q = q.scale(inv)
        r = r.scale(lead) if isinstance(r, MultilinearForm) else r.scale(lead)
    elif not q.spec.is_prime_field and lead == -1:
        q, r = q.scale(-1), r.scale(-1)
    rkey = r.coeffs if isinstance(r, MultilinearForm) else ("g", r.terms)
    return (t.support, q.coeffs, rkey)


def structurally_equal(a: Decomposition, b: Decomposition) -> bool:
    """Equal term multisets up to order and ``(lambda, 1/lambda)`` factor scaling."""
    if (a.spec, a.d, a.n, a.r) != (b.spec, b.d, b.n, b.r):
        return False
    return sorted(map(_canonical_term, a.terms)) == sorted(map(_canonical_term, b.terms))


# --- text format ---------------------------------------------------------------------------


def _factor_dumps(f: Factor, degree: int) -> str:
    return form_dumps(f) if isinstance(f, MultilinearForm) else f.dumps(degree)


def dumps(dec: Decomposition) -> str:
    """Header ``kind d n p r``; per term ``I: i1,...`` then the two factor forms."""
    out = [f"{dec.kind} {dec.d} {dec.n} {dec.spec.modulus} {dec.r}\n"]
    for t in dec.terms:
        out.append("I: " + ",".join(str(s + 1) for s in t.support) + "\n")
        out.append(form_dumps(t.q))
        out.append(_factor_dumps(t.r, dec.d - len(t.support)))
    return "".join(out)


def _parse_factor(lines: list[str]) -> Factor:
    if lines[0].split()[0] == "g":
        return parse_poly_lines(lines)[1]
    return parse_lines(lines)


def loads(text: str) -> Decomposition:
    lines = _clean(text)
    if not lines:
        raise ValueError("empty decomposition text")
    head = lines[0].split()
    if len(head) != 5:
        raise ValueError(f"bad decomposition header {lines[0]!r}")
    kind = head[0]
    d, n, p, r = (int(x) for x in head[1:])
    spec = parse_field(p)
    blocks: list[list[str]] = []
    for line in lines[1:]:
        if line.startswith("I:"):
            blocks.append([line])
        elif not blocks:
            raise ValueError(f"expected a support line, got {line!r}")
        else:
            blocks[-1].append(line)
    if len(blocks) != r:
        raise ValueError(f"header announces {r} terms, found {len(blocks)}")
    terms = []
    for bi, block in enumerate(blocks):
        support = tuple(int(x) - 1 for x in block[0][2:].split(",") if x.strip())
        headers = [i for i, line in enumerate(block) if i > 0 and ":" not in line]
        if len(headers) != 2:
            raise ValueError(f"term {bi + 1}: expected two factor forms")
        f1 = _parse_factor(block[headers[0] : headers[1]])
        f2 = _parse_factor(block[headers[1] :])
        if not isinstance(f1, MultilinearForm):
            raise ValueError(f"term {bi + 1}: first factor must be multilinear")
        if f1.spec != spec or f1.n != n:
            raise ValueError(f"term {bi + 1}: factor field or dimension disagrees with header")
        terms.append(Term(d, support, f1, f2))
    return Decomposition(spec, d, n, tuple(terms), kind)


def det_target(dec: Decomposition) -> MultilinearForm:
    if dec.d != dec.n:
        raise ShapeError("det target needs d == n")
    return det_form(dec.n, dec.spec)

