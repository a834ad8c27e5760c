"""Sparse polynomials in the entries ``x[slot][index]`` of a tuple of vectors.

Only used where a reduction leaves the multilinear world (syzygy rewrites,
matrix-space substitutions); everything else stays in ``MultilinearForm``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .field import FieldSpec, parse_field
from .linalg import Matrix
from .multilinear import MultilinearForm

Var = tuple[int, int]  # (slot, index), 0-based
Monomial = tuple[Var, ...]  # sorted, repeats allowed


@dataclass(frozen=True)
class Poly:
    spec: FieldSpec
    n: int
    terms: tuple[tuple[Monomial, int], ...] = ()

    @classmethod
    def from_dict(cls, spec: FieldSpec, n: int, mapping: Mapping[Monomial, int]) -> Poly:
        acc: dict[Monomial, int] = {}
        for mono, v in mapping.items():
            mono = tuple(sorted(tuple(x) for x in mono))
            acc[mono] = spec.add(acc.get(mono, 0), v)
        return cls(spec, n, tuple(sorted((m, v) for m, v in acc.items() if v != 0)))

    @classmethod
    def from_form(cls, T: MultilinearForm, slots: Iterable[int]) -> Poly:
        slots = list(slots)
        if len(slots) != T.d:
            raise ValueError("need one slot label per form slot")
        return cls.from_dict(T.spec, T.n, {tuple(zip(slots, key)): v for key, v in T.coeffs})

    @cached_property
    def as_dict(self) -> dict[Monomial, int]:
        return dict(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def degrees(self) -> set[int]:
        return {len(m) for m, _ in self.terms}

    def __add__(self, other: Poly) -> Poly:
        acc = dict(self.terms)
        for m, v in other.terms:
            acc[m] = self.spec.add(acc.get(m, 0), v)
        return Poly.from_dict(self.spec, self.n, acc)

    def scale(self, c: int) -> Poly:
        return Poly.from_dict(self.spec, self.n, {m: self.spec.mul(v, c) for m, v in self.terms})

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other: Poly) -> Poly:
        acc: dict[Monomial, int] = {}
        for m1, v1 in self.terms:
            for m2, v2 in other.terms:
                m = tuple(sorted(m1 + m2))
                acc[m] = self.spec.add(acc.get(m, 0), self.spec.mul(v1, v2))
        return Poly.from_dict(self.spec, self.n, acc)

    def substitute(self, L: Matrix) -> Poly:
        """Replace ``x[r][c]`` by ``sum L[r*n+c, s*n+b] x[s][b]`` (matrix-space map)."""
        n = self.n
        images: dict[Var, Poly] = {}

        def image(var: Var) -> Poly:
            if var not in images:
                row = L.rows[var[0] * n + var[1]]
                images[var] = Poly.from_dict(
                    self.spec, n, {((j // n, j % n),): a for j, a in enumerate(row) if a}
                )
            return images[var]

        out = Poly(self.spec, n)
        one = Poly.from_dict(self.spec, n, {(): 1})
        for mono, v in self.terms:
            acc = one.scale(v)
            for var in mono:
                acc = acc * image(var)
                if acc.is_zero():
                    break
            out = out + acc
        return out

    def slots(self) -> set[int]:
        return {s for m, _ in self.terms for s, _ in m}

    def to_form(self, slots: Sequence[int]) -> MultilinearForm | None:
        """Back to a multilinear form on ``slots`` (in that order), or ``None``."""
        slots = list(slots)
        pos = {s: t for t, s in enumerate(slots)}
        mapping = {}
        for mono, v in self.terms:
            if len(mono) != len(slots) or sorted(s for s, _ in mono) != sorted(slots):
                return None
            key = [0] * len(slots)
            for s, i in mono:
                key[pos[s]] = i
            mapping[tuple(key)] = v
        return MultilinearForm.from_dict(self.spec, len(slots), self.n, mapping)

    def as_multilinear(self) -> tuple[tuple[int, ...], MultilinearForm] | None:
        """``(slots, form)`` when the polynomial is multilinear on one slot set."""
        if not self.terms:
            return None
        slots = tuple(sorted(self.slots()))
        f = self.to_form(slots)
        return None if f is None else (slots, f)

    def linear_vector(self, d: int) -> tuple[int, ...]:
        """Coefficient vector of a linear polynomial over the ``d*n`` variables."""
        vec = [0] * (d * self.n)
        for mono, v in self.terms:
            if len(mono) != 1:
                raise ValueError("not a linear form")
            s, i = mono[0]
            vec[s * self.n + i] = v
        return tuple(vec)

    def dumps(self, degree: int) -> str:
        """Header ``g degree n p`` then ``s.i,s.i,... : value`` per monomial (1-based)."""
        lines = [f"g {degree} {self.n} {self.spec.modulus}"]
        for mono, v in self.terms:
            lines.append(",".join(f"{s + 1}.{i + 1}" for s, i in mono) + f" : {v}")
        return "\n".join(lines) + "\n"


def parse_poly_lines(lines: list[str]) -> tuple[int, Poly]:
    parts = lines[0].split()
    if len(parts) != 4 or parts[0] != "g":
        raise ValueError(f"bad general-form header {lines[0]!r}")
    degree, n, p = (int(x) for x in parts[1:])
    spec = parse_field(p)
    mapping: dict[Monomial, int] = {}
    for line in lines[1:]:
        lhs, _, rhs = line.partition(":")
        mono = []
        for tok in lhs.split(","):
            tok = tok.strip()
            if tok:
                s, i = tok.split(".")
                mono.append((int(s) - 1, int(i) - 1))
        mapping[tuple(sorted(mono))] = int(rhs)
    P = Poly.from_dict(spec, n, mapping)
    if P.degrees() - {degree}:
        raise ValueError("general form is not homogeneous of the stated degree")
    return degree, P
