"""Replayable chains of slice-rank reductions on Laplace expansions.

A script is plain JSON data::

    {"name": "...", "field": 7,
     "initial": {"generator": "laplace", "n": 3, "row": 1} | {"path": "x.dec"},
     "steps": [{"kind": "linear", "betas": [{"slot": 1, "form": "<form text>"}], "c": null},
               {"kind": "syzygy", "q": [[null, "<general form text>"], ...]},
               {"kind": "symmetric", "L": "transpose" | [[...], ...]}],
     "expect": {"property": "equals_initial" | "linear_factors_unchanged" | "linear_span",
                "span": [[...], ...]}}

Slots in ``betas`` are 1-based. Span vectors index ``slot * n + i``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import decomp
from ._poly import Poly, parse_poly_lines
from .decomp import (
    Decomposition,
    LinearReduction,
    ReductionError,
    SymmetricReduction,
    SyzygyReduction,
    apply_reduction,
    structurally_equal,
    verify,
)
from .field import INTEGERS, FieldSpec, parse_field
from .linalg import Matrix, rank
from .multilinear import MultilinearForm, _clean, basis_vector, det_form, minor_form, transpose_map
from .multilinear import dumps as form_dumps
from .multilinear import loads as form_loads


class ScriptError(ValueError):
    """A script step failed; ``step`` is its 1-based index (0 for setup or expectation)."""

    def __init__(self, step: int, message: str):
        self.step = step
        super().__init__(f"step {step}: {message}" if step else message)


@dataclass
class ScriptTrace:
    name: str
    decompositions: list[Decomposition]
    steps: list[str]
    expectation: str
    satisfied: bool

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "steps": self.steps,
            "terms": [len(dec) for dec in self.decompositions],
            "verified": len(self.decompositions),
            "expectation": self.expectation,
            "satisfied": self.satisfied,
        }


# --- parsing -----------------------------------------------------------------------


def _initial(spec: FieldSpec, data: dict, base: Path) -> Decomposition:
    if "path" in data:
        return decomp.loads((base / data["path"]).read_text()).with_field(spec)
    gen = data.get("generator")
    if gen == "laplace":
        return decomp.laplace(int(data["n"]), int(data.get("row", 1)), spec)
    if gen == "two-row":
        return decomp.two_row_laplace(tuple(data.get("rows", (1, 2))), spec)
    if gen == "det4-quadratic":
        return decomp.det4_quadratic(spec)
    raise ScriptError(0, f"unknown initial decomposition {data!r}")


def _poly_entry(text: str | None) -> Poly | None:
    if text is None:
        return None
    return parse_poly_lines(_clean(text))[1]


def parse_step(spec: FieldSpec, n: int, data: dict):
    kind = data.get("kind")
    if kind == "linear":
        betas = tuple((int(b["slot"]) - 1, form_loads(b["form"]).with_field(spec)) for b in data["betas"])
        c = data.get("c")
        return LinearReduction(betas, None if c is None else tuple(tuple(row) for row in c))
    if kind == "syzygy":
        return SyzygyReduction(tuple(tuple(_poly_entry(e) for e in row) for row in data["q"]))
    if kind == "symmetric":
        L = data["L"]
        if L == "transpose":
            return SymmetricReduction(transpose_map(spec, n))
        return SymmetricReduction(Matrix(spec, tuple(tuple(row) for row in L)))
    raise ValueError(f"unknown step kind {kind!r}")


def linear_factor_vectors(dec: Decomposition) -> list[tuple[int, ...]]:
    """The linear factors of a decomposition as vectors indexed by ``slot * n + i``."""
    out = []
    for t in dec.terms:
        if len(t.support) == 1:
            out.append(t.q_poly().linear_vector(dec.d))
        elif len(t.complement) == 1:
            out.append(t.r_poly().linear_vector(dec.d))
    return out


def _spans_equal(spec: FieldSpec, a: list, b: list) -> bool:
    def rk(vs):
        return rank(Matrix(spec, tuple(map(tuple, vs)))) if vs else 0

    return rk(a) == rk(b) == rk(list(a) + list(b))


# --- running ------------------------------------------------------------------------


def run_script(script: dict[str, Any], base: str | Path = ".") -> ScriptTrace:
    """Apply each step, verifying every intermediate against ``det_n``."""
    base = Path(base)
    spec = parse_field(script.get("field", "int"))
    try:
        start = _initial(spec, script["initial"], base)
    except (KeyError, ValueError, OSError) as exc:
        raise ScriptError(0, f"initial decomposition: {exc}") from None
    target = det_form(start.n, spec)
    res = verify(start, target)
    if not res.ok:
        raise ScriptError(0, f"initial decomposition fails at {res.witness}")
    trace = [start]
    names = []
    for i, data in enumerate(script.get("steps", []), 1):
        try:
            step = parse_step(spec, start.n, data)
            trace.append(apply_reduction(trace[-1], step, target))
        except (ReductionError, ValueError, KeyError, TypeError) as exc:
            raise ScriptError(i, str(exc)) from None
        names.append(step.kind)
    expect = script.get("expect", {})
    prop = expect.get("property", "verifies")
    final = trace[-1]
    if prop == "verifies":
        ok = True
    elif prop == "equals_initial":
        ok = structurally_equal(start, final)
    elif prop == "linear_factors_unchanged":
        ok = sorted(linear_factor_vectors(start)) == sorted(linear_factor_vectors(final))
    elif prop == "linear_span":
        ok = _spans_equal(spec, linear_factor_vectors(final), [tuple(v) for v in expect["span"]])
    else:
        raise ScriptError(0, f"unknown expectation {prop!r}")
    if not ok:
        raise ScriptError(0, f"expectation {prop!r} not met")
    return ScriptTrace(script.get("name", ""), trace, names, prop, ok)


def load_script(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


# --- built-in scripts ----------------------------------------------------------------


def _linear_text(spec: FieldSpec, n: int, vec) -> str:
    return form_dumps(MultilinearForm.from_dict(spec, 1, n, {(i,): v for i, v in enumerate(vec)}))


def round_trip_script(p: int = 7, scale: int = 3) -> dict:
    """laplace(3,1) -> rescaled mixed basis of the row-1 forms -> standard basis."""
    spec = parse_field(p)
    mix = [[scale, scale, 0], [0, scale, 0], [0, 0, scale]]
    return {
        "name": "linear round trip",
        "field": p,
        "initial": {"generator": "laplace", "n": 3, "row": 1},
        "steps": [
            {"kind": "linear", "betas": [{"slot": 1, "form": _linear_text(spec, 3, row)} for row in mix], "c": None},
            {
                "kind": "linear",
                "betas": [{"slot": 1, "form": _linear_text(spec, 3, basis_vector(3, j))} for j in range(3)],
                "c": None,
            },
        ],
        "expect": {"property": "equals_initial"},
    }


def transpose_script() -> dict:
    """laplace(4,1) under ``A -> A^T`` becomes a first-column expansion."""
    n = 4
    span = [[int(k == s * n) for k in range(n * n)] for s in range(n)]
    return {
        "name": "transpose",
        "field": "int",
        "initial": {"generator": "laplace", "n": n, "row": 1},
        "steps": [{"kind": "symmetric", "L": "transpose"}],
        "expect": {"property": "linear_span", "span": span},
    }


def random_alternating(spec: FieldSpec, n: int, r: int, degree: int, seed: int) -> list[list[Poly | None]]:
    """Alternating ``r x r`` matrix of random homogeneous forms of the given degree on ``d = n`` slots."""
    rng = np.random.default_rng(seed)
    q: list[list[Poly | None]] = [[None] * r for _ in range(r)]
    for i in range(r):
        for j in range(i + 1, r):
            mapping = {}
            for _ in range(3):
                slots = sorted(rng.choice(n, size=degree, replace=False).tolist())
                mono = tuple((s, int(rng.integers(n))) for s in slots)
                mapping[mono] = int(rng.integers(1, spec.q))
            P = Poly.from_dict(spec, n, mapping)
            q[i][j], q[j][i] = P, -P
    return q


def syzygy_script(p: int = 5, seed: int = 2024) -> dict:
    spec = parse_field(p)
    q = random_alternating(spec, 3, 3, 1, seed)
    return {
        "name": "syzygy",
        "field": p,
        "initial": {"generator": "laplace", "n": 3, "row": 1},
        "steps": [{"kind": "syzygy", "q": [[None if e is None else e.dumps(1) for e in row] for row in q]}],
        "expect": {"property": "linear_factors_unchanged"},
    }


def builtin_scripts() -> dict[str, dict]:
    return {"round-trip": round_trip_script(), "transpose": transpose_script(), "syzygy": syzygy_script()}


# --- minor independence --------------------------------------------------------------------


@dataclass
class MinorReport:
    rows: tuple[int, int]
    rank: int
    count: int
    replaced: bool
    monomials: int = field(default=0)

    @property
    def independent(self) -> bool:
        return self.rank == self.count

    def to_record(self) -> dict:
        return {
            "rows": list(self.rows),
            "rank": self.rank,
            "minors": self.count,
            "independent": self.independent,
            "replaced": self.replaced,
        }


def check_minor_independence(rows=(1, 2), n: int = 4, spec: FieldSpec = INTEGERS, replace: bool = False) -> MinorReport:
    """Rank of the coefficient vectors of the ``2 x 2`` minors on fixed rows.

    With ``replace`` the last minor is swapped for the sum of the first two.
    """
    rows = tuple(int(r) for r in rows)
    if len(rows) != 2 or len(set(rows)) != 2 or not all(1 <= r <= n for r in rows):
        raise ValueError(f"need two distinct rows in 1..{n}")
    slots = [r - 1 for r in rows]
    polys = []
    for cols in itertools.combinations(range(n), 2):
        polys.append(Poly.from_form(minor_form(spec, n, cols), slots))
    if replace:
        polys[-1] = polys[0] + polys[1]
    monos = sorted({m for P in polys for m in P.as_dict})
    vecs = [tuple(P.as_dict.get(m, 0) for m in monos) for P in polys]
    return MinorReport(rows, rank(Matrix(spec, tuple(vecs))), len(polys), replace, len(monos))
