"""Bias and analytic rank of multilinear forms over prime fields."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .linalg import batch_rank, rank_deficient_probability
from .multilinear import MultilinearForm, is_nontrivial

DEFAULT_BUDGET = 2**24
BUDGET_ENV = "DETRANK_BUDGET"
MC_CHUNK = 2**16


class BudgetExceeded(RuntimeError):
    """The requested enumeration is larger than the configured budget."""

    def __init__(self, size: int, budget: int, hint: str = ""):
        self.size = size
        self.budget = budget
        msg = f"enumeration of {size} points exceeds budget {budget}"
        super().__init__(msg + (f"; {hint}" if hint else ""))


def default_budget() -> int:
    env = os.environ.get(BUDGET_ENV)
    return int(env) if env else DEFAULT_BUDGET


@dataclass(frozen=True)
class BiasReport:
    q: int
    method: str
    bias: Fraction | None = None
    estimate: float | None = None
    half_width: float | None = None
    confidence: float | None = None
    samples: int | None = None
    seed: int | None = None

    @property
    def value(self) -> float:
        return float(self.bias) if self.bias is not None else self.estimate

    @property
    def ark(self) -> float:
        if self.bias is not None:
            return ark_from_bias(self.bias, self.q)
        if self.estimate <= 0:
            return math.inf
        return -math.log(self.estimate) / math.log(self.q)

    @property
    def ark_ceiling(self) -> int | None:
        """``ceil(ark)`` decided on the exact rational; ``None`` for estimates."""
        return None if self.bias is None else ark_ceiling(self.bias, self.q)

    def to_record(self) -> dict:
        rec = {"method": self.method, "q": self.q, "ark": _decimal(self.ark)}
        if self.bias is not None:
            rec["bias"] = f"{self.bias.numerator}/{self.bias.denominator}"
            rec["ark_ceiling"] = self.ark_ceiling
        else:
            rec.update(
                estimate=repr(self.estimate),
                half_width=repr(self.half_width),
                confidence=self.confidence,
                samples=self.samples,
                seed=self.seed,
            )
        return rec


def _decimal(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.15g}"


def ark_from_bias(bias: Fraction, q: int) -> float:
    if bias <= 0:
        return math.inf
    return (math.log(bias.denominator) - math.log(bias.numerator)) / math.log(q)


def ark_ceiling(bias: Fraction, q: int) -> int:
    """Smallest integer ``k`` with ``bias >= q**-k``, i.e. ``ceil(-log_q bias)``."""
    if bias <= 0:
        raise ValueError("ark is infinite for zero bias")
    k = 0
    while bias * q**k < 1:
        k += 1
    return k


def _require_prime(T: MultilinearForm):
    if not T.spec.is_prime_field:
        raise ValueError("bias is defined over finite fields only")
    if T.d < 2:
        raise ValueError("bias computations need d >= 2")


@lru_cache(maxsize=32)
def all_vectors(q: int, n: int) -> np.ndarray:
    """Every vector of ``F_q^n`` as rows, in lexicographic order."""
    grid = np.indices((q,) * n).reshape(n, -1).T
    return np.ascontiguousarray(grid, dtype=np.int64)


def _point_blocks(q: int, n: int, k: int, chunk: int):
    """Yield lists of ``k`` arrays ``(B, n)`` enumerating ``(F_q^n)^k`` in blocks."""
    V = all_vectors(q, n)
    m = V.shape[0]
    total = m**k
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        yield [V[(idx // m ** (k - 1 - s)) % m] for s in range(k)]


def contract_prefix(C: np.ndarray, xs: Sequence[np.ndarray], q: int) -> np.ndarray:
    """Contract the leading slots of dense ``C`` with batched vectors; returns ``(B, n, ..., n)``."""
    n = C.shape[0]
    rest = C.ndim - len(xs)
    if not xs:
        return C[None] % q
    B = xs[0].shape[0]
    G = (xs[0] @ C.reshape(n, -1)) % q
    for x in xs[1:]:
        G = np.einsum("bi,bij->bj", x, G.reshape(B, n, -1)) % q
    return G.reshape((B,) + (n,) * rest)


def _dense(T: MultilinearForm) -> np.ndarray:
    return T.to_dense() % T.spec.p


def bias_exact(T: MultilinearForm, budget: int | None = None) -> BiasReport:
    """``Pr[T=0] - Pr[T=y]`` by enumerating every point of ``(F_q^n)^d``."""
    _require_prime(T)
    budget = default_budget() if budget is None else budget
    q, n, d = T.spec.p, T.n, T.d
    size = q ** (n * d)
    if size > budget:
        raise BudgetExceeded(size, budget, "use bias_via_gradient or bias_monte_carlo")
    C = _dense(T)
    V = all_vectors(q, n)
    counts = np.zeros(q, dtype=np.int64)
    chunk = max(1, 2**22 // V.shape[0])
    for xs in _point_blocks(q, n, d - 1, chunk):
        grad = contract_prefix(C, xs, q)
        vals = (grad @ V.T) % q
        counts += np.bincount(vals.ravel(), minlength=q)
    nonzero = set(counts[1:].tolist())
    if len(nonzero) > 1:
        raise AssertionError(f"Pr[T=y] depends on y: counts {counts.tolist()}")
    return BiasReport(q, "full-enumeration", Fraction(int(counts[0] - counts[1]), size))


def gradient_zero_count(C: np.ndarray, q: int, strategy: str = "kernel") -> int:
    """Number of ``x`` in ``(F_q^n)^(d-1)`` with ``grad T(x) = 0`` for dense ``C``.

    ``kernel`` enumerates the first ``d-2`` slots and counts the kernel of the
    remaining ``n x n`` matrix via its rank; ``enumerate`` checks every point.
    """
    n, d = C.shape[0], C.ndim
    if strategy == "enumerate":
        zeros = 0
        for xs in _point_blocks(q, n, d - 1, max(1, 2**20 // n ** max(d - 2, 0))):
            g = contract_prefix(C, xs, q)
            zeros += int(np.count_nonzero(~g.any(axis=1)))
        return zeros
    if strategy != "kernel":
        raise ValueError(f"unknown strategy {strategy!r}")
    hist = np.zeros(n + 1, dtype=np.int64)
    if d == 2:
        hist += np.bincount(batch_rank(C[None], q), minlength=n + 1)
    else:
        for xs in _point_blocks(q, n, d - 2, max(1, 2**16 // n)):
            M = contract_prefix(C, xs, q)
            hist += np.bincount(batch_rank(M, q), minlength=n + 1)
    return sum(int(c) * q ** (n - k) for k, c in enumerate(hist.tolist()))


def bias_via_gradient(T: MultilinearForm, budget: int | None = None, strategy: str = "kernel") -> BiasReport:
    """``Pr[grad T = 0]`` over ``(F_q^n)^(d-1)``, exact."""
    _require_prime(T)
    budget = default_budget() if budget is None else budget
    q, n, d = T.spec.p, T.n, T.d
    size = q ** (n * (d - 1))
    if size > budget:
        raise BudgetExceeded(size, budget, "use bias_monte_carlo")
    zeros = gradient_zero_count(_dense(T), q, strategy)
    return BiasReport(q, "gradient-count", Fraction(zeros, size))


def ark_det_closed_form(n: int, q: int) -> BiasReport:
    """``bias(det_n)`` as the probability that ``n-1`` random vectors in ``F_q^n`` are dependent."""
    if n < 2 or q < 2:
        raise ValueError(f"need n >= 2 and q >= 2, got n={n}, q={q}")
    bias = rank_deficient_probability(n - 1, n, q)
    if not (Fraction(1, q**2) <= bias < Fraction(1, q)):
        raise AssertionError(f"closed form out of range: bias {bias} for n={n}, q={q}")
    return BiasReport(q, "closed-form", bias)


def hoeffding_half_width(samples: int, confidence: float) -> float:
    return math.sqrt(math.log(2 / (1 - confidence)) / (2 * samples))


def bias_monte_carlo(T: MultilinearForm, samples: int, seed: int = 0, confidence: float = 0.99) -> BiasReport:
    """Estimate ``Pr[grad T = 0]`` from uniform samples of ``(F_q^n)^(d-1)``.

    Block ``b`` of ``MC_CHUNK`` samples draws from ``default_rng([seed, b])``,
    so estimates do not depend on how blocks are scheduled.
    """
    _require_prime(T)
    if samples < 1:
        raise ValueError("need at least one sample")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    q, n, d = T.spec.p, T.n, T.d
    C = _dense(T)
    zeros = 0
    for b, start in enumerate(range(0, samples, MC_CHUNK)):
        B = min(MC_CHUNK, samples - start)
        rng = np.random.default_rng([seed, b])
        pts = rng.integers(0, q, size=(d - 1, B, n), dtype=np.int64)
        g = contract_prefix(C, list(pts), q)
        zeros += int(np.count_nonzero(~g.any(axis=1)))
    return BiasReport(
        q,
        "monte-carlo",
        estimate=zeros / samples,
        half_width=hoeffding_half_width(samples, confidence),
        confidence=confidence,
        samples=samples,
        seed=seed,
    )


def uniformity_of_random_form(xs: Sequence[Sequence[int]], q: int, budget: int | None = None) -> list[int]:
    """For each ``y`` in ``F_q``, how many ``d``-linear forms take value ``y`` at ``xs``."""
    budget = default_budget() if budget is None else budget
    xs = [[v % q for v in x] for x in xs]
    d = len(xs)
    n = len(xs[0]) if xs else 0
    if d == 0 or n == 0 or any(len(x) != n for x in xs):
        raise ValueError("need d >= 1 vectors of one common length")
    if not is_nontrivial(xs):
        raise ValueError("point is trivial: some vector is zero")
    N = n**d
    size = q**N
    if size > budget:
        raise BudgetExceeded(size, budget)
    X = np.ones(1, dtype=np.int64)
    for x in xs:
        X = np.outer(X, np.asarray(x, dtype=np.int64)).ravel() % q
    counts = np.zeros(q, dtype=np.int64)
    for (coeffs,) in _point_blocks(q, N, 1, 2**18):
        counts += np.bincount((coeffs @ X) % q, minlength=q)
    return counts.tolist()
