"""Random partition-rank-r forms: bias concentration and the separation report."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import Any

import numpy as np

from .decomp import Decomposition, det4_quadratic, laplace, make_term, verify
from .field import INTEGERS, make_field
from .multilinear import MultilinearForm, det_form
from .rank import (
    ark_det_closed_form,
    ark_from_bias,
    bias_monte_carlo,
    default_budget,
    gradient_zero_count,
)
from .search import prk_lower_bound_int, prk_lower_bound_value

SPLIT_POLICIES = ("fixed-last-slot", "uniform-random-split")
SAMPLING_NOTE = (
    "each reducible summand has independent uniform coefficients for its two factors; "
    "this is not the uniform distribution on the set of reducible forms"
)
TOLERANCE_NOTE = (
    "finite-n deviation bound 3q^-(n-2r+1) + q^-((d-1)n) relative to q^-r; "
    "the limit statement itself carries no finite-n error term"
)


class ConfigError(ValueError):
    """Malformed experiment parameters; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class EnsembleParams:
    n: int
    d: int
    r: int
    q: int
    epsilon: float = 0.1
    split_policy: str = "fixed-last-slot"
    samples: int = 100
    exact: bool = True
    mc_samples: int = 100_000
    seed: int = 0
    c_values: tuple[float, ...] = (1, 2, 3)
    budget: int | None = None

    def __post_init__(self):
        for name in ("n", "d", "r", "q", "samples", "mc_samples", "seed"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(name, f"expected an integer, got {v!r}")
        if self.n < 1:
            raise ConfigError("n", "must be at least 1")
        if self.d < 2:
            raise ConfigError("d", "must be at least 2")
        if self.r < 0:
            raise ConfigError("r", "must be nonnegative")
        try:
            make_field(self.q)
        except ValueError as exc:
            raise ConfigError("q", str(exc)) from None
        if not isinstance(self.epsilon, (int, float)) or not 0 < self.epsilon < 1:
            raise ConfigError("epsilon", "must lie in (0, 1)")
        if self.split_policy not in SPLIT_POLICIES:
            raise ConfigError("split_policy", f"must be one of {SPLIT_POLICIES}")
        if self.samples < 1:
            raise ConfigError("samples", "must be positive")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples", "must be positive")
        if not isinstance(self.exact, bool):
            raise ConfigError("exact", "must be a boolean")
        try:
            cs = tuple(float(c) for c in self.c_values)
        except (TypeError, ValueError):
            raise ConfigError("c_values", "must be a list of numbers") from None
        if any(c <= 0 for c in cs):
            raise ConfigError("c_values", "must be positive")
        object.__setattr__(self, "c_values", cs)

    @property
    def hypothesis_holds(self) -> bool:
        return self.r <= (1 - self.epsilon) * self.n / 2

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> EnsembleParams:
        if not isinstance(data, dict):
            raise ConfigError("config", "expected a JSON object")
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown field")
        for req in ("n", "d", "r", "q"):
            if req not in data:
                raise ConfigError(req, "missing required field")
        data = dict(data)
        if "c_values" in data and isinstance(data["c_values"], list):
            data["c_values"] = tuple(data["c_values"])
        return cls(**data)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["c_values"] = list(self.c_values)
        return rec


def _split(params: EnsembleParams, rng: np.random.Generator) -> tuple[tuple[int, ...], tuple[int, ...]]:
    d = params.d
    if params.split_policy == "fixed-last-slot":
        return tuple(range(d - 1)), (d - 1,)
    while True:
        mask = rng.integers(0, 2, size=d)
        if 0 < mask.sum() < d:
            break
    I = tuple(int(s) for s in np.flatnonzero(mask))
    return I, tuple(s for s in range(d) if s not in I)


def sample_dense(params: EnsembleParams, index: int):
    """Dense form and its factor data for sample ``index``; deterministic in ``(seed, index)``."""
    q, n, d = params.q, params.n, params.d
    rng = np.random.default_rng([params.seed, index])
    C = np.zeros((n,) * d, dtype=np.int64)
    factors = []
    for _ in range(params.r):
        S, R = _split(params, rng)
        Sc = rng.integers(0, q, size=(n,) * len(S), dtype=np.int64)
        Rc = rng.integers(0, q, size=(n,) * len(R), dtype=np.int64)
        prod = np.multiply.outer(Sc, Rc) % q
        prod = prod.transpose([(S + R).index(s) for s in range(d)])
        C = (C + prod) % q
        factors.append((S, Sc, R, Rc))
    return C, factors


def sample_decomposable(params: EnsembleParams, index: int) -> tuple[MultilinearForm, Decomposition]:
    """A sum of ``r`` random reducible forms together with its decomposition.

    Under ``fixed-last-slot`` each summand is a ``(d-1)``-linear factor
    times a linear form in the last slot.
    """
    spec = make_field(params.q)
    C, factors = sample_dense(params, index)
    terms = []
    for S, Sc, R, Rc in factors:
        terms.append(make_term(params.d, S, MultilinearForm.from_dense(spec, Sc), MultilinearForm.from_dense(spec, Rc)))
    T = MultilinearForm.from_dense(spec, C)
    dec = Decomposition(spec, params.d, params.n, tuple(terms))
    res = verify(dec, T)
    if not res.ok:
        raise AssertionError(f"sampled decomposition fails at {res.witness}")
    return T, dec


@dataclass(frozen=True)
class SampleResult:
    index: int
    method: str
    bias: Fraction | None
    estimate: float | None
    ark: float

    def bias_value(self) -> float:
        return float(self.bias) if self.bias is not None else self.estimate


def _run_sample(args: tuple[EnsembleParams, int]) -> SampleResult:
    params, index = args
    q, n, d = params.q, params.n, params.d
    budget = default_budget() if params.budget is None else params.budget
    size = q ** (n * (d - 1))
    if params.exact and size <= budget:
        C, _ = sample_dense(params, index)
        b = Fraction(gradient_zero_count(C, q), size)
        return SampleResult(index, "gradient-count", b, None, ark_from_bias(b, q))
    T, _ = sample_decomposable(params, index)
    rep = bias_monte_carlo(T, params.mc_samples, seed=params.seed * 1_000_003 + index)
    return SampleResult(index, "monte-carlo", None, rep.estimate, rep.ark)


@dataclass
class ExperimentReport:
    params: EnsembleParams
    samples: list[SampleResult]
    mean_bias: float
    mean_bias_exact: Fraction | None
    target: Fraction
    ratio: float
    std_error: float
    deviation_bound: float
    deviation_bound_absolute: float
    concentration: list[dict]
    subadditivity_violations: int
    notes: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "params": self.params.to_record(),
            "hypothesis_holds": self.params.hypothesis_holds,
            "mean_bias": repr(self.mean_bias),
            "mean_bias_exact": None
            if self.mean_bias_exact is None
            else f"{self.mean_bias_exact.numerator}/{self.mean_bias_exact.denominator}",
            "target": f"{self.target.numerator}/{self.target.denominator}",
            "ratio": repr(self.ratio),
            "std_error": repr(self.std_error),
            "deviation_bound_relative": repr(self.deviation_bound),
            "deviation_bound_absolute": repr(self.deviation_bound_absolute),
            "concentration": self.concentration,
            "subadditivity_violations": self.subadditivity_violations,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "bias", "ark", "method"])
        for s in self.samples:
            b = f"{s.bias.numerator}/{s.bias.denominator}" if s.bias is not None else repr(s.estimate)
            w.writerow([s.index, b, "inf" if math.isinf(s.ark) else f"{s.ark:.15g}", s.method])
        return buf.getvalue()


def run_bias_experiment(params: EnsembleParams, workers: int = 1) -> ExperimentReport:
    """Sample the ensemble, compute per-sample bias, and aggregate."""
    q, n, d, r = params.q, params.n, params.d, params.r
    jobs = [(params, i) for i in range(params.samples)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_run_sample, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_run_sample(j) for j in jobs]
    target = Fraction(1, q**r)
    violations = 0
    for s in results:
        if s.bias is not None:
            if s.bias < target:
                raise AssertionError(f"sample {s.index}: bias {s.bias} below q^-r violates subadditivity")
        elif s.ark > r + 1e-9:
            violations += 1
    exact = all(s.bias is not None for s in results)
    mean_exact = sum((s.bias for s in results), Fraction(0)) / len(results) if exact else None
    vals = np.array([s.bias_value() for s in results], dtype=float)
    mean = float(mean_exact) if exact else float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    conc = []
    for c in params.c_values:
        lo = Fraction(c).limit_denominator(1000) if not float(c).is_integer() else Fraction(int(c))
        lo = r - lo
        if exact and lo.denominator == 1:
            cut = Fraction(1) if lo <= 0 else Fraction(1, q ** int(lo))
            hits = sum(1 for s in results if s.bias <= cut)
        else:
            hits = sum(1 for s in results if s.ark >= float(lo) - 1e-9)
        conc.append({"c": c, "fraction": hits / len(results), "bound": 1 - q ** (-c)})
    rel = 3 * float(q) ** (-(n - 2 * r + 1)) + float(q) ** (-(d - 1) * n) * q**r
    absolute = 3 * float(q) ** (-(n - r + 1)) + float(q) ** (-(d - 1) * n)
    notes = [SAMPLING_NOTE, TOLERANCE_NOTE]
    if not params.hypothesis_holds:
        notes.append(f"r = {r} exceeds (1 - epsilon) n / 2; the limiting statement does not apply")
    return ExperimentReport(
        params, results, mean, mean_exact, target, mean / float(target), se, rel, absolute, conc, violations, notes
    )


def separation_report(d: int, q: int = 2) -> dict:
    """Witnessed ratio between partition rank and ``ceil(ark)`` for ``det_d``."""
    if d < 2:
        raise ValueError("d must be at least 2")
    closed = ark_det_closed_form(d, q)
    ceil_ark = closed.ark_ceiling
    lower_value = prk_lower_bound_value(d)
    lower_int = prk_lower_bound_int(d)
    if d == 4:
        upper, upper_source = 3, "det4_quadratic"
        if not verify(det4_quadratic(INTEGERS), det_form(4, INTEGERS)).ok:
            raise AssertionError("quadratic det_4 expansion failed to verify")
    else:
        upper, upper_source = d, "laplace"
        if d <= 6 and not verify(laplace(d, 1, INTEGERS), det_form(d, INTEGERS)).ok:
            raise AssertionError("Laplace expansion failed to verify")
    rec = {
        "d": d,
        "q": q,
        "bias_det": f"{closed.bias.numerator}/{closed.bias.denominator}",
        "ark_det": f"{closed.ark:.15g}",
        "ark_ceiling": ceil_ark,
        "prk_lower_bound": f"{lower_value:.15g}",
        "prk_lower_bound_int": lower_int,
        "prk_upper_bound": upper,
        "prk_upper_source": upper_source,
        "witnessed_ratio": f"{lower_value / 2:.15g}",
    }
    if lower_int == upper:
        ratio = Fraction(upper, ceil_ark)
        rec["prk_certified"] = upper
        rec["certified_ratio"] = f"{ratio.numerator}/{ratio.denominator}"
    return rec
