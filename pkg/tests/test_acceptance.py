"""End-to-end acceptance checks. Each test prints one PASS/FAIL line."""

import itertools
from fractions import Fraction

import numpy as np
import pytest

from detrank import decomp, multilinear
from detrank.decomp import det4_quadratic, laplace, two_row_laplace, verify
from detrank.experiments import EnsembleParams, run_bias_experiment, separation_report
from detrank.field import INTEGERS, is_prime, make_field
from detrank.linalg import Matrix, rank, rank_deficient_probability
from detrank.multilinear import MultilinearForm, check_4to2_identity, det_form, evaluate, gradient_form
from detrank.rank import ark_det_closed_form, bias_exact, bias_via_gradient, uniformity_of_random_form
from detrank.reduction_demos import builtin_scripts, check_minor_independence, run_script
from detrank.search import (
    exhaustive_prk_at_most,
    prk_lower_bound_int,
    prk_lower_bound_value,
    restriction_step,
    restriction_step_general,
    synthetic_two_term,
    zeroing_vectors,
)

F2 = make_field(2)


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\ncriterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else ""))
        assert ok, f"criterion {number} failed: {detail}"

    return emit


def test_criterion_01_levi_civita_identity(report):
    rep = check_4to2_identity()
    ok = rep.ok and rep.passed == 256 and (rep.permutations, rep.degenerate) == (24, 232)
    report(1, "4-to-2 Levi-Civita identity", ok, f"{rep.passed}/256")


def test_criterion_02_expansions_over_integers(report):
    failures = []
    for n in range(2, 7):
        D = det_form(n, INTEGERS)
        for row in range(1, n + 1):
            if not verify(laplace(n, row), D).ok:
                failures.append(f"laplace({n},{row})")
    D4 = det_form(4, INTEGERS)
    for rows in [(1, 2), (1, 3), (1, 4)]:
        if not verify(two_row_laplace(rows), D4).ok:
            failures.append(f"two_row{rows}")
    if not verify(det4_quadratic(), D4).ok:
        failures.append("det4_quadratic")
    rng = np.random.default_rng(0)
    for p in (2, 3, 5, 7, 101):
        F = make_field(p)
        terms = det4_quadratic(F).terms
        for _ in range(20):
            a, b, c, d = (int(v) for v in rng.integers(0, p, size=4))
            rows = [(a, 0, 0, 0), (0, b, 0, 0), (0, 0, c, 0), (0, 0, 0, d)]
            parts = [evaluate(t.product(), rows) for t in terms]
            expected = [a * b * c * d % p, -a * c * b * d % p, a * d * b * c % p]
            if parts != expected or sum(parts) % p != a * b * c * d % p:
                failures.append(f"diagonal over F_{p}")
    report(2, "expansions verify coefficient-wise", not failures, ", ".join(failures[:5]) or "all verified")


def test_criterion_03_analytic_rank_of_det(report):
    mismatches = []
    for q in [p for p in range(2, 1025) if is_prime(p)]:
        n = 2
        while q ** (n * (n - 1)) <= 2**20:
            if ark_det_closed_form(n, q).bias != bias_via_gradient(det_form(n, make_field(q))).bias:
                mismatches.append((n, q))
            n += 1
    det2 = bias_exact(det_form(2, F2)).bias == Fraction(1, 4) == bias_via_gradient(det_form(2, F2)).bias
    ceilings = all(ark_det_closed_form(n, q).ark_ceiling == 2 for n in range(2, 13) for q in (2, 3, 5, 7))
    ok = not mismatches and det2 and ceilings
    report(3, "ark(det_n): closed form, bias(det_2)=1/4, ceil(ark)=2", ok, f"mismatches={mismatches}")


def _deficient_count(m, n, q):
    coeffs = np.array([c for c in itertools.product(range(q), repeat=m) if any(c)], dtype=np.int64)
    total, N = 0, q ** (m * n)
    powers = q ** np.arange(m * n, dtype=np.int64)
    for lo in range(0, N, 1 << 15):
        idx = np.arange(lo, min(N, lo + (1 << 15)), dtype=np.int64)
        mats = ((idx[:, None] // powers[None, :]) % q).reshape(-1, m, n)
        combos = np.einsum("cm,bmn->bcn", coeffs, mats) % q
        total += int((combos == 0).all(axis=2).any(axis=1).sum())
    return total


def test_criterion_04_rank_deficiency(report):
    bad = []
    brute = 0
    for q in (2, 3, 5):
        for n in range(1, 9):
            for m in range(1, n + 1):
                P = rank_deficient_probability(m, n, q)
                ratio = P * q ** (n - m + 1)
                if not (1 <= ratio < 1 + Fraction(1, q - 1)):
                    bad.append(("bound", m, n, q))
                if q ** (m * n) <= 2**20:
                    brute += 1
                    if P != Fraction(_deficient_count(m, n, q), q ** (m * n)):
                        bad.append(("count", m, n, q))
    report(4, "rank-deficiency bounds and counts", not bad, f"{brute} brute-force cases, failures={bad[:3]}")


def test_criterion_05_zeroing_and_restriction(report):
    F3 = make_field(3)
    rng = np.random.default_rng(5)
    failures = 0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n))
        ell = int(rng.integers(1, n - k + 1))
        forms = [MultilinearForm.from_dense(F3, rng.integers(0, 3, size=(n,) * k)) for _ in range(ell)]
        vs = zeroing_vectors(forms)
        if rank(Matrix(F3, tuple(vs))) != k or any(evaluate(f, vs) for f in forms):
            failures += 1
    c1 = restriction_step(laplace(3, 1, F2))
    c2 = restriction_step(det4_quadratic(F2))
    target, dec = synthetic_two_term(F2)
    g = restriction_step_general(target, dec)
    ok = (
        failures == 0
        and (c1.branch, c1.k, c1.r) == ("certificate", 1, 3)
        and (c2.branch, c2.k, c2.r) == ("certificate", 2, 3)
        and g.branch == "reduced"
        and g.decomposition.r == 1
        and verify(g.decomposition, g.target).ok
    )
    report(5, "zeroing vectors and restriction step", ok, f"zeroing failures={failures}")


def test_criterion_06_search_certificates(report):
    det2, det3, det4 = (det_form(n, F2) for n in (2, 3, 4))
    c21 = exhaustive_prk_at_most(det2, 1, target_id="det_2")
    c22 = exhaustive_prk_at_most(det2, 2, target_id="det_2")
    c32 = exhaustive_prk_at_most(det3, 2, target_id="det_3")
    prk2 = c21.verdict == "exhausted-none" and c22.verdict == "found" and verify(c22.decomposition, det2).ok
    prk3 = c32.verdict == "exhausted-none" and verify(laplace(3, 1, F2), det3).ok
    prk4 = verify(det4_quadratic(F2), det4).ok and prk_lower_bound_int(4) == 3 == prk_lower_bound_value(4)
    detail = f"det_3 r=2: table {c32.table_size}, {c32.enumeration_size} canonical pairs"
    report(6, "search certificates: prk(det_2)=2, prk(det_3)=3, prk(det_4)=3 over F_2", prk2 and prk3 and prk4, detail)


def test_criterion_07_random_ensemble(report):
    params = EnsembleParams(n=10, d=3, r=2, q=2, samples=200, seed=0)
    rep = run_bias_experiment(params)
    ratio_ok = 0.8 <= rep.ratio <= 1.2
    # bound read relative to q^-r (as derived) and, looser, as an absolute gap on the mean
    tol = rep.deviation_bound + 4 * rep.std_error / float(rep.target)
    loose = 3 * 2.0**-7 + 2.0**-20 + 4 * rep.std_error
    compound_ok = abs(rep.ratio - 1) <= tol and abs(rep.mean_bias - 0.25) <= loose
    frac = next(c["fraction"] for c in rep.concentration if c["c"] == 2)
    frac_ok = frac >= 1 - 2**-2 - 0.1
    sub_ok = all(s.bias is not None and s.bias >= Fraction(1, 4) for s in rep.samples)
    ok = ratio_ok and compound_ok and frac_ok and sub_ok
    report(7, "random ensemble d=3 n=10 q=2 r=2", ok, f"ratio={rep.ratio:.4f} tol={tol:.4f} fraction={frac}")


def test_criterion_08_uniformity(report):
    counts = uniformity_of_random_form([(1, 0), (0, 1)], 2)
    try:
        uniformity_of_random_form([(0, 0), (0, 1)], 2)
        rejected = False
    except ValueError:
        rejected = True
    report(8, "uniformity at a nontrivial point", counts == [8, 8] and rejected, f"counts={counts}")


def test_criterion_09_property_suites(report):
    F3 = make_field(3)
    rng = np.random.default_rng(9)
    failures = []
    for _ in range(200):
        d, n = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        spec = F2 if rng.random() < 0.5 else F3
        q = spec.q
        T = MultilinearForm.from_dense(spec, rng.integers(0, q, size=(n,) * d))
        xs = [rng.integers(0, q, size=n).tolist() for _ in range(d)]
        s = int(rng.integers(d))
        u, v, lam = rng.integers(0, q, size=n), rng.integers(0, q, size=n), int(rng.integers(q))
        at = lambda w: evaluate(T, xs[:s] + [list(w)] + xs[s + 1 :])  # noqa: E731
        if at((u + lam * v) % q) != (at(u) + lam * at(v)) % q:
            failures.append("multilinearity")
        if multilinear.loads(multilinear.dumps(T)) != T:
            failures.append("form round trip")
    for n in (2, 3):
        vecs = list(itertools.product(range(2), repeat=n))
        D = det_form(n, F2)
        if any(evaluate(D, rows) for rows in itertools.product(vecs, repeat=n) if len(set(rows)) < n):
            failures.append("alternating")
    keys = list(itertools.product(range(2), repeat=2))
    for bits in itertools.product(range(2), repeat=4):
        T = MultilinearForm.from_dict(F2, 2, 2, dict(zip(keys, bits)))
        grad = gradient_form(T)
        for x, y in itertools.product(keys, repeat=2):
            if evaluate(T, [x, y]) != sum(y[i] * evaluate(g, [x]) for i, g in enumerate(grad)) % 2:
                failures.append("gradient pairing")
        if bias_exact(T).bias != bias_via_gradient(T).bias:
            failures.append("bias methods")
    for script in builtin_scripts().values():
        trace = run_script(script)
        if not all(verify(dec, decomp.det_target(dec)).ok for dec in trace.decompositions):
            failures.append("reduction trace")
    if check_minor_independence((1, 2)).rank != 6:
        failures.append("minor independence")
    for dec in (laplace(4, 2), two_row_laplace((1, 3)), det4_quadratic(make_field(5))):
        if decomp.loads(decomp.dumps(dec)) != dec:
            failures.append("decomposition round trip")
    report(9, "property suites", not failures, ", ".join(sorted(set(failures))) or "zero failures")


def test_criterion_10_separation(report):
    rec = separation_report(4, 2)
    searched = exhaustive_prk_at_most(det_form(3, F2), 2).verdict == "exhausted-none"
    closed = ark_det_closed_form(4, 2).ark_ceiling == 2
    ok = rec.get("certified_ratio") == "3/2" and rec["prk_certified"] == 3 and searched and closed
    report(10, "separation ratio 3/2 at d=4", ok, f"ratio={rec.get('certified_ratio')}")
