import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from detrank.decomp import verify
from detrank.experiments import (
    ConfigError,
    EnsembleParams,
    run_bias_experiment,
    sample_decomposable,
    separation_report,
)
from detrank.field import make_field
from detrank.linalg import Matrix, rank
from detrank.multilinear import MultilinearForm, tensor_product
from detrank.rank import bias_via_gradient


def test_params_validation():
    with pytest.raises(ConfigError) as exc:
        EnsembleParams(n=3, d=1, r=1, q=2)
    assert exc.value.field == "d"
    with pytest.raises(ConfigError) as exc:
        EnsembleParams(n=3, d=2, r=1, q=4)
    assert exc.value.field == "q"
    with pytest.raises(ConfigError) as exc:
        EnsembleParams.from_mapping({"n": 3, "d": 2, "r": 1, "q": 2, "colour": 1})
    assert exc.value.field == "colour"
    with pytest.raises(ConfigError) as exc:
        EnsembleParams.from_mapping({"n": 3, "d": 2, "q": 2})
    assert exc.value.field == "r"
    with pytest.raises(ConfigError):
        EnsembleParams(n=3, d=2, r=1, q=2, split_policy="halves")
    assert not EnsembleParams(n=4, d=3, r=2, q=2).hypothesis_holds
    assert EnsembleParams(n=10, d=3, r=2, q=2).hypothesis_holds


def test_rank_one_bilinear_sample():
    params = EnsembleParams(n=4, d=2, r=1, q=3, seed=5)
    for i in range(10):
        T, dec = sample_decomposable(params, i)
        M = Matrix(T.spec, tuple(map(tuple, T.to_dense().tolist())))
        assert rank(M) <= 1
        assert verify(dec, T).ok


@pytest.mark.parametrize("policy", ["fixed-last-slot", "uniform-random-split"])
def test_samples_verify_and_are_deterministic(policy):
    params = EnsembleParams(n=3, d=4, r=3, q=2, split_policy=policy, seed=11)
    for i in range(5):
        T, dec = sample_decomposable(params, i)
        assert dec.r == 3 and verify(dec, T).ok
        T2, dec2 = sample_decomposable(params, i)
        assert T == T2 and dec == dec2


def test_fixed_last_slot_shape():
    params = EnsembleParams(n=3, d=3, r=4, q=5, seed=2)
    _, dec = sample_decomposable(params, 0)
    for t in dec.terms:
        # the linear factor lives on the last slot
        assert t.support == (2,) and t.q.d == 1


def test_mean_matches_exhausted_sampler():
    q, n = 2, 2
    biases = []
    for qc in itertools.product(range(q), repeat=n * n):
        for rc in itertools.product(range(q), repeat=n):
            Q = MultilinearForm.from_dense(make_field(q), np.array(qc).reshape(n, n))
            R = MultilinearForm.from_dense(make_field(q), np.array(rc))
            biases.append(bias_via_gradient(tensor_product(Q, [0, 1], R, [2])).bias)
    true_mean = sum(biases, Fraction(0)) / len(biases)
    sd = math.sqrt(float(sum((b - true_mean) ** 2 for b in biases) / len(biases)))
    rep = run_bias_experiment(EnsembleParams(n=n, d=3, r=1, q=q, samples=200, seed=3))
    assert abs(rep.mean_bias - float(true_mean)) <= 3 * sd / math.sqrt(200)


def test_r_zero_gives_bias_one():
    rep = run_bias_experiment(EnsembleParams(n=3, d=3, r=0, q=3, samples=5))
    assert rep.mean_bias_exact == 1 and all(s.bias == 1 for s in rep.samples)
    assert rep.ratio == 1


def test_monte_carlo_fallback():
    params = EnsembleParams(n=4, d=3, r=1, q=2, samples=3, budget=10, mc_samples=20_000)
    rep = run_bias_experiment(params)
    assert {s.method for s in rep.samples} == {"monte-carlo"}
    assert rep.mean_bias_exact is None
    assert rep.subadditivity_violations <= 3


def test_report_outputs_deterministic():
    params = EnsembleParams(n=4, d=3, r=1, q=2, samples=20, seed=7)
    a, b = run_bias_experiment(params), run_bias_experiment(params)
    assert a.to_json() == b.to_json() and a.to_table() == b.to_table()
    rec = json.loads(a.to_json())
    assert rec["params"]["seed"] == 7 and len(rec["concentration"]) == 3
    lines = a.to_table().splitlines()
    assert lines[0] == "index,bias,ark,method" and len(lines) == 21


def test_workers_do_not_change_results():
    params = EnsembleParams(n=3, d=3, r=1, q=3, samples=8, seed=1)
    assert run_bias_experiment(params).to_json() == run_bias_experiment(params, workers=2).to_json()


def test_compound_bound_small():
    params = EnsembleParams(n=8, d=3, r=1, q=2, samples=60, seed=4)
    rep = run_bias_experiment(params)
    assert params.hypothesis_holds
    tol = 3 * 2.0 ** -(8 - 2 + 1) + 2.0 ** -16 + 4 * rep.std_error
    assert abs(rep.mean_bias - 0.5) <= tol
    for s in rep.samples:
        assert s.bias >= Fraction(1, 2)


def test_separation_reports():
    rep = separation_report(4, 2)
    assert rep["ark_ceiling"] == 2 and rep["prk_upper_bound"] == 3 and rep["certified_ratio"] == "3/2"
    rep = separation_report(2)
    assert float(rep["witnessed_ratio"]) == 1.0
    rep = separation_report(16)
    assert float(rep["witnessed_ratio"]) == 2.5 and "certified_ratio" not in rep
    with pytest.raises(ValueError):
        separation_report(1)
