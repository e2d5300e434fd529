import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfm.evaluation import (confusion, delta_separation, evaluate, f_hat, hamming_error, hamming_l0,
                            matched_count, sigma_lower_bound_check, spectral_deviation,
                            theoretical_rate)
from dfm.model import ModelSpec, build_omega
from dfm.sampling import EdgeDistribution, NoiseSpec
from helpers import brute_fhat, brute_hamming_l0, random_spec

P3 = np.array([[1.0, 0.4, 0.5], [0.4, 0.9, 0.2], [0.5, 0.2, 0.8]])


def _pair(rng, K, n):
    return rng.integers(0, K, n), rng.integers(0, K, n)


def test_hamming_examples():
    assert hamming_error([0, 0, 1, 1], [1, 1, 0, 0], 2) == 0.0
    assert hamming_error([0, 0, 1, 1], [0, 0, 0, 1], 2) == 0.25
    assert hamming_error([2, 0, 1, 1, 0], [2, 0, 1, 1, 0], 3) == 0.0
    assert hamming_l0([0, 0, 1, 1], [0, 0, 0, 1], 2) == 0.5


def test_hamming_errors():
    with pytest.raises(ValueError, match="length"):
        hamming_error([0, 1], [0, 1, 1], 2)
    with pytest.raises(ValueError):
        hamming_error([0, 2], [0, 1], 2)
    with pytest.raises(ValueError):
        hamming_error([0, 1], [0, 1], 2, method="greedy")


def test_confusion_counts():
    C = confusion([0, 0, 1, 1], [0, 0, 0, 1], 2)
    np.testing.assert_array_equal(C, [[2, 0], [1, 1]])


@pytest.mark.parametrize("seed", range(10))
def test_hamming_assignment_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    for _ in range(50):
        K = int(rng.integers(1, 6))
        n = int(rng.integers(1, 13))
        t, e = _pair(rng, K, n)
        l0 = brute_hamming_l0(t, e, K)
        assert hamming_error(t, e, K, method="assignment") * n * 2 == l0
        assert hamming_error(t, e, K, method="enumerate") * n * 2 == l0


def test_hamming_assignment_large_K():
    rng = np.random.default_rng(0)
    t = rng.integers(0, 12, 300)
    perm = rng.permutation(12)
    assert hamming_error(t, perm[t], 12) == 0.0
    e = perm[t].copy()
    e[:7] = (e[:7] + 1) % 12
    assert hamming_error(t, e, 12) == pytest.approx(7 / 300)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5).flatmap(lambda K: st.tuples(
    st.just(K), st.lists(st.tuples(st.integers(0, K - 1), st.integers(0, K - 1)), min_size=1, max_size=20),
    st.permutations(range(K)))))
def test_hamming_permutation_invariance_and_symmetry(case):
    K, pairs, perm = case
    t = np.array([p[0] for p in pairs])
    e = np.array([p[1] for p in pairs])
    h = hamming_error(t, e, K)
    assert 0.0 <= h <= 1.0
    assert hamming_error(t, np.array(perm)[e], K) == h
    assert hamming_error(np.array(perm)[t], e, K) == h
    assert hamming_error(e, t, K) == h
    assert matched_count(t, e, K) == round(len(t) * (1 - h))


def test_fhat_examples():
    truth = [0, 0, 0, 1, 1]
    est = [0, 0, 1, 1, 1]
    assert f_hat(truth, est, 2) == pytest.approx(0.5)
    assert f_hat(truth, truth, 2) == 0.0
    assert f_hat(truth, [1, 1, 1, 0, 0], 2) == 0.0


def test_fhat_allows_empty_estimated_part():
    # everything lumped into one estimated community
    assert f_hat([0, 0, 1, 1], [0, 0, 0, 0], 2) == pytest.approx(1.0)
    assert f_hat([0, 0, 1, 1], [0, 0, 0, 0], 2) == brute_fhat([0, 0, 1, 1], [0, 0, 0, 0], 2)


def test_fhat_requires_nonempty_truth():
    with pytest.raises(ValueError):
        f_hat([0, 0], [0, 1], 2)


@pytest.mark.parametrize("seed", range(8))
def test_fhat_matches_set_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    for _ in range(40):
        K = int(rng.integers(1, 6))
        n = int(rng.integers(K, 15))
        t = np.concatenate([np.arange(K), rng.integers(0, K, n - K)])
        e = rng.integers(0, K, n)
        oracle = brute_fhat(t, e, K)
        assert f_hat(t, e, K, method="enumerate") == pytest.approx(oracle, abs=1e-12)
        assert f_hat(t, e, K, method="assignment") == pytest.approx(oracle, abs=1e-12)


def test_fhat_zero_iff_equal_up_to_permutation():
    rng = np.random.default_rng(3)
    for _ in range(200):
        K = int(rng.integers(2, 5))
        t = np.concatenate([np.arange(K), rng.integers(0, K, 10)])
        e = rng.permutation(K)[t] if rng.random() < 0.5 else rng.integers(0, K, t.size)
        equal = hamming_error(t, e, K) == 0.0
        assert (f_hat(t, e, K) == 0.0) == equal


def test_spectral_deviation_examples():
    O = np.ones((2, 2))
    assert spectral_deviation(O, O) == 0.0
    assert spectral_deviation(O + np.diag([2.0, -5.0]), O) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        spectral_deviation(np.eye(2), np.eye(3))


def test_spectral_deviation_triangle_inequality():
    rng = np.random.default_rng(5)
    for _ in range(50):
        X, Y, Z = (S + S.T for S in rng.standard_normal((3, 8, 8)))
        assert spectral_deviation(X, Z) <= spectral_deviation(X, Y) + spectral_deviation(Y, Z) + 1e-10


@pytest.mark.parametrize("K,n", [(2, 10), (3, 30), (4, 200)])
def test_delta_identity_balanced(K, n):
    spec = ModelSpec.from_labels(np.arange(n) % K, np.eye(K), 1.0)
    sep = delta_separation(build_omega(spec), spec.Z, K)
    assert sep.delta == pytest.approx(math.sqrt(2 * K / n), abs=1e-10)
    assert sep.reference == pytest.approx(math.sqrt(2 * K / n))


def test_delta_single_community():
    spec = ModelSpec.from_labels(np.zeros(5, dtype=int), np.ones((1, 1)), 1.0)
    assert delta_separation(build_omega(spec), spec.Z, 1).delta == math.inf


@pytest.mark.parametrize("seed", range(30))
def test_delta_lower_reference(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.choice([2, 3, 5]))
    spec = random_spec(rng, K=K, K0=K)
    sep = delta_separation(build_omega(spec), spec.Z, K)
    assert sep.delta >= sep.reference - 1e-8


def test_delta_rank_deficient_has_no_reference():
    P = np.array([[1.0, 0.2, 1.2], [0.2, 0.5, 0.7], [1.2, 0.7, 1.9]]) / 1.9
    spec = ModelSpec.from_labels(np.arange(30) % 3, P, 1.0, K0=2)
    sep = delta_separation(build_omega(spec), spec.Z, 2)
    assert math.isnan(sep.reference)
    assert sep.delta > 0


def test_sigma_bound_block_example():
    spec = ModelSpec.from_labels([0, 0, 0, 1, 1, 1], np.eye(2), 1.0)
    res = sigma_lower_bound_check(spec)
    assert res.sigmaK0_Omega == pytest.approx(3.0, abs=1e-8)
    assert res.bound == pytest.approx(3.0, abs=1e-8)
    assert res.holds


def test_sigma_bound_homogeneous_in_rho():
    spec = random_spec(np.random.default_rng(2), K=3, K0=3, rho=0.5)
    a = sigma_lower_bound_check(spec)
    b = sigma_lower_bound_check(spec.with_rho(1.0))
    assert b.sigmaK0_Omega == pytest.approx(2 * a.sigmaK0_Omega, rel=1e-10)
    assert b.bound == pytest.approx(2 * a.bound, rel=1e-10)


@pytest.mark.parametrize("seed", range(40))
def test_sigma_nmin_bound_always_holds(seed):
    spec = random_spec(np.random.default_rng(seed))
    res = sigma_lower_bound_check(spec)
    assert res.sigmaK0_Omega >= res.bound_nmin * (1 - 1e-6)
    if spec.K0 == spec.K:
        assert res.holds


def _rate_spec(rho=0.5):
    return ModelSpec.from_labels(np.arange(90) % 3, P3, rho)


def test_rate_noiseless_halves_when_rho_doubles():
    bern = EdgeDistribution("bernoulli")
    s = _rate_spec(0.4)
    r1 = theoretical_rate(s, bern, NoiseSpec(0.0), delta=0.2)
    r2 = theoretical_rate(s.with_rho(0.8), bern, NoiseSpec(0.0), delta=0.2)
    for key in ("noiseless_general", "noiseless_balanced", "noiseless_equal_rank", "general"):
        assert r2[key] == pytest.approx(r1[key] / 2, rel=1e-12)


def test_rate_noiseless_equals_noisy_at_zero_noise():
    s = _rate_spec()
    r = theoretical_rate(s, EdgeDistribution("poisson"), NoiseSpec(0.0), delta=0.3)
    assert r["general"] == pytest.approx(r["noiseless_general"], rel=1e-12)
    assert r["balanced"] == pytest.approx(r["noiseless_balanced"], rel=1e-12)
    assert r["equal_rank"] == pytest.approx(r["noiseless_equal_rank"], rel=1e-12)


def test_rate_bernoulli_balanced_form():
    s = _rate_spec(0.7)
    r = theoretical_rate(s, EdgeDistribution("bernoulli"), NoiseSpec(0.0), delta=0.3)
    s2 = np.linalg.svd(P3, compute_uv=False)[2] ** 2
    assert r["balanced"] == pytest.approx(math.log(90) / (s2 * 0.7 * 90), rel=1e-12)


def test_rate_noise_increases_rate_and_rejects_zero_delta():
    s = _rate_spec()
    d = EdgeDistribution("bernoulli")
    assert theoretical_rate(s, d, NoiseSpec(1.0), 0.2)["general"] > theoretical_rate(s, d, NoiseSpec(0.0), 0.2)["general"]
    with pytest.raises(ValueError):
        theoretical_rate(s, d, NoiseSpec(0.0), 0.0)


def test_rate_equal_rank_nan_when_rank_deficient():
    P = np.array([[1.0, 0.2, 1.2], [0.2, 0.5, 0.7], [1.2, 0.7, 1.9]]) / 1.9
    s = ModelSpec.from_labels(np.arange(30) % 3, P, 1.0, K0=2)
    r = theoretical_rate(s, EdgeDistribution("poisson"), NoiseSpec(0.0), 0.1)
    assert math.isnan(r["equal_rank"])
    assert r["general"] > 0


def test_evaluate_report():
    t = np.array([0, 0, 1, 1])
    rep = evaluate(t, np.array([0, 0, 0, 1]), 2, Ahat=np.eye(4) * 2, Omega=np.eye(4))
    assert rep.hamming == 0.25 and rep.hamming_raw_l0 == 0.5
    assert rep.fhat == pytest.approx(0.5)
    assert rep.spectral_deviation == pytest.approx(1.0)
    assert math.isnan(evaluate(t, t, 2).spectral_deviation)
