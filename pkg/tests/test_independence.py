import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parcelingam.exceptions import ConstantInput, EmptyInput
from parcelingam.independence import (
    HsicTester,
    SourceOracleTester,
    fisher_combine,
    fisher_independence,
    hsic_permutation_test,
    hsic_test,
    median_bandwidth,
)


def chi2_4_sf(x):
    return math.exp(-x / 2) * (1 + x / 2)


def test_identical_vectors_dependent():
    u = np.random.default_rng(0).standard_normal(200)
    res = hsic_test(u, u)
    _, p_perm = hsic_permutation_test(u, u, n_permutations=200, seed=1)
    assert p_perm < 0.01
    assert res.p_value < 0.01
    assert res.statistic > 0 and res.n == 200


def test_square_dependence_detected():
    u = np.random.default_rng(1).uniform(-1, 1, 500)
    v = u**2
    assert abs(np.corrcoef(u, v)[0, 1]) < 0.15
    _, p_perm = hsic_permutation_test(u, v, n_permutations=200, seed=2)
    assert p_perm < 0.01
    assert hsic_test(u, v).p_value < 0.01


def test_result_fields_and_bandwidths():
    rng = np.random.default_rng(2)
    u, v = rng.standard_normal(50), rng.standard_normal(50)
    res = hsic_test(u, v)
    assert 0.0 <= res.p_value <= 1.0
    assert res.statistic >= 0
    assert res.bandwidth_u == pytest.approx(median_bandwidth(u))
    assert res.bandwidth_v > 0


def test_median_bandwidth_fallback():
    x = np.array([1.0] * 8 + [2.0, 3.0])
    assert median_bandwidth(x) == 1.0
    assert median_bandwidth(np.array([0.0, 1.0, 3.0])) == 2.0


def test_constant_input():
    rng = np.random.default_rng(3)
    with pytest.raises(ConstantInput):
        hsic_test(np.ones(20), rng.standard_normal(20))


def test_short_input_rejected():
    with pytest.raises(ValueError):
        hsic_test(np.arange(5.0), np.arange(5.0))


def test_hsic_deterministic():
    rng = np.random.default_rng(4)
    u, v = rng.standard_normal(80), rng.standard_normal(80)
    assert hsic_test(u, v) == hsic_test(u, v)


def test_sample_cap_uses_stride():
    rng = np.random.default_rng(5)
    u, v = rng.standard_normal(300), rng.standard_normal(300)
    res = hsic_test(u, v, sample_cap=100)
    assert res.n == 100
    idx = np.floor(np.linspace(0, 299, 100)).astype(int)
    assert res.statistic == hsic_test(u[idx], v[idx]).statistic


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-50, 50))
def test_hsic_symmetry_and_shift_invariance(seed, shift):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(40)
    v = u + rng.standard_normal(40)
    base = hsic_test(u, v).statistic
    assert hsic_test(v, u).statistic == pytest.approx(base, abs=1e-10)
    assert hsic_test(u + shift, v).statistic == pytest.approx(base, abs=1e-10)


@pytest.mark.slow
@pytest.mark.parametrize("n", [100, 500])
def test_gamma_null_calibration(n):
    rng = np.random.default_rng(2024 + n)
    reps = 500 if n == 100 else 200
    rejections = sum(
        hsic_test(rng.standard_normal(n), rng.standard_normal(n)).p_value < 0.05
        for _ in range(reps)
    )
    assert 0.02 <= rejections / reps <= 0.09


def test_fisher_no_evidence():
    res = fisher_combine([1.0, 1.0, 1.0])
    assert res.statistic == 0.0
    assert res.p_value == 1.0
    assert res.degrees_of_freedom == 6


def test_fisher_two_halves():
    res = fisher_combine([0.5, 0.5])
    assert res.statistic == pytest.approx(-4 * math.log(0.5), abs=1e-10)
    assert res.statistic == pytest.approx(2.77259, abs=1e-5)
    assert res.p_value == pytest.approx(chi2_4_sf(res.statistic), abs=1e-12)
    assert res.p_value == pytest.approx(0.59665, abs=1e-4)


def test_fisher_single_component_identity():
    res = fisher_combine([0.01])
    assert res.statistic == pytest.approx(9.21034, abs=1e-5)
    assert res.p_value == pytest.approx(0.01, abs=1e-12)


def test_fisher_clamps_zero():
    res = fisher_combine([0.0, 0.5])
    assert math.isfinite(res.statistic)
    assert res.component_p_values == (0.0, 0.5)


def test_fisher_empty():
    with pytest.raises(EmptyInput):
        fisher_combine([])


ps = st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=8)


@settings(max_examples=80, deadline=None)
@given(ps, st.randoms(use_true_random=False))
def test_fisher_permutation_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    a, b = fisher_combine(values), fisher_combine(shuffled)
    assert a.statistic == pytest.approx(b.statistic, abs=1e-10)
    assert a.degrees_of_freedom == 2 * len(values)


@settings(max_examples=80, deadline=None)
@given(ps, st.data())
def test_fisher_monotone(values, data):
    k = data.draw(st.integers(0, len(values) - 1))
    smaller = list(values)
    smaller[k] = values[k] / 2
    a, b = fisher_combine(values), fisher_combine(smaller)
    assert b.statistic > a.statistic
    assert b.p_value <= a.p_value


def test_fisher_independence_single_row():
    rng = np.random.default_rng(6)
    t, o = rng.standard_normal(60), rng.standard_normal(60)
    assert fisher_independence(t, o[None, :]) == pytest.approx(hsic_test(t, o).p_value, abs=1e-12)


def test_fisher_independence_duplicated_target():
    t = np.random.default_rng(7).standard_normal(200)
    assert fisher_independence(t, np.vstack([t, t, t])) < 0.01


def test_fisher_independence_constant_rows():
    t = np.random.default_rng(8).standard_normal(30)
    assert fisher_independence(t, np.ones((3, 30))) == 1.0


def test_fisher_independence_empty():
    with pytest.raises(EmptyInput):
        fisher_independence(np.arange(20.0), np.zeros((0, 20)))


def test_tester_caps_samples():
    rng = np.random.default_rng(9)
    t, o = rng.standard_normal(400), rng.standard_normal((2, 400))
    capped = HsicTester(sample_cap=150).pvalues(t, o)
    idx = np.floor(np.linspace(0, 399, 150)).astype(int)
    assert capped == [hsic_test(t[idx], row[idx]).p_value for row in o]


def test_source_oracle():
    tester = SourceOracleTester(3)
    fixed = np.array([1.0, 0.0, 0.0, -1.0, 0.0, 0.0])
    others = np.array([[0.0, 2.0, 1.0, 0.0, -2.0, -1.0], [0.5, 1.0, 0.0, -0.5, -1.0, 0.0]])
    assert tester.pvalues(fixed, others) == [1.0, 0.0]
