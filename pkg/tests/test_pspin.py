import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ksatglass import pspin
from ksatglass.ksat import CapacityError, state_to_assignment
from ksatglass.pspin import MixtureSpec, PSpinSample

from oracles import assignments, naive_pspin


def zero_sample(n, k):
    return PSpinSample(n, MixtureSpec(k), tuple(np.zeros((n,) * p) for p in range(1, k + 1)))


def test_xi_values():
    assert pspin.xi(1.0, 3) == 7
    for k in range(2, 6):
        assert pspin.xi(0.0, k) == 0
        assert pspin.xi(-1.0, k) == -1
    assert pspin.xi_prime(1.0, 3) == 12
    assert pspin.xi_prime(0.0, 3) == 3
    assert pspin.xi_second(1.0, 3) == 12


def test_mixture_coefficients_are_binomial():
    spec = MixtureSpec(4)
    assert spec.coefficients == (4, 6, 4, 1)
    x = np.linspace(-1, 1, 7)
    assert np.allclose(spec.xi_power_sum(x), pspin.xi(x, 4), atol=1e-14)


def test_sample_shapes_and_determinism():
    h = pspin.sample_pspin(10, 3, 5)
    assert [g.shape for g in h.couplings] == [(10,), (10, 10), (10, 10, 10)]
    h2 = pspin.sample_pspin(10, 3, 5)
    assert all(np.array_equal(a, b) for a, b in zip(h.couplings, h2.couplings))
    with pytest.raises(CapacityError):
        pspin.sample_pspin(100, 4, 0)


def test_pooled_couplings_are_standard_normal():
    flat = pspin.flat_couplings(pspin.sample_pspin(40, 3, 1))
    se_mean = 1 / math.sqrt(flat.size)
    se_var = math.sqrt(2 / flat.size)
    assert abs(flat.mean()) < 5 * se_mean
    assert abs(flat.var() - 1) < 5 * se_var


def test_evaluate_zero_and_hand_case():
    h = zero_sample(4, 3)
    for a in assignments(4):
        assert pspin.evaluate(h, a) == 0
    g1, g11 = 0.7, -1.3
    h = PSpinSample(1, MixtureSpec(2), (np.array([g1]), np.array([[g11]])))
    assert pspin.evaluate(h, [1]) == pytest.approx(math.sqrt(2) * g1 + g11, abs=1e-15)
    assert pspin.evaluate(h, [-1]) == pytest.approx(-math.sqrt(2) * g1 + g11, abs=1e-15)


def test_evaluate_matches_naive_loops():
    gen = np.random.default_rng(3)
    for k, n in [(2, 5), (3, 4), (4, 3)]:
        h = pspin.sample_pspin(n, k, 100 + k)
        a = gen.choice([-1, 1], size=n)
        assert pspin.evaluate(h, a) == pytest.approx(naive_pspin(h.couplings, n, a), abs=1e-12)
        assert float(pspin.flat_couplings(h) @ pspin.features(a, n, k)) == pytest.approx(
            naive_pspin(h.couplings, n, a), abs=1e-12)


def test_energy_table_matches_evaluate():
    h = pspin.sample_pspin(8, 3, 9)
    table = pspin.energy_table(h)
    for s in range(1 << 8):
        assert table[s] == pytest.approx(pspin.evaluate(h, state_to_assignment(s, 8)), abs=1e-11)


def test_max_pspin_zero_and_bound():
    assert pspin.max_pspin(zero_sample(5, 2))[0] == 0
    for seed in range(5):
        h = pspin.sample_pspin(9, 3, seed)
        m, arg = pspin.max_pspin(h)
        assert m >= pspin.evaluate(h, np.ones(9)) / 9
        assert pspin.evaluate(h, arg) / 9 == pytest.approx(m, abs=1e-12)


@pytest.mark.parametrize("k,n", [(2, 10), (3, 8), (4, 6)])
def test_max_pspin_matches_naive(k, n):
    h = pspin.sample_pspin(n, k, 42 + k)
    naive = max(pspin.evaluate(h, a) for a in assignments(n)) / n
    assert pspin.max_pspin(h)[0] == pytest.approx(naive, abs=1e-12)


def test_max_pspin_cap():
    with pytest.raises(CapacityError):
        pspin.max_pspin(pspin.sample_pspin(13, 3, 0), limit=12)


def test_overlap():
    a = np.array([1, -1, 1, 1])
    assert pspin.overlap(a, a) == 1
    assert pspin.overlap(a, -a) == -1
    assert pspin.overlap(a, [1, -1, -1, -1]) == 0


def test_covariance_law_small():
    n, k = 6, 3
    a = np.ones(n, dtype=int)
    reports = pspin.covariance_check(n, k, [(a, a), (a, -a), (a, [1, 1, 1, -1, -1, -1])], 4000, "cov")
    assert reports[0].expected == n * 7
    assert reports[1].expected == -n
    assert reports[2].expected == 0
    for r in reports:
        assert abs(r.z_score) < 5


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 7), k=st.integers(2, 4), seed=st.integers(0, 10**6))
def test_gray_table_property(n, k, seed):
    h = pspin.sample_pspin(n, k, seed)
    table = pspin.energy_table(h)
    spins = [state_to_assignment(s, n) for s in range(1 << n)]
    direct = np.array([pspin.evaluate(h, a) for a in spins])
    assert np.allclose(table, direct, atol=1e-11)
    assert pspin.max_pspin(h)[0] == pytest.approx(direct.max() / n, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 6), seed=st.integers(0, 10**6), factor=st.floats(0.1, 3.0))
def test_scaled_is_linear(n, seed, factor):
    h = pspin.sample_pspin(n, 2, seed)
    a = np.array([(-1) ** i for i in range(n)])
    assert pspin.evaluate(h.scaled(factor), a) == pytest.approx(factor * pspin.evaluate(h, a), abs=1e-11)
