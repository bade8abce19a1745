import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ksatglass import interp, ksat, pspin
from ksatglass.interp import InterpolationPoint

from oracles import naive_log_partition, naive_multi_overlap


def test_beta_values():
    assert interp.beta_of(0.0, 1.0, 3) == 0
    assert interp.beta_of(4.0, math.log(2), 2) == pytest.approx(0.25, abs=1e-15)
    assert interp.beta_of(9.0, 60.0, 3) == pytest.approx(3 / 8, abs=1e-15)
    with pytest.raises(ValueError):
        interp.beta_of(1.0, 0.0, 2)


def test_iii_bound():
    assert interp.iii_bound(0.0, 0.5) == 0
    assert interp.iii_bound(3.0, 1e-300) == 0
    x = 1 - math.exp(-0.5)
    series = 2.0 * sum(x ** n / n for n in range(3, 200))
    assert interp.iii_bound(2.0, 0.5) == pytest.approx(series, rel=1e-12)


def test_point_validation():
    with pytest.raises(ValueError):
        InterpolationPoint(1.5, 1.0, 0.5, 0.1, 2, 4)
    p = InterpolationPoint.matched(0.25, 4.0, 0.5, 2, 6)
    assert p.ksat_density == 3.0


def test_hamiltonian_end_points():
    ks = ksat.sample_instance(6, 2, 3.0, 1)
    ps = pspin.sample_pspin(6, 2, 2)
    a = np.array([1, -1, 1, 1, -1, -1])
    assert interp.interpolating_hamiltonian(0.0, 0.7, 0.3, ks, ps, a) == 0.7 * ksat.hamiltonian(ks, a)
    empty = ksat.sample_instance(6, 2, 0.0, 1)
    assert interp.interpolating_hamiltonian(1.0, 0.7, 0.3, empty, ps, a) == 0.3 * pspin.evaluate(ps, a)
    mid = 0.7 * ksat.hamiltonian(ks, a) + math.sqrt(0.5) * 0.3 * pspin.evaluate(ps, a)
    assert interp.interpolating_hamiltonian(0.5, 0.7, 0.3, ks, ps, a) == pytest.approx(mid, abs=1e-14)


def test_energy_table_matches_pointwise():
    point = InterpolationPoint.matched(0.5, 3.0, 0.5, 2, 5)
    ks, ps = interp.draw_parts(point, 4)
    table = interp.energy_table(0.5, 0.5, point.beta, ks, ps)
    for s, a in enumerate(interp.all_states(5)):
        assert table[s] == pytest.approx(interp.interpolating_hamiltonian(0.5, 0.5, point.beta, ks, ps, a),
                                         abs=1e-12)


def test_free_energy_trivial_and_shift():
    phi, _ = interp.free_energy(0.5, 0.5, 0.0, None, None, n=1)
    assert phi == pytest.approx(math.log(2), abs=1e-15)
    energies = np.random.default_rng(0).normal(size=1 << 6)
    base = interp.gibbs_table(energies).log_partition / 6
    shifted = interp.gibbs_table(energies + 3.0).log_partition / 6
    assert shifted - base == pytest.approx(0.5, abs=1e-13)


def test_free_energy_matches_naive():
    point = InterpolationPoint.matched(0.3, 2.0, 0.5, 2, 8)
    ks, ps = interp.draw_parts(point, 17)
    phi, table = interp.free_energy(0.3, 0.5, point.beta, ks, ps)
    energies = [interp.interpolating_hamiltonian(0.3, 0.5, point.beta, ks, ps, a) for a in interp.all_states(8)]
    assert phi == pytest.approx(naive_log_partition(energies) / 8, abs=1e-12)
    assert table.n == 8


def test_sandwich_edge_cases():
    table = interp.gibbs_table(np.full(1 << 5, 2.0))
    lower, upper = interp.sandwich_check(table, 5)
    assert lower and upper
    assert table.log_partition / 5 == pytest.approx(math.log(2) + 2.0 / 5, abs=1e-15)
    peaked = np.zeros(1 << 5)
    peaked[3] = 500.0
    table = interp.gibbs_table(peaked)
    assert interp.sandwich_check(table, 5) == (True, True)
    assert table.log_partition / 5 == pytest.approx(100.0, abs=1e-12)


def test_capacity():
    with pytest.raises(ksat.CapacityError):
        interp.energy_table(0.0, 0.5, 0.1, None, None, n=15)


def test_multi_overlap_identities():
    gen = np.random.default_rng(2)
    for _ in range(20):
        a, b, c = (gen.choice([-1, 1], size=9) for _ in range(3))
        assert interp.multi_overlap([a]) == 0.5
        assert interp.multi_overlap([a, b]) == pytest.approx((1 + pspin.overlap(a, b)) / 4, abs=1e-15)
        assert interp.multi_overlap([a, a, a]) == 0.5
        assert interp.multi_overlap([a, b, c]) == pytest.approx(naive_multi_overlap([a, b, c]), abs=1e-15)
    with pytest.raises(ValueError):
        interp.multi_overlap([])


def _random_table(n, seed):
    point = InterpolationPoint.matched(0.5, 3.0, 0.5, 2, n)
    ks, ps = interp.draw_parts(point, seed)
    return interp.free_energy(0.5, 0.5, point.beta, ks, ps)[1]


def test_mean_xi_overlap_matches_pair_sum():
    n = 4
    table = _random_table(n, 5)
    spins = interp.all_states(n)
    for k in (2, 3):
        direct = sum(table.weights[s] * table.weights[r] * pspin.xi(pspin.overlap(spins[s], spins[r]), k)
                     for s in range(1 << n) for r in range(1 << n))
        assert interp.mean_xi_overlap(table, k) == pytest.approx(direct, abs=1e-12)


def test_multi_overlap_moments_match_replica_sums():
    n, k = 3, 2
    table = _random_table(n, 6)
    spins = interp.all_states(n)
    moments = interp.multi_overlap_moments(table, k, 3)
    for r in (1, 2, 3):
        direct = 0.0
        for combo in itertools.product(range(1 << n), repeat=r):
            w = np.prod([table.weights[s] for s in combo])
            direct += w * naive_multi_overlap([spins[s] for s in combo]) ** k
        assert moments[r - 1] == pytest.approx(direct, abs=1e-13)
    assert moments[0] == pytest.approx(0.5 ** k, abs=1e-15)


def test_derivative_terms_vanish_without_disorder():
    point = InterpolationPoint(0.5, 0.0, 0.5, 0.0, 2, 4)
    empty = ksat.sample_instance(4, 2, 0.0, 0)
    terms = interp.derivative_terms(point, empty, pspin.sample_pspin(4, 2, 0))
    assert terms.gaussian == 0 and terms.poisson_truncated == 0
    assert terms.remainder_bound == 0


def test_draw_parts_common_numbers():
    point = InterpolationPoint.matched(0.5, 2.0, 0.5, 2, 6)
    lo, ps_lo = interp.draw_parts(point, 3, 7, t=0.6)
    hi, ps_hi = interp.draw_parts(point, 3, 7, t=0.4)
    assert np.array_equal(hi.indices[:lo.m], lo.indices)
    assert all(np.array_equal(a, b) for a, b in zip(ps_lo.couplings, ps_hi.couplings))


def test_derivative_check_small():
    point = InterpolationPoint.matched(0.5, 2.0, 0.5, 2, 6)
    res = interp.derivative_check(point, 150, "small")
    assert res.passed()
    with pytest.raises(ValueError):
        interp.derivative_check(InterpolationPoint.matched(0.02, 2.0, 0.5, 2, 6), 2, 0)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 7), t=st.floats(0.0, 1.0), seed=st.integers(0, 10**6))
def test_sandwich_property(n, t, seed):
    point = InterpolationPoint.matched(t, 4.0, 0.5, 2, n)
    ks, ps = interp.draw_parts(point, seed)
    phi, table = interp.free_energy(t, 0.5, point.beta, ks, ps)
    assert interp.sandwich_check(table, n) == (True, True)
    assert table.max_energy / n <= phi <= math.log(2) + table.max_energy / n + 1e-12
