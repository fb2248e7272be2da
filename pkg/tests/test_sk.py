from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from parisicut.graphs import MultiGraph, gen_poissonized
from parisicut.rng import make_rng
from parisicut.sk import (
    REBALANCE_THRESHOLD,
    Couplings,
    DiluteModel,
    InterpolatedModel,
    SkModel,
    configurations,
    free_energy,
    interp_derivative,
    local_fields,
    rebalance,
    sk_energy,
    sk_ground,
)
from parisicut.spins import SpinConfig

spins_st = st.integers(2, 10).flatmap(lambda n: st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n))


# -- couplings and energy -------------------------------------------------------------

def test_symmetric_view():
    c = Couplings.sample(30, seed=1)
    s = c.symmetric
    assert np.array_equal(s, s.T)
    assert np.all(np.diag(s) == 0)
    off = s[np.triu_indices(30, 1)]
    assert stats.kstest(off, "norm").pvalue > 1e-3


def test_couplings_reject_non_square():
    with pytest.raises(ValueError):
        Couplings(np.zeros((2, 3)))


def test_energy_two_spins():
    c = Couplings(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert sk_energy(c, [1, 1]) == pytest.approx(-1.0)
    assert sk_energy(c, [1, -1]) == pytest.approx(1.0)


@given(spins_st, st.integers(0, 1000))
def test_energy_matches_double_sum_and_flip(sigma, seed):
    n = len(sigma)
    c = Couplings.sample(n, seed)
    direct = -sum(c.J[i, j] * sigma[i] * sigma[j] for i in range(n) for j in range(n)) / math.sqrt(2 * n)
    assert sk_energy(c, sigma) == pytest.approx(direct, abs=1e-12)
    assert sk_energy(c, [-x for x in sigma]) == pytest.approx(direct, abs=1e-12)
    s = np.array(sigma, dtype=float)
    via_sym = -(s @ np.triu(c.symmetric, 1) @ s) / math.sqrt(n) + c.offset
    assert via_sym == pytest.approx(direct, abs=1e-12)


def test_energy_rejects_size_mismatch():
    with pytest.raises(ValueError):
        sk_energy(Couplings.sample(3, 0), [1, 1])


def test_energy_covariance():
    n, draws = 6, 10_000
    s1 = np.array([1, 1, 1, -1, 1, -1])
    s2 = np.array([1, -1, 1, 1, -1, -1])
    rng = make_rng(2, "cov")
    J = rng.standard_normal((draws, n, n))
    h1 = -np.einsum("i,kij,j->k", s1, J, s1) / math.sqrt(2 * n)
    h2 = -np.einsum("i,kij,j->k", s2, J, s2) / math.sqrt(2 * n)
    prod = h1 * h2
    target = float(s1 @ s2) ** 2 / (2 * n)
    assert abs(prod.mean() - target) <= 3 * prod.std() / math.sqrt(draws)
    assert abs(h1.mean()) <= 3 * h1.std() / math.sqrt(draws)


# -- ground states ----------------------------------------------------------------------

def brute_ground(c: Couplings, balanced: bool) -> float:
    best = math.inf
    for sigma in itertools.product([-1, 1], repeat=c.n):
        if balanced and sum(sigma):
            continue
        best = min(best, sk_energy(c, sigma))
    return best


@pytest.mark.parametrize("seed", range(5))
def test_exact_ground_matches_brute_force(seed):
    c = Couplings.sample(10, seed)
    u_free, s_free = sk_ground(c, "free")
    u_bis, s_bis = sk_ground(c, "bisection")
    assert u_free == pytest.approx(brute_ground(c, False), abs=1e-12)
    assert u_bis == pytest.approx(brute_ground(c, True), abs=1e-12)
    assert u_free == pytest.approx(sk_energy(c, s_free))
    assert s_bis.balanced
    assert u_bis >= u_free


def test_two_spin_ground():
    c = Couplings(np.array([[0.0, 1.0], [1.0, 0.0]]))
    u, s = sk_ground(c, "free")
    assert u == pytest.approx(-1.0)
    assert abs(int(s.sigma.sum())) == 2


def test_local_ground_agrees_on_small_instances():
    for seed in range(3):
        c = Couplings.sample(14, seed)
        for constraint in ("free", "bisection"):
            exact, _ = sk_ground(c, constraint)
            local, s = sk_ground(c, constraint, method="local", seed=seed)
            assert local == pytest.approx(exact, abs=1e-9)
            assert local == pytest.approx(sk_energy(c, s))


def test_ground_validation():
    c = Couplings.sample(5, 0)
    with pytest.raises(ValueError):
        sk_ground(c, "bisection")
    with pytest.raises(ValueError):
        sk_ground(c, "other")
    with pytest.raises(ValueError):
        sk_ground(c, "free", method="magic")
    with pytest.raises(ValueError):
        sk_ground(Couplings.sample(26, 0), "free")


# -- rebalancing ----------------------------------------------------------------------------

def test_local_fields_definition():
    c = Couplings.sample(8, 3)
    s = SpinConfig.random(8, make_rng(0, "s"))
    f = local_fields(c, s)
    expected = [sum(c.symmetric[i, j] * s.sigma[j] for j in range(8)) / (2 * math.sqrt(8)) for i in range(8)]
    assert np.allclose(f, expected)


@given(st.integers(0, 10_000), st.integers(1, 6))
def test_rebalance_output_balanced(seed, half):
    n = 2 * half
    c = Couplings.sample(n, seed)
    star = SpinConfig.random(n, make_rng(seed, "star"))
    out, _ = rebalance(c, star)
    assert out.balanced
    flipped = out.sigma != star.sigma
    assert int(flipped.sum()) == abs(star.m)
    if star.m:
        assert np.all(star.sigma[flipped] == np.sign(star.m))


def test_rebalance_balanced_input_unchanged():
    c = Couplings.sample(6, 0)
    s = SpinConfig(np.array([1, -1, 1, -1, 1, -1]))
    out, ok = rebalance(c, s)
    assert out == s and ok


def test_rebalance_picks_smallest_fields():
    c = Couplings.sample(10, 4)
    star = SpinConfig(np.array([1, 1, 1, 1, 1, 1, 1, -1, -1, -1]))
    out, ok = rebalance(c, star)
    f = np.abs(local_fields(c, star))
    flipped = np.flatnonzero(out.sigma != star.sigma)
    plus = np.flatnonzero(star.sigma == 1)
    assert set(flipped) == set(plus[np.argsort(f[plus])[:2]])
    assert ok == bool(np.all(f[flipped] <= REBALANCE_THRESHOLD))


def test_rebalance_rejects_odd_n():
    with pytest.raises(ValueError):
        rebalance(Couplings.sample(3, 0), [1, 1, 1])


# -- enumeration and free energies -------------------------------------------------------------

def test_configurations():
    assert configurations(4, True).shape == (6, 4)
    assert np.all(configurations(4, True).sum(axis=1) == 0)
    assert configurations(3, False).shape == (8, 3)
    with pytest.raises(ValueError):
        configurations(5, True)


def test_free_energy_counting_at_beta_zero():
    s = free_energy(SkModel(Couplings.sample(4, 0)), 0.0)
    assert s.free_energy_density == pytest.approx(math.log(6) / 4)
    assert s.overlap_moments[0] == pytest.approx(0.0, abs=1e-12)


def test_free_energy_matches_direct_sum():
    c = Couplings.sample(6, 2)
    beta = 0.7
    direct = math.log(sum(math.exp(-beta * sk_energy(c, s)) for s in itertools.product([-1, 1], repeat=6)))
    assert free_energy(SkModel(c), beta, constrained=False).log_partition == pytest.approx(direct, abs=1e-10)


def test_free_energy_chunked_path_matches_single_pass():
    g = gen_poissonized(17, 2.0, seed=1)
    beta = 0.4
    whole = math.log(np.sum(np.exp(-beta * DiluteModel(g).energies(
        configurations(17, False).astype(float)))))
    assert free_energy(DiluteModel(g), beta, constrained=False).log_partition == pytest.approx(whole, abs=1e-9)


def test_overlap_moments_identity():
    c = Couplings.sample(6, 5)
    beta = 1.3
    s = free_energy(SkModel(c), beta, constrained=True, l_max=4)
    rows = configurations(6, True).astype(float)
    p = np.exp(-beta * SkModel(c).energies(rows))
    p /= p.sum()
    # E<Q_l^2> over l independent replicas, by direct enumeration of replica pairs for l = 2
    q2 = 0.0
    for a in range(len(rows)):
        for b in range(len(rows)):
            q2 += p[a] * p[b] * (rows[a] @ rows[b] / 6) ** 2
    assert s.overlap_moments[1] == pytest.approx(q2, abs=1e-12)
    assert all(0 <= m <= 1 + 1e-12 for m in s.overlap_moments)
    assert s.overlap_moments[0] == pytest.approx(0.0, abs=1e-12)


def test_interpolated_endpoints():
    c = Couplings.sample(8, 6)
    g = gen_poissonized(8, 3.0, seed=7)
    beta = 0.9
    one = free_energy(InterpolatedModel(c, MultiGraph.empty(8), 1.0, 3.0), beta)
    assert one.log_partition == pytest.approx(free_energy(SkModel(c), beta).log_partition, abs=1e-12)
    zero = free_energy(InterpolatedModel(c, g, 0.0, 3.0), beta)
    dil = free_energy(DiluteModel(g, 1 / math.sqrt(6.0)), beta)
    assert zero.log_partition == pytest.approx(dil.log_partition, abs=1e-12)
    assert one.model == "interpolated" and dil.model == "dilute"


def test_large_beta_free_energy_near_ground_energy():
    c = Couplings.sample(12, 8)
    beta = 20.0
    phi = free_energy(SkModel(c), beta, constrained=True).free_energy_density
    e = sk_ground(c, "bisection")[0] / 12
    assert 0 <= phi / beta + e <= math.log(2) / beta


def test_negative_beta_allowed():
    g = gen_poissonized(8, 2.0, seed=2)
    s = free_energy(DiluteModel(g), -1.0)
    assert math.isfinite(s.log_partition)


# -- interpolation derivative -------------------------------------------------------------------

def test_interp_derivative_ranges_and_tail():
    c = Couplings.sample(8, 1)
    g = gen_poissonized(8, 4.0 * 0.5, seed=2)
    d = interp_derivative(c, g, 1.0, 4.0, 0.5)
    assert 0 <= d.d_sk <= 0.25
    assert d.moments[0] == pytest.approx(0.0, abs=1e-12)
    assert d.tail_bound <= 1e-6
    assert d.total == d.d_sk + d.d_dilute


def test_interp_derivative_dilute_part_is_added_edge_average():
    # with N ~ Poisson(gamma (1 - t) n) uniform edges, d/dt of E log Z / n is
    # -gamma times the mean change of log Z from one extra uniform edge (i, j);
    # per graph sample that mean is exactly what the series sums
    n, gamma, beta, t = 6, 4.0, 1.0, 0.5
    c = Couplings.sample(n, 3)
    g = gen_poissonized(n, gamma * (1 - t), seed=4)
    d = interp_derivative(c, g, beta, gamma, t)
    base = free_energy(InterpolatedModel(c, g, t, gamma), beta).log_partition
    diffs = [free_energy(InterpolatedModel(c, g.union(MultiGraph.from_pairs(n, [i], [j])), t, gamma),
                         beta).log_partition - base
             for i in range(n) for j in range(n)]
    assert d.d_dilute == pytest.approx(-gamma * float(np.mean(diffs)), abs=d.tail_bound + 1e-12)


def test_interp_derivative_validation():
    c = Couplings.sample(6, 0)
    g = MultiGraph.empty(6)
    with pytest.raises(ValueError):
        interp_derivative(c, g, 1.0, 4.0, 1.0)
    with pytest.raises(ValueError):
        interp_derivative(c, g, 1.0, 4.0, 0.5, l_max=4)
    with pytest.raises(ValueError):
        interp_derivative(c, g, 8.0, 1.0, 0.5, l_max=8)
    with pytest.raises(ValueError):
        interp_derivative(Couplings.sample(18, 0), MultiGraph.empty(18), 1.0, 4.0, 0.5)
