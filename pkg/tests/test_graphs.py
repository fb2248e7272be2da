from __future__ import annotations

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from parisicut.graphs import (
    BLUE,
    MultiGraph,
    all_pairings,
    color_and_decompose,
    conditional_cut_mean,
    cut_size,
    default_gamma_minus,
    expected_blue,
    expected_excess,
    gen_config,
    gen_er_gnm,
    gen_poisson_cloning,
    gen_poissonized,
    gen_regular,
    gen_sbm,
    laplacian,
    red_cut_mean,
    rewire,
    surgery_expectations,
    two_stage_pairing,
)
from parisicut.rng import make_rng
from parisicut.spins import SpinConfig


@st.composite
def multigraphs(draw, max_n=8, max_edges=20):
    n = draw(st.integers(2, max_n))
    ends = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=max_edges))
    a = [e[0] for e in ends]
    b = [e[1] for e in ends]
    return MultiGraph.from_pairs(n, a, b)


def brute_cut(g: MultiGraph, sigma) -> int:
    return sum(int(sigma[a] != sigma[b]) for a, b in g.edge_list())


# -- representation ---------------------------------------------------------------

def test_from_pairs_collapses_and_orders():
    g = MultiGraph.from_pairs(4, [1, 0, 2, 3], [0, 1, 2, 1])
    assert g.u.tolist() == [0, 1, 2] and g.v.tolist() == [1, 3, 2]
    assert g.mult.tolist() == [2, 1, 1]
    assert g.m_total == 4 and g.n_loops == 1
    assert g.degrees().tolist() == [2, 3, 2, 1]


def test_from_pairs_rejects_bad_endpoints():
    with pytest.raises(ValueError):
        MultiGraph.from_pairs(3, [0], [3])
    with pytest.raises(ValueError):
        MultiGraph.from_pairs(0, [], [])


@given(multigraphs())
def test_text_round_trip(g):
    assert MultiGraph.from_text(g.to_text()) == g


def test_text_is_one_indexed_and_validated(tmp_path):
    g = MultiGraph.from_pairs(3, [0, 0], [2, 2])
    assert g.to_text() == "3 2\n1 3 2\n"
    with pytest.raises(ValueError, match="header"):
        MultiGraph.from_text("3 5\n1 3 2\n")
    with pytest.raises(ValueError):
        MultiGraph.from_text("1 2 3\n")
    path = tmp_path / "g.txt"
    g.save(path)
    assert MultiGraph.load(path) == g


@given(multigraphs(), st.data())
def test_degree_sum_and_csr(g, data):
    assert g.degrees().sum() == 2 * g.m_total
    indptr, indices, w = g.csr
    dense = np.zeros((g.n, g.n))
    for r in range(g.n):
        dense[r, indices[indptr[r]:indptr[r + 1]]] = w[indptr[r]:indptr[r + 1]]
    assert np.array_equal(dense, dense.T)
    assert np.all(np.diag(dense) == 0)
    assert dense.sum() == 2 * (g.m_total - g.n_loops)


@given(multigraphs(), st.data())
def test_cut_size_matches_brute_force(g, data):
    sigma = np.array(data.draw(st.lists(st.sampled_from([-1, 1]), min_size=g.n, max_size=g.n)))
    c = cut_size(g, sigma)
    assert c == brute_cut(g, sigma)
    assert c == cut_size(g, -sigma)
    assert sigma @ laplacian(g) @ sigma == 4 * c


def test_laplacian_rows_sum_to_zero_and_ignore_loops():
    g = MultiGraph.from_pairs(3, [0, 1, 2], [1, 1, 0])
    lap = laplacian(g)
    assert np.allclose(lap.sum(axis=1), 0)
    assert lap.tolist() == [[2, -1, -1], [-1, 1, 0], [-1, 0, 1]]


def test_union_and_thin():
    g = MultiGraph.from_pairs(3, [0, 1], [1, 2], [3, 1])
    h = MultiGraph.from_pairs(3, [1], [0])
    assert g.union(h).mult.tolist() == [4, 1]
    rng = make_rng(1, "thin")
    assert g.thin(1.0, rng) == g
    assert g.thin(0.0, rng).m_total == 0


# -- ensembles ----------------------------------------------------------------------

def test_gnm_has_exactly_m_edges_and_is_reproducible():
    g = gen_er_gnm(50, 123, seed=7)
    assert g.m_total == 123
    assert gen_er_gnm(50, 123, seed=7) == g
    assert gen_er_gnm(50, 123, seed=8) != g


def test_poissonized_pair_and_loop_rates():
    n, gamma, reps = 6, 1.5, 4000
    pair01 = loops0 = total = 0
    for r in range(reps):
        g = gen_poissonized(n, gamma, seed=r)
        total += g.m_total
        pair01 += int(g.mult[(g.u == 0) & (g.v == 1)].sum())
        loops0 += int(g.mult[(g.u == 0) & (g.v == 0)].sum())
    # z_01 ~ Poisson(2 gamma / n), z_00 ~ Poisson(gamma / n)
    for count, rate in ((pair01, 2 * gamma / n), (loops0, gamma / n), (total, gamma * n)):
        assert abs(count / reps - rate) <= 4 * math.sqrt(rate / reps)


@pytest.mark.parametrize("n,gamma", [(10, 3), (21, 4), (2, 1)])
def test_regular_degrees(n, gamma):
    g = gen_regular(n, gamma, seed=3)
    assert np.all(g.degrees() == gamma)
    assert g.m_total == n * gamma // 2


def test_regular_rejects_odd_total():
    with pytest.raises(ValueError):
        gen_regular(5, 3, seed=0)
    with pytest.raises(ValueError):
        gen_config([1, 2], seed=0)


def test_configuration_model_uniform_on_two_vertices():
    # degrees (2, 2): matchings {01,01} x2 of 3, {00,11} x1 of 3
    counts = Counter(gen_config([2, 2], seed=s).mult.tolist() == [2] for s in range(3000))
    assert abs(counts[True] / 3000 - 2 / 3) < 0.04


def test_poisson_cloning_degrees():
    n, gm = 400, 3.0
    g = gen_poisson_cloning(n, gm, seed=5)
    assert g.degrees().sum() % 2 == 0
    means = [gen_poisson_cloning(n, gm, seed=s).degrees().mean() for s in range(40)]
    assert abs(np.mean(means) - (n - 1) * gm / n) < 0.05


def test_sbm_is_simple_and_planted_balanced():
    inst = gen_sbm(200, 20.0, 4.0, seed=2)
    g, s = inst.graph, inst.planted.sigma
    assert inst.planted.balanced
    assert g.n_loops == 0 and np.all(g.mult == 1)
    same = s[g.u] == s[g.v]
    pairs_same = 2 * math.comb(100, 2)
    pairs_diff = 100 * 100
    assert abs(same.sum() - pairs_same * 0.1) < 5 * math.sqrt(pairs_same * 0.1)
    assert abs((~same).sum() - pairs_diff * 0.02) < 5 * math.sqrt(pairs_diff * 0.02)


def test_sbm_validation():
    with pytest.raises(ValueError):
        gen_sbm(11, 3, 1, seed=0)
    with pytest.raises(ValueError):
        gen_sbm(10, 1, 3, seed=0)
    assert gen_sbm(10, 3, 3, seed=0).a == 3.0
    assert gen_sbm(10, 3, 0, seed=0).b == 0.0


# -- pairings -------------------------------------------------------------------------

@pytest.mark.parametrize("k,count", [(0, 1), (2, 1), (4, 3), (6, 15), (8, 105)])
def test_all_pairings_counts(k, count):
    p = all_pairings(range(k))
    assert len(p) == count == len(set(p))


def test_two_stage_pairing_is_uniform():
    l, m, reps = 2, 2, 6000
    support = all_pairings(range(2 * l))
    counts = Counter(two_stage_pairing(l, m, seed=s) for s in range(reps))
    assert set(counts) <= set(support)
    observed = [counts[p] for p in support]
    assert stats.chisquare(observed).pvalue > 1e-3


def test_two_stage_pairing_validates():
    with pytest.raises(ValueError):
        two_stage_pairing(1, 2, seed=0)
    assert two_stage_pairing(3, 0, seed=0) in all_pairings(range(6))


# -- surgery ---------------------------------------------------------------------------

def test_color_and_decompose_structure():
    n, gamma = 40, 6
    cg = color_and_decompose(n, gamma, seed=11)
    assert np.all(cg.base.degrees() == gamma)
    assert np.all(cg.Z == np.maximum(gamma - cg.X, 0))
    blue = np.bincount(cg.owner[cg.colors == BLUE], minlength=n)
    assert np.array_equal(blue, cg.Z)
    assert np.all(cg.partner[cg.partner] == np.arange(n * gamma))
    assert cg.g_rr.union(cg.g_rb).union(cg.g_bb) == cg.base
    assert cg.gamma_minus == pytest.approx(default_gamma_minus(gamma))


def test_rewire_degrees_follow_red_half_edges():
    n, gamma = 40, 6
    cg = color_and_decompose(n, gamma, seed=12)
    res = rewire(cg, seed=13)
    red = gamma - cg.Z
    expected = red.copy()
    if res.leftover is not None:
        expected[res.leftover] -= 1
    assert np.array_equal(res.g2.degrees(), expected)
    assert len(res.freed_red) == cg.g_rb.m_total
    assert res.g2 == res.g_rr.union(res.g_rr_tilde)


def test_expected_blue_identity():
    # E (gamma - X)_+ - E (X - gamma)_+ = gamma - E X
    for gamma in (2, 4, 9, 16):
        gm = default_gamma_minus(gamma)
        assert expected_blue(gamma, gm) - expected_excess(gamma, gm) == pytest.approx(gamma - gm, abs=1e-10)


def test_expected_blue_monte_carlo():
    rng = make_rng(3, "blue")
    x = rng.poisson(default_gamma_minus(8), size=400_000)
    mc = np.maximum(8 - x, 0)
    assert abs(mc.mean() - expected_blue(8, default_gamma_minus(8))) < 4 * mc.std() / math.sqrt(len(mc))


def test_surgery_prediction_limit_coefficient():
    gamma = 8
    big = surgery_expectations(10**7, gamma)
    p = big.blue_fraction
    assert big.cut_rb / big.n == pytest.approx(big.ez1 * (1 - p) / 2, rel=1e-5)
    with pytest.raises(ValueError):
        surgery_expectations(10, 1)


@pytest.mark.parametrize("sides", [(1, 1, -1, -1), (1, -1, -1), (1, 1, 1, -1, -1), (1, 1, -1, -1, -1, 1)])
def test_red_cut_mean_matches_enumeration(sides):
    s_total = len(sides)
    s_plus = sides.count(1)
    items = list(range(s_total)) + ([s_total] if s_total % 2 else [])
    side = list(sides) + [0]
    cuts = []
    for pairing in all_pairings(items):
        cuts.append(sum(side[a] != side[b] for a, b in pairing if s_total not in (a, b)))
    assert red_cut_mean(s_total, s_plus) == pytest.approx(np.mean(cuts), abs=1e-12)


@pytest.mark.parametrize("blue_spec", [((1, 0), (0, 1)), ((2, 0), (1, 0)), ((1, 1), (1, 1)), ((0, 0), (2, 0))])
def test_conditional_cut_mean_matches_enumeration(blue_spec):
    # n = 4, gamma = 2, vertices 0, 1 on +, 2, 3 on -; blue_spec[s][i] = blue half-edges
    n, gamma = 4, 2
    side = np.array([1, 1, -1, -1])
    blue_counts = [blue_spec[0][0], blue_spec[0][1], blue_spec[1][0], blue_spec[1][1]]
    owner = np.repeat(np.arange(n), gamma)
    is_blue = np.concatenate([[1] * b + [0] * (gamma - b) for b in blue_counts]).astype(bool)
    cuts = []
    for pairing in all_pairings(range(n * gamma)):
        cuts.append(sum(side[owner[a]] != side[owner[b]] for a, b in pairing if is_blue[a] or is_blue[b]))
    s_total = int(is_blue.sum())
    s_plus = int(is_blue[side[owner] == 1].sum())
    assert conditional_cut_mean(n, gamma, s_total, s_plus) == pytest.approx(np.mean(cuts), abs=1e-12)


def test_surgery_means_match_simulation_small():
    n, gamma, reps = 16, 4, 3000
    pred = surgery_expectations(n, gamma)
    rb, crb = [], []
    for r in range(reps):
        cg = color_and_decompose(n, gamma, seed=r)
        sigma = SpinConfig.random_balanced(n, make_rng(r, "sigma"))
        off = cg.g_rb.u != cg.g_rb.v
        rb.append(int(cg.g_rb.mult[off].sum()))
        crb.append(cut_size(cg.g_rb, sigma))
    for xs, mu in ((rb, pred.rb_edges), (crb, pred.cut_rb)):
        xs = np.asarray(xs, dtype=float)
        assert abs(xs.mean() - mu) < 4 * xs.std() / math.sqrt(reps)
