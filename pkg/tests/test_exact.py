import itertools
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from spinmono.engine import run_replicas
from spinmono.exact import (
    SuffixDistribution,
    build_generator,
    enumerate_upsets,
    generator_for,
    is_upward_closed,
    pattern_index,
    site_profile,
    stochastic_dominates,
    suffix_marginal,
    transient_distribution,
    upward_closure,
)
from spinmono.lattice import Configuration, make_initial
from spinmono.rates import build_model

from conftest import attractive_builtins, single_site


def brute_monotone_count(m):
    """Count f: {0,1}^m -> {0,1} with f(x) <= f(y) whenever x <= y coordinatewise."""
    points = list(itertools.product((0, 1), repeat=m))
    pairs = [(i, j) for i, x in enumerate(points) for j, y in enumerate(points)
             if i != j and all(a <= b for a, b in zip(x, y))]
    count = 0
    for f in itertools.product((0, 1), repeat=len(points)):
        if all(f[i] <= f[j] for i, j in pairs):
            count += 1
    return count


# --- generator -------------------------------------------------------------

def test_pure_death_single_site(pure_death):
    gen = build_generator(pure_death, (0, 0), 0, 0)
    assert gen.rate(1, 0) == 1.0
    assert gen.rate(0, 1) == 0.0


def test_two_state_generator():
    gen = build_generator(single_site(1.0, 2.0), (0, 0), 0, 0)
    dense = gen.matrix.toarray()
    assert dense[0, 1] == 1.0 and dense[1, 0] == 2.0
    np.testing.assert_allclose(dense.sum(axis=1), 0.0, atol=1e-12)


def test_contact_edge_rate_uses_tail(contact):
    gen = build_generator(contact, (0, 2), 1, 0)
    # flipping the leftmost site of "000": birth 2 * (left tail 1 + right neighbour 0)
    assert gen.rate(0b000, 0b001) == 2.0
    assert gen.rate(0b000, 0b100) == 0.0


@pytest.mark.parametrize("spec", attractive_builtins(), ids=lambda s: s.name)
def test_generator_rows_and_entries(spec):
    n, lo = 5, -2
    gen = build_generator(spec, (lo, lo + n - 1), 1, 0)
    dense = gen.matrix.toarray()
    np.testing.assert_allclose(dense.sum(axis=1), 0.0, atol=1e-12)
    for state in range(1 << n):
        core = [(state >> i) & 1 for i in range(n)]
        config = Configuration.from_core(1, lo, core, 0)
        off = dense[state].copy()
        off[state] = 0.0
        assert np.all(off >= 0)
        for i in range(n):
            x = lo + i
            bits = [config[x + d] for d in range(-spec.radius, spec.radius + 1)]
            expected = spec.rate("".join(map(str, bits)))
            assert off[state ^ (1 << i)] == expected
        assert np.count_nonzero(off) <= n


def test_window_cap(contact):
    with pytest.raises(ValueError):
        build_generator(contact, (0, 14), 1, 0)
    with pytest.raises(ValueError):
        build_generator(contact, (3, 2), 1, 0)


def test_generator_for_uses_config_bits(contact):
    config = make_initial("step", window=(-2, 3))
    gen, state = generator_for(contact, config)
    assert gen.window == (-2, 3)
    assert state == 0b000111


# --- transient law ---------------------------------------------------------

def test_zero_horizon_is_point_mass(contact):
    gen = build_generator(contact, (0, 3), 1, 0)
    p = transient_distribution(gen, 5, 0.0)
    assert p[5] == 1.0 and p.sum() == 1.0


def test_pure_death_all_ones(pure_death):
    gen = build_generator(pure_death, (0, 2), 0, 0)
    p = transient_distribution(gen, 0b111, 1.0)
    assert abs(p[0b111] - math.exp(-3)) < 1e-9


def test_two_state_closed_form():
    gen = build_generator(single_site(1.0, 1.0), (0, 0), 0, 0)
    p = transient_distribution(gen, 0, 0.5)
    assert abs(p[1] - 0.5 * (1 - math.exp(-1))) < 1e-9


@pytest.mark.parametrize("spec", attractive_builtins(), ids=lambda s: s.name)
def test_matches_dense_expm(spec):
    gen = build_generator(spec, (0, 4), 1, 0)
    want = scipy.linalg.expm(0.7 * gen.matrix.toarray())[0b00111]
    got = transient_distribution(gen, 0b00111, 0.7, tol=1e-13)
    np.testing.assert_allclose(got, want, atol=1e-10)


@given(st.sampled_from(attractive_builtins()), st.integers(0, 31),
       st.floats(0.0, 1.0), st.floats(0.0, 1.0))
@settings(max_examples=25, deadline=None)
def test_semigroup_and_mass(spec, init, s, t):
    tol = 1e-12
    gen = build_generator(spec, (0, 4), 1, 0)
    direct = transient_distribution(gen, init, s + t, tol)
    twice = transient_distribution(gen, transient_distribution(gen, init, s, tol), t, tol)
    assert np.all(direct >= 0)
    assert abs(direct.sum() - 1) <= tol * 10
    assert np.max(np.abs(direct - twice)) <= 2 * tol + 1e-13


def test_rejects_bad_arguments(contact):
    gen = build_generator(contact, (0, 2), 1, 0)
    with pytest.raises(ValueError):
        transient_distribution(gen, 0, -1.0)
    with pytest.raises(ValueError):
        transient_distribution(gen, 0, 1.0, tol=0.0)
    with pytest.raises(ValueError):
        transient_distribution(gen, np.ones(3) / 3, 1.0)


# --- suffix laws -----------------------------------------------------------

def test_suffix_of_step_point_mass():
    window = (-3, 3)
    dist = np.zeros(1 << 7)
    dist[make_initial("step", window=window).bits] = 1.0
    mu = suffix_marginal(dist, window, 0, 2)
    assert mu.as_dict()[(1, 0)] == 1.0


def test_suffix_of_product_is_product():
    probs = [0.1, 0.4, 0.8, 0.3, 0.6]
    full = SuffixDistribution.product(probs).weights
    mu = suffix_marginal(full, (0, 4), 1, 3)
    np.testing.assert_allclose(mu.weights, SuffixDistribution.product(probs[1:4]).weights,
                               atol=1e-15)


def test_suffix_outside_window():
    with pytest.raises(ValueError):
        suffix_marginal(np.ones(8) / 8, (0, 2), 1, 3)


def test_suffix_against_gillespie(contact):
    window, z, m, n = (-4, 5), 1, 3, 100_000
    init = make_initial("step", window=window)
    gen = build_generator(contact, window, 1, 0)
    exact = suffix_marginal(transient_distribution(gen, init.bits, 0.5), window, z, m).weights
    finals = run_replicas(contact, init, 0.5, seed=21, replicas=n, backend="gillespie")
    block = finals[:, z - window[0]: z - window[0] + m].astype(np.int64)
    freq = np.bincount((block << np.arange(m)).sum(axis=1), minlength=1 << m) / n
    sigma = np.sqrt(exact * (1 - exact) / n)
    assert np.all(np.abs(freq - exact) <= 3 * sigma + 1e-12)


def test_site_profile_point_mass():
    dist = np.zeros(8)
    dist[0b101] = 1.0
    np.testing.assert_array_equal(site_profile(dist, (0, 2)), [1.0, 0.0, 1.0])


# --- up-sets ---------------------------------------------------------------

@pytest.mark.parametrize("m,count", [(1, 3), (2, 6), (3, 20), (4, 168)])
def test_upset_counts_match_brute_force(m, count):
    brute = brute_monotone_count(m)
    assert brute == count
    ups = enumerate_upsets(m)
    assert len(ups) == brute
    assert len({u.mask for u in ups}) == brute


def test_upset_count_width_five():
    assert len(enumerate_upsets(5)) == 7581


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_every_enumerated_set_is_upward_closed(m):
    full = (1 << (1 << m)) - 1
    masks = {u.mask for u in enumerate_upsets(m)}
    assert 0 in masks and full in masks
    for u in enumerate_upsets(m):
        members = u.members
        for p in members:
            for j in range(m):
                q = list(p)
                q[j] = 1
                assert tuple(q) in members


def test_upset_width_limits():
    with pytest.raises(ValueError):
        enumerate_upsets(0)
    with pytest.raises(ValueError):
        enumerate_upsets(6)


def test_upward_closure_and_str():
    u = upward_closure([(0, 1), (1, 0)], 2)
    assert u.members == {(0, 1), (1, 0), (1, 1)}
    assert str(u) == "up{01,10}"
    assert is_upward_closed(u.mask, 2)
    assert not is_upward_closed(1 << pattern_index((0, 1)), 2)


# --- stochastic order ------------------------------------------------------

def test_point_masses():
    hi = SuffixDistribution.point_mass((1, 1))
    lo = SuffixDistribution.point_mass((0, 0))
    assert stochastic_dominates(hi, lo).dominates
    verdict = stochastic_dominates(lo, hi)
    assert not verdict.dominates
    assert verdict.witness.members == {(1, 1)}
    assert verdict.margin == -1.0


def test_products():
    assert stochastic_dominates(SuffixDistribution.product([0.7, 0.7]),
                                SuffixDistribution.product([0.4, 0.4])).dominates


def test_incomparable_pair():
    mu = SuffixDistribution.from_dict(2, {"01": 0.5, "10": 0.5})
    nu = SuffixDistribution.from_dict(2, {"00": 0.5, "11": 0.5})
    forward = stochastic_dominates(mu, nu)
    assert not forward.dominates
    assert forward.witness.members == {(1, 1)}
    assert forward.margin == pytest.approx(-0.5)
    backward = stochastic_dominates(nu, mu)
    assert not backward.dominates
    assert backward.witness.members == upward_closure([(0, 1), (1, 0)], 2).members
    assert backward.margin == pytest.approx(-0.5)


def test_width_mismatch():
    with pytest.raises(ValueError):
        stochastic_dominates(SuffixDistribution.point_mass((1,)),
                             SuffixDistribution.point_mass((1, 0)))


def laws(m):
    return st.lists(st.floats(0.0, 1.0), min_size=1 << m, max_size=1 << m).filter(
        lambda w: sum(w) > 1e-3).map(lambda w: SuffixDistribution(m, np.array(w) / sum(w)))


@given(st.integers(1, 3).flatmap(lambda m: st.tuples(laws(m), laws(m), laws(m))))
@settings(max_examples=80, deadline=None)
def test_order_properties(triple):
    a, b, c = triple
    assert stochastic_dominates(a, a).dominates
    if stochastic_dominates(a, b).dominates and stochastic_dominates(b, c).dominates:
        assert stochastic_dominates(a, c, tol=2e-9).dominates
    if stochastic_dominates(a, b, tol=0).dominates and stochastic_dominates(b, a, tol=0).dominates:
        np.testing.assert_allclose(a.weights, b.weights, atol=1e-12)


@given(st.integers(1, 3).flatmap(laws))
@settings(max_examples=40, deadline=None)
def test_mass_moved_up_dominates(mu):
    # moving all mass from the bottom pattern to the top can only help
    up = mu.weights.copy()
    up[-1] += up[0]
    up[0] = 0.0
    assert stochastic_dominates(SuffixDistribution(mu.m, up), mu, tol=1e-12).dominates


@given(st.sampled_from(attractive_builtins()), st.integers(0, 63), st.integers(0, 63),
       st.floats(0.05, 1.0))
@settings(max_examples=30, deadline=None)
def test_attractive_dynamics_keep_order(spec, a, b, t):
    window = (0, 5)
    upper, lower = a | b, a & b
    gen = build_generator(spec, window, 1, 0)
    p = transient_distribution(gen, upper, t)
    q = transient_distribution(gen, lower, t)
    for z in range(0, 6):
        for m in range(1, min(4, 6 - z) + 1):
            verdict = stochastic_dominates(suffix_marginal(p, window, z, m),
                                           suffix_marginal(q, window, z, m))
            assert verdict.dominates, (spec.name, z, m, verdict.margin)


def test_non_attractive_dynamics_can_break_order():
    # a pure "anti-voter": a site copies the opposite of its left neighbour
    rates = {}
    for code in range(8):
        left, centre = code & 1, (code >> 1) & 1
        rates[f"{left}{centre}{(code >> 2) & 1}"] = 1.0 if left == centre else 0.0
    spec = build_model("custom", radius=1, rates=rates)
    gen = build_generator(spec, (0, 1), 0, 0)
    p = transient_distribution(gen, 0b11, 2.0)
    q = transient_distribution(gen, 0b00, 2.0)
    assert not stochastic_dominates(suffix_marginal(p, (0, 1), 1, 1),
                                    suffix_marginal(q, (0, 1), 1, 1)).dominates
