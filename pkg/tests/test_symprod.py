from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrlab.corr1 import critical_family, make_corr
from corrlab.mult import adjoint_multiplicity
from corrlab.symprod import (
    chordal,
    delta_product_bound,
    fiber_cardinality,
    graph_relation_check,
    induced_degrees,
    pi_fiber,
    pi_map,
    product_delta,
    proj_equal_exact,
    sampled_delta,
    semiconjugacy_check,
)


def test_pi_map_examples():
    assert pi_map([(1, 1), (1, 1)]) == (1, 2, 1)
    a, b = Fraction(2, 3), Fraction(-5)
    assert pi_map([a, b]) == (a * b, a + b, 1)
    assert pi_map([(1, 0), 3]) == (3, 1, 0)
    assert any(v != 0 for v in pi_map([(1, 0), (1, 0), (1, 0)]))


def test_pi_permutation_invariance_exact():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        k = int(rng.integers(2, 5))
        pts = [(Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 5))), int(rng.integers(0, 3)))
               for _ in range(k)]
        pts = [(x, y) if (x, y) != (0, 0) else (1, 0) for x, y in pts]
        perm = [pts[i] for i in rng.permutation(k)]
        assert proj_equal_exact(pi_map(pts), pi_map(perm))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=2, max_size=4), st.randoms())
def test_pi_permutation_invariance_property(pts, rnd):
    pts = [p if p != (0, 0) else (0, 1) for p in pts]
    shuffled = list(pts)
    rnd.shuffle(shuffled)
    assert pi_map(pts) == pi_map(shuffled)


@pytest.mark.parametrize("k", [2, 3])
def test_generic_fiber_has_k_factorial_points(k):
    rng = np.random.default_rng(k)
    for _ in range(20):
        x = rng.normal(size=k) + 1j * rng.normal(size=k)
        eta = pi_map(list(x))
        fib = pi_fiber(eta)
        assert len(fib) == math.factorial(k)
        for lift in fib:
            assert chordal(pi_map(list(lift)), eta) < 1e-12


def test_fiber_with_repeated_point():
    assert fiber_cardinality(pi_map([1, 1])) == 1
    assert fiber_cardinality(pi_map([1, 1, 2])) == 3


def test_chordal_metric():
    assert chordal([1, 2, 3], [2, 4, 6]) == pytest.approx(0, abs=1e-16)
    assert chordal([1, 0], [0, 1]) == pytest.approx(1)
    assert chordal([1, 1e-12], [1, 0]) == pytest.approx(1e-12, rel=1e-6)


@pytest.mark.parametrize("k", [2, 3])
def test_semiconjugacy_power_map(k):
    rep = semiconjugacy_check(make_corr("w - z**2"), k, 100, rng=np.random.default_rng(1))
    assert rep.ok and rep.max_residual <= 1e-9


def test_semiconjugacy_identity():
    rep = semiconjugacy_check(make_corr("w - z"), 2, 30)
    assert rep.max_residual <= 1e-12


def test_semiconjugacy_critical_family():
    rep = semiconjugacy_check(critical_family(2, 3, 5), 2, 100, rng=np.random.default_rng(2))
    assert rep.ok and rep.max_residual <= 1e-9


def test_induced_degrees():
    assert induced_degrees(2, 3, 2).degrees == (4, 6, 9)


def test_delta_bound_examples():
    assert delta_product_bound(product_delta(1, 2), 2) == 2
    assert product_delta(2, 3) == 8
    assert delta_product_bound(product_delta(2, 3), 3) == 48


@pytest.mark.parametrize("h", ["w - z**2", "z - w**2"])
def test_sampled_delta_respects_bound(h):
    f = make_corr(h)
    dh = adjoint_multiplicity(f)
    got = sampled_delta(f, 2)
    assert got <= delta_product_bound(product_delta(dh, 2), 2)
    # product rule delta(f_hat) = delta(h)^k observed on these instances
    assert got == product_delta(dh, 2)


def test_sampled_delta_critical_family():
    f = critical_family(2, 3, 5)
    got = sampled_delta(f, 2)
    assert got == 9 <= delta_product_bound(product_delta(adjoint_multiplicity(f), 2), 2)


def test_graph_relation_power_map():
    # graph {g0(z) = g1(w)} with g0 = z^2, g1 = w
    rep = graph_relation_check(make_corr("w - z**2"), ([0, 0, 1], [1]), ([0, 1], [1]), 2)
    assert rep["max_residual"] <= 1e-8


def test_graph_relation_two_sided():
    # z^2 = w^3 + 1
    rep = graph_relation_check(make_corr("z**2 - w**3 - 1"), ([0, 0, 1], [1]), ([1, 0, 0, 1], [1]), 2)
    assert rep["max_residual"] <= 1e-8
    assert max(rep["fit_residuals"]) <= 1e-10
