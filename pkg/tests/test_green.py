from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrlab.corr1 import adjoint, critical_family, forward, make_corr, multiset_match, random_corr, unit_point
from corrlab.errors import FitUnstable
from corrlab.green import (
    AtomicMeasure,
    TestFunction,
    backward_orbit_sample,
    circle_average,
    dictionary_test_functions,
    equidist_rate,
    fit_exponential,
    graph_iterate,
    green_power,
    pair,
    pair_with_sigma,
    potential_iterate,
    pullback_iterate,
    pullback_measure,
    pushforward_function,
    standard_grid,
    standard_test_functions,
    superpotential_series,
    wedge_branch_inequality,
)
from corrlab.polyalg import BiPoly

SQ = make_corr("w - z**2")


def test_pullback_examples():
    mu = pullback_measure(SQ, AtomicMeasure.dirac(4))
    assert multiset_match(list(mu.points), [2, -2], 1e-12)
    assert np.allclose(mu.weights, 0.5)

    mu = pullback_measure(make_corr("w**2 - z**3"), AtomicMeasure.dirac(1))
    roots = [cmath.exp(2j * cmath.pi * j / 3) for j in range(3)]
    assert multiset_match(list(mu.points), roots, 1e-10)
    assert np.allclose(mu.weights, 1 / 3)


def test_mass_conservation():
    rng = np.random.default_rng(0)
    for _ in range(10):
        f = random_corr(2, 3, rng, exact=False)
        mu = pullback_iterate(f, unit_point(rng), 4)
        assert abs(mu.total_mass - 1) <= 1e-12
    assert abs(backward_orbit_sample(SQ, 1.0, 8, 1000, seed=1).total_mass - 1) <= 1e-12


def test_depth_zero_is_dirac():
    mu = backward_orbit_sample(SQ, 0.3 + 0.2j, 0, 10, seed=0)
    assert np.all(mu.points == 0.3 + 0.2j)


def test_pair_examples():
    assert pair(AtomicMeasure.dirac(0), lambda z: np.abs(z) ** 2) == 0
    roots4 = AtomicMeasure([1, 1j, -1, -1j], [0.25] * 4)
    assert abs(pair(roots4, lambda z: z.real)) < 1e-15


def test_backward_sample_concentrates_on_circle():
    mu = backward_orbit_sample(SQ, 0.5 + 0.5j, 12, 20_000, seed=2)
    assert np.max(np.abs(np.abs(mu.points) - 1)) < 1e-3


def test_mc_pairing_matches_circle_average():
    mu = backward_orbit_sample(SQ, 1.0 + 0.5j, 12, 200_000, seed=7)
    for phi in standard_test_functions():
        val, sig = pair_with_sigma(mu, phi)
        assert abs(val - circle_average(phi)) <= 3 * sig + 1e-12


def test_sampling_is_deterministic_across_workers():
    a = backward_orbit_sample(SQ, 0.3 + 0.1j, 10, 9000, seed=11, jobs=1)
    b = backward_orbit_sample(SQ, 0.3 + 0.1j, 10, 9000, seed=11, jobs=3)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.weights, b.weights)


def test_two_seeds_agree():
    phi = standard_test_functions()[0]
    v1, s1 = pair_with_sigma(backward_orbit_sample(SQ, 1.0, 12, 50_000, seed=1), phi)
    v2, s2 = pair_with_sigma(backward_orbit_sample(SQ, 1.0, 12, 50_000, seed=2), phi)
    assert abs(v1 - v2) <= 3 * math.hypot(s1, s2)


def test_uniqueness_surrogate_dictionary():
    m1 = backward_orbit_sample(SQ, 0.4 + 0.3j, 12, 50_000, seed=3)
    m2 = backward_orbit_sample(SQ, -1.3 + 0.8j, 12, 50_000, seed=4)
    for phi in dictionary_test_functions(10):
        v1, s1 = pair_with_sigma(m1, phi)
        v2, s2 = pair_with_sigma(m2, phi)
        assert abs(v1 - v2) <= 3 * math.hypot(s1, s2)


def test_test_function_norm_bound_checked():
    with pytest.raises(ValueError):
        TestFunction("polynomial", {"coeffs": {(2, 0): 1.0}}, norm_bound=0.1)
    phi = TestFunction("gaussian", {"center": 0.5j, "sigma": 0.3})
    assert TestFunction.from_json(phi.to_json()).norm_bound == phi.norm_bound
    # fs functions are evaluable at infinity
    fs = standard_test_functions()[2]
    assert np.isfinite(fs(np.array([complex("inf")]))).all()


def test_measure_csv_roundtrip(tmp_path):
    mu = AtomicMeasure([0.5, 3 + 1j, complex("inf")], [0.2, 0.3, 0.5])
    mu.to_csv(tmp_path / "m.csv")
    back = AtomicMeasure.from_csv(tmp_path / "m.csv")
    assert np.allclose(back.weights, mu.weights)
    assert np.allclose(back.points[:2], mu.points[:2]) and not np.isfinite(back.points[2])


def test_equidist_rate_fits():
    for phi in standard_test_functions():
        fit = equidist_rate(SQ, 1.0 + 0.5j, phi, 12)
        assert fit.r2 >= 0.9 and 0 < fit.lam < 1


def test_equidist_rate_constant_is_degenerate():
    phi = TestFunction("polynomial", {"coeffs": {(0, 0): 0.5}})
    assert equidist_rate(SQ, 1.0 + 0.5j, phi, 8).degenerate


def test_fit_exponential_recovers_rate():
    ns = np.arange(12)
    fit = fit_exponential(ns, 3.0 * 0.4 ** ns)
    assert fit.lam == pytest.approx(0.4) and fit.C == pytest.approx(3.0) and fit.r2 == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    with pytest.raises(FitUnstable):
        fit_exponential(ns, rng.random(12))


def test_graph_iterate():
    for n in (1, 2, 3):
        assert graph_iterate(SQ, n).graph == BiPoly.from_expr(f"w - z**{2 ** n}").normalized()
    g = graph_iterate(critical_family(1, 2, 5), 2)
    assert g.bidegree == (1, 4)
    rng = np.random.default_rng(5)
    lhs, rhs = adjoint(graph_iterate(SQ, 2)), graph_iterate(adjoint(SQ), 2)
    for _ in range(20):
        z = unit_point(rng)
        assert multiset_match(forward(lhs, z).multiset(), forward(rhs, z).multiset(), 1e-9)


def test_potential_closed_form_at_zero():
    grid = standard_grid(40, 40)
    rep = potential_iterate(SQ, 0, 6, grid)
    assert all(d == 0 for d in rep["diffs"])
    assert np.allclose(rep["samples"][3], np.log(np.abs(grid)), atol=1e-13)


def test_potential_decay_at_one():
    rep = potential_iterate(SQ, 1, 9, standard_grid(60, 60))
    d = rep["diffs"]
    assert all(b <= 0.75 * a for a, b in zip(d, d[1:]))
    # limit is the Green function log max(1, |z|)
    z = rep["grid"]
    assert np.max(np.abs(rep["samples"][-1] - np.maximum(np.log(np.abs(z)), 0))) < 5e-3


def test_superpotential_series_power_map():
    assert superpotential_series(SQ, 0.7, 0.7, 10).partial_sums[-1] == 0
    for a, b in [(0.5, 2.0), (1.5 + 1j, 0.2j), (3.0, -4.0)]:
        res = superpotential_series(SQ, a, b, 40)
        closed = float(green_power(a) - green_power(b))
        assert res.partial_sums[-1] == pytest.approx(closed, abs=1e-12)
        assert all(abs(inc) <= t * 2 + 1e-15 for inc, t in zip(res.increments[1:], res.tail_bounds))


def test_duality_random():
    rng = np.random.default_rng(1)
    for _ in range(100):
        f = random_corr(int(rng.integers(1, 4)), int(rng.integers(1, 4)), rng, exact=False)
        mu = AtomicMeasure([unit_point(rng) for _ in range(3)], rng.random(3))
        phi = TestFunction("gaussian", {"center": complex(*rng.normal(size=2)), "sigma": 0.5 + rng.random()})
        lhs = pair(pullback_measure(f, mu), phi)
        rhs = pair(mu, pushforward_function(f, phi))
        assert abs(lhs - rhs) <= 1e-9


def test_wedge_branch_inequality():
    rep = wedge_branch_inequality(SQ, lambda w: np.abs(w), lambda w: np.ones(w.shape), [0.5, 1 + 1j])
    assert all(abs(r["slack"]) < 1e-15 for r in rep["rows"])
    two = make_corr("w**2 - z")
    rep = wedge_branch_inequality(two, lambda w: np.ones(w.shape), lambda w: np.ones(w.shape), [0.3])
    assert rep["rows"][0]["lhs"] == 2 and rep["rows"][0]["rhs"] == 4
    rng = np.random.default_rng(3)
    f = random_corr(3, 2, rng, exact=False)
    zs = [unit_point(rng) for _ in range(1000)]
    phi = standard_test_functions()[0]
    psi = TestFunction("gaussian", {"center": -0.5 + 0.2j, "sigma": 1.0})
    assert wedge_branch_inequality(f, phi, psi, zs)["ok"]


@settings(max_examples=8, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0, 2 * math.pi))
def test_green_potential_difference_antisymmetric(r, t):
    a = r * cmath.exp(1j * t)
    b = 0.3 + 0.4j
    s1 = superpotential_series(SQ, a, b, 20).partial_sums[-1]
    s2 = superpotential_series(SQ, b, a, 20).partial_sums[-1]
    assert s1 == pytest.approx(-s2, abs=1e-12)
