from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrlab.corr1 import adjoint, critical_family, make_corr, random_corr
from corrlab.errors import FitUnstable
from corrlab.mult import (
    adjoint_multiplicity,
    brute_force_collision,
    kappa,
    kappa_tilde,
    local_multiplicity,
    loja_exponent,
    mult_report,
    phi_collision,
    phi_degree_bound,
    q_small_adjoint,
    small_multiplicity,
)


@pytest.mark.parametrize("expr, rho, delta", [
    ("z - w**3", 3, 1),
    ("w - z**2", 1, 2),
    ("w**2 - z**3", 2, 3),
])
def test_multiplicities(expr, rho, delta):
    f = make_corr(expr)
    assert local_multiplicity(f).rho == rho
    assert adjoint_multiplicity(f) == delta
    # mirrored versions
    assert local_multiplicity(adjoint(f)).rho == delta
    assert adjoint_multiplicity(adjoint(f)) == rho


def test_witnesses_carry_max():
    lm = local_multiplicity(make_corr("z - w**3"))
    assert max(m for _, _, m in lm.witnesses) == 3
    assert any(z == 0 and w == 0 and m == 3 for z, w, m in lm.witnesses)


def test_critical_family_multiplicities():
    rep = mult_report(critical_family(2, 3, 5))
    assert (rep.rho, rep.delta) == (2, 3)


def test_rho_of_adjoint_is_delta_random():
    rng = np.random.default_rng(2)
    for _ in range(5):
        f = random_corr(2, 3, rng)
        assert local_multiplicity(adjoint(f)).rho == adjoint_multiplicity(f)


def test_kappa_values():
    assert kappa(1, 1, 1) == Fraction(1, 100)
    assert kappa(1, 1, 2) == Fraction(1, 200)
    assert kappa(1, 1, 3) == Fraction(1, 300)
    assert kappa_tilde(1, 1, 1) == Fraction(1, 100)
    assert kappa_tilde(2, 1, 1) == Fraction(1, 800)
    with pytest.raises(ValueError):
        kappa(1, 2, 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 5))
def test_kappa_monotone(k, q, r):
    q = min(q, k)
    assert kappa(k, q, r + 1) < kappa(k, q, r)
    assert kappa_tilde(k, q, r + 1) < kappa_tilde(k, q, r)
    if q < k:
        assert kappa(k, q + 1, r) < kappa(k, q, r)


def test_mult_report_json():
    js = mult_report(make_corr("z - w**3")).to_json()
    assert js["rho"] == 3 and js["kappa"] == "1/300" and js["kappa_tilde"] == "1/100"


def test_q_small_adjoint():
    assert q_small_adjoint(None, 128, 1, delta=1)
    assert not q_small_adjoint(None, 64, 1, delta=1)
    assert not q_small_adjoint(None, 200, 1, delta=2)
    assert q_small_adjoint(None, 201, 1, delta=2)
    assert not q_small_adjoint(None, 1, 2, delta=1)
    # delta read off the correspondence: z - w**3 has delta = 1
    assert q_small_adjoint(make_corr("z - w**3"), 128, 1)


def test_small_multiplicity():
    assert small_multiplicity(None, 10 ** 4, 1, delta_F=1)
    assert not small_multiplicity(None, 500, 1, delta_F=1)
    assert not small_multiplicity(None, 3200, 1, delta_F=2)
    assert small_multiplicity(None, 3201, 1, delta_F=2)


def test_phi_examples():
    assert phi_collision([0, 0, 1], 2)
    assert not phi_collision([0, 1, 2], 2)
    assert phi_collision([Fraction(1, 3), 2, Fraction(1, 3)], 2)
    assert phi_collision([(1, 2), (0, 0), (1, 2), (1, 2)], 3)
    assert not phi_collision([(1, 2), (0, 0), (1, 2), (1, 3)], 3)
    assert phi_degree_bound(3, 2, 1) == 0
    assert phi_degree_bound(4, 3, 2) == 4 * 5


def _random_instance(rng):
    d = int(rng.integers(2, 7))
    rho = int(rng.integers(2, min(3, d) + 1))
    k = int(rng.integers(1, 3))
    pts = rng.integers(-2, 3, size=(d, k)).astype(float) + 1j * rng.integers(-1, 2, size=(d, k))
    if rng.random() < 0.3:
        J = rng.choice(d, size=rho, replace=False)
        pts[J] = pts[J[0]]
    if rng.random() < 0.3:
        i, j = rng.choice(d, size=2, replace=False)
        pts[j] = pts[i] + 1e-3
    return [tuple(p) for p in pts], rho


def test_phi_matches_brute_force_1000():
    rng = np.random.default_rng(2024)
    disagreements = 0
    for _ in range(1000):
        pts, rho = _random_instance(rng)
        disagreements += phi_collision(pts, rho) != brute_force_collision(pts, rho)
    assert disagreements == 0


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=2, max_size=6), st.integers(2, 3))
def test_phi_exact_matches_brute_force(vals, rho):
    if rho > len(vals):
        return
    assert phi_collision(vals, rho) == brute_force_collision(vals, rho)


def test_near_collisions_are_not_collisions():
    rng = np.random.default_rng(5)
    for _ in range(100):
        base = rng.normal(size=2) + 1j * rng.normal(size=2)
        pts = [tuple(base), tuple(base + 1e-3), tuple(base + 5)]
        assert not phi_collision(pts, 2)


def test_brute_force_enumerates_subsets():
    pts = [0, 1, 0, 1, 0]
    assert brute_force_collision(pts, 3)
    assert not brute_force_collision(pts, 4)
    assert len(list(combinations(range(5), 3))) == 10


@pytest.mark.parametrize("expr, z0, expected", [
    ("z - w**3", 0, 1 / 3),
    ("z - w**2", 0, 1 / 2),
    ("w - z**2", 1, 1.0),
])
def test_loja_exponent(expr, z0, expected):
    fit = loja_exponent(make_corr(expr), z0)
    assert abs(fit.slope - expected) <= 0.1 * expected
    assert fit.r2 >= 0.95


def test_loja_slope_in_range_for_monomials():
    for rho in (2, 3, 4):
        fit = loja_exponent(make_corr(f"z - w**{rho}"), 0)
        assert 0.9 / rho <= fit.slope <= 1.0


def test_loja_unstable_fit_reported():
    # displacements below the rounding level of the fibre
    with pytest.raises(FitUnstable) as exc:
        loja_exponent(make_corr("z**2 - w**3 + w"), 0, radii=np.geomspace(1e-13, 1e-16, 6))
    assert exc.value.data is not None
