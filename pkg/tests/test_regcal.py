from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrlab import mult
from corrlab.errors import Infeasible
from corrlab.regcal import (
    HolderDesc,
    LogHolderDesc,
    c5_constant,
    certify_log_rate,
    dictionary_norm,
    domination_rule,
    interpolation_inequality_check,
    pullback_chain,
    pushforward_iterate,
    rate_lambda,
    skoda_bound,
    wedge_rule,
)

GRID = [10.0 ** -e for e in range(4, 17)]


def test_exponent_rules():
    assert wedge_rule(1, 1) == Fraction(1, 2)
    assert wedge_rule(Fraction(1, 2), Fraction(1, 2)) == Fraction(1, 8)
    assert wedge_rule(HolderDesc(3.0, 1.0), HolderDesc(1.0, 1.0)) == 0.5
    assert domination_rule(1, 1) == Fraction(1, 50)
    assert domination_rule(Fraction(1, 2), 2) == Fraction(1, 200)
    with pytest.raises(ValueError):
        domination_rule(0, 1)


def test_wedge_tends_to_zero():
    vals = [wedge_rule(10.0 ** -j, 1) for j in range(1, 8)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-7


def test_pullback_chain_values():
    assert pullback_chain(1, 1, 1) == [Fraction(1, 2), Fraction(1, 2), Fraction(1, 100)]
    assert pullback_chain(1, 1, 3) == [Fraction(1, 6), Fraction(1, 6), Fraction(1, 300)]
    # third entry follows the kappa formula 1/(25 k (4 rho)^q) = 1/800 for (2, 2, 1)
    assert pullback_chain(2, 2, 1) == [Fraction(1, 2), Fraction(1, 8), Fraction(1, 800)]


def test_pullback_chain_matches_kappa_grid():
    for k in (1, 2, 3):
        for q in range(1, k + 1):
            for rho in range(1, 6):
                assert pullback_chain(k, q, rho)[2] == mult.kappa(k, q, rho)


def test_pushforward_iterate():
    C3 = 1.001
    assert pushforward_iterate(1, 0.5, 1e-8, 0) == pytest.approx(C3 ** 2 * 1e-8)
    assert pushforward_iterate(1, 0.5, 1e-8, 2) == pytest.approx(C3 ** 2 * 1e-2)


def test_pushforward_iterate_in_l():
    # xi^(kappa^l) grows towards 1 as l grows; the bound tracks it
    for kappa in (0.3, 0.7):
        vals = [pushforward_iterate(1.0, kappa, 1e-6, l) for l in range(8)]
        assert vals == sorted(vals)


def test_skoda():
    assert skoda_bound(3, 0.5, 1) == 3
    assert skoda_bound(1, math.e, 1) == pytest.approx(2)
    assert skoda_bound(1, math.e ** 2, 0.5) == pytest.approx(5)
    assert skoda_bound(1, 10, 1) < skoda_bound(1, 20, 1)


def test_descriptors_validate():
    with pytest.raises(ValueError):
        HolderDesc(1.0, 1.5)
    with pytest.raises(ValueError):
        LogHolderDesc(0.0, 1.0)


def _c5_bruteforce(r):
    t = np.linspace(math.log(math.log(4)), 60, 2_000_001)
    return float(np.max(np.exp(r * t - np.exp(t / 2))))


@pytest.mark.parametrize("r", [0.05, 0.5, 1.0, 2.3, 4.0])
def test_c5_matches_grid_maximum(r):
    assert c5_constant(r) == pytest.approx(_c5_bruteforce(r), rel=1e-9)


def test_c5_is_valid_constant():
    for r in (0.5, 1.7):
        C5 = c5_constant(r)
        for xi in np.logspace(-0.61, -300, 400):
            L = -math.log(xi)
            assert math.exp(-math.sqrt(L)) <= C5 * L ** (-r) * (1 + 1e-12)


def test_certify_spot_value():
    cert = certify_log_rate(4, 1, 0.5, [1e-8])
    row = cert.rows[0]
    assert cert.D == pytest.approx(2) and cert.r == pytest.approx(0.5)
    assert row["N"] == 2
    assert row["xi_pow"] == pytest.approx(1e-2)
    assert row["log_rate"] == pytest.approx(18.4207 ** -0.5, rel=1e-4)
    assert row["D_pow"] == 0.25 and row["D_bound"] == pytest.approx(0.466, abs=1e-3)
    assert row["xi_pow"] <= 0.233 * cert.C5
    assert cert.ok


@pytest.mark.parametrize("kappa", [0.3, 0.5, 0.7, 0.9])
@pytest.mark.parametrize("D", [1.1, 2.0, 5.0])
def test_certify_grid(kappa, D):
    cert = certify_log_rate(D * D, 1.0, kappa, GRID)
    assert cert.ok and len(cert.rows) == 13
    assert cert.D == pytest.approx(D)


def test_certify_near_quarter_boundary():
    cert = certify_log_rate(4, 1, 0.5, [0.2499])
    assert cert.rows[0]["N"] <= 0 and cert.ok


def test_certify_rejects_bad_input():
    with pytest.raises(ValueError):
        certify_log_rate(1, 2, 0.5, GRID)
    with pytest.raises(ValueError):
        certify_log_rate(4, 1, 0.5, [0.3])
    with pytest.raises(ValueError):
        certify_log_rate(4, 1, 0.5, GRID, delta=5)


def test_certificate_invariants():
    kt = mult.kappa_tilde(1, 1, 1)
    cert = certify_log_rate(128, 1, mult.kappa(1, 1, 1), GRID, kappa_tilde=kt, r_plus=0.9)
    assert 1 < cert.delta_choice < 128
    assert cert.r < math.log(128) / abs(2 * math.log(float(cert.kappa)))
    assert cert.lambda0 > Fraction(1, 128) / kt
    assert cert.lambda1 == 0.9


def test_rate_lambda():
    lam0, lam1 = rate_lambda(128, 1, Fraction(1, 100))
    assert lam0 == Fraction(1001, 1280)
    assert Fraction(100, 128) < lam0 < 1 and lam1 == lam0
    with pytest.raises(Infeasible):
        rate_lambda(100, 1, Fraction(1, 100))
    assert rate_lambda(128, 1, Fraction(1, 100), r_plus=Fraction(9, 10))[1] == Fraction(9, 10)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 400), st.integers(1, 3))
def test_rate_lambda_feasible_iff_small(ratio, delta):
    kt = mult.kappa_tilde(1, 1, delta)
    small = mult.q_small_adjoint(None, ratio, 1, delta=delta)
    try:
        lam0, _ = rate_lambda(ratio, 1, kt)
        assert small and lam0 < 1
    except Infeasible:
        assert not small


def test_interpolation_inequality():
    rng = np.random.default_rng(0)
    samples = []
    for h in (1e-1, 1e-2, 1e-3):
        samples.append(([0.3, 0.3 + h], [1.0, -1.0]))
    for _ in range(20):
        pts = rng.normal(size=10) + 1j * rng.normal(size=10)
        w = rng.normal(size=10)
        samples.append((pts, w - w.mean()))
    rep = interpolation_inequality_check(1, 2, samples)
    assert rep["ok"] and rep["c"] > 0
    assert interpolation_inequality_check(1, 2, samples, c=rep["c"] * 0.5)["upper_ok"] is False


def test_dipole_pairing_decays():
    vals = [dictionary_norm([0.3, 0.3 + h], [1.0, -1.0], 2) for h in (1e-1, 1e-2, 1e-3)]
    assert vals[0] > vals[1] > vals[2]
    assert dictionary_norm([0.1, 0.1], [1.0, -1.0], 2) == 0.0
    assert dictionary_norm([], [], 2) == 0.0
