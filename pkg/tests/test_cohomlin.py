from __future__ import annotations

import math
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import block_diag

from corrlab.cohomlin import (
    ConeMap,
    DegreeProfile,
    cauchy_report,
    check_surjectivity_limit,
    continued_fraction_denominators,
    degrees_graph_sum,
    degrees_projective,
    degrees_sym_product,
    kunneth_bound,
    kunneth_bound_squares,
    lambda_n,
    monotonicity_check,
    product_model,
    rotation_example,
    rotation_subsequence,
    rpq_bound_check,
    simple_action_check,
    spectral_data,
    spectral_radius,
)
from corrlab.corr1 import forward, backward, make_corr, unit_point

THETA = math.sqrt(2) - 1


def test_spectral_data_jordan_block():
    S = spectral_data([[2, 1], [0, 2]])
    assert S.lam == pytest.approx(2)
    assert S.m == 2 and S.dim_F == 1
    assert abs(abs(S.F_basis[0, 0]) - 1) < 1e-12


def test_spectral_data_diagonal_with_nilpotent():
    S = spectral_data(np.diag([3.0, 2.0, 0.0]))
    assert S.lam == pytest.approx(3) and S.m == 1 and S.dim_F == 1
    assert np.allclose(np.abs(S.F_basis[:, 0]), [1, 0, 0])
    assert abs(S.blocks[-1].eigenvalue) == 0


def test_spectral_data_rotation():
    S = spectral_data(rotation_example(THETA))
    assert S.lam == pytest.approx(2) and S.m == 1 and S.dim_F == 2
    assert any(abs(t - THETA) < 1e-9 or abs(t - (1 - THETA)) < 1e-9 for t in S.theta)


def test_lambda_n_jordan_power():
    # binomial expansion: M^n = 2^n [[1, n/2], [0, 1]], so Lambda_n = [[1/n, 1/2], [0, 1/n]]
    M = np.array([[2.0, 1.0], [0.0, 2.0]])
    S = spectral_data(M)
    for n in (10, 40, 1000):
        assert np.allclose(lambda_n(M, S, n), [[1 / n, 0.5], [0, 1 / n]], atol=1e-12)
    assert np.allclose(lambda_n(M, S, 40, precision="extended"), [[1 / 40, 0.5], [0, 1 / 40]], atol=1e-14)


def test_lambda_n_diagonal():
    M = np.diag([3.0, 2.0])
    S = spectral_data(M)
    L = lambda_n(M, S, 40)
    assert np.allclose(L, np.diag([1.0, (2 / 3) ** 40]), rtol=1e-12)


def test_rotation_cauchy_along_convergents_only():
    M = rotation_example(THETA)
    S = spectral_data(M)
    seq = rotation_subsequence(S, max_n=10 ** 8)
    assert cauchy_report(M, S, seq)["cauchy"]
    full = cauchy_report(M, S, list(range(1, 200)), tail=50)
    assert not full["cauchy"] and full["max_diff"] > 1


def test_continued_fraction_denominators_of_silver_ratio():
    # theta = sqrt(2) - 1 = [0; 2, 2, 2, ...] gives Pell denominators
    qs = continued_fraction_denominators(THETA, 10 ** 6)
    assert qs[:8] == [1, 2, 5, 12, 29, 70, 169, 408]


def test_surjectivity_limit():
    for M in ([[2, 1], [0, 2]], np.diag([3.0, 2.0, 0.0])):
        M = np.asarray(M, float)
        rep = check_surjectivity_limit(M, spectral_data(M))
        assert rep["ok"] and rep["rank"] == 1
    M = rotation_example(THETA)
    S = spectral_data(M)
    rep = check_surjectivity_limit(M, S, rotation_subsequence(S, max_n=10 ** 8))
    assert rep["ok"] and rep["rank"] == 2


def test_cone_map_rejects_non_invariant_cone():
    ConeMap(np.array([[1.0, 1.0], [0.0, 1.0]]), cone_generators=np.eye(2))
    with pytest.raises(ValueError):
        ConeMap(np.array([[1.0, -1.0], [0.0, 1.0]]), cone_generators=np.eye(2))


def test_spectral_radius_random():
    rng = np.random.default_rng(8)
    for _ in range(20):
        M = rng.normal(size=(6, 6))
        assert spectral_data(M, gap=1.0).lam == pytest.approx(np.max(np.abs(np.linalg.eigvals(M))), abs=1e-9)


def test_degree_profiles():
    assert degrees_projective(2, 3).degrees == (1, 2, 4, 8)
    assert degrees_graph_sum(2, 2, 3).degrees == (9, 6, 6, 9)
    assert degrees_sym_product(2, 3, 2).degrees == (4, 6, 9)


def test_monotonicity():
    assert monotonicity_check([1, 2, 4, 8]).holds
    v = monotonicity_check([9, 6, 6, 9])
    assert not v.holds and v.decreasing_at_start and v.increasing_at_end
    assert monotonicity_check([4, 6, 9]).holds
    assert monotonicity_check([1, 3, 3, 1]).holds
    assert not monotonicity_check([1, 3, 2, 3, 1]).holds


def test_graph_sum_end_degrees_match_branch_counts():
    # union of the graphs of z**s1 and its adjoint on P^1 (k = 1): d0 = 1 + s2, d1 = s1 + 1
    for s1, s2 in [(2, 2), (3, 2), (2, 3)]:
        D = degrees_graph_sum(s1, s2, 1).degrees
        assert D[0] == 1 + s2 and D[1] == s1 + 1
        f = make_corr(f"(w - z**{s1})*(z - w**{s2})")
        rng = np.random.default_rng(s1 * 10 + s2)
        z = unit_point(rng)
        assert forward(f, z).total == D[0]
        assert backward(f, z).total == D[1]


def _kunneth_oracle(d):
    k = len(d) - 1
    out = []
    for l in range(2 * k + 1):
        best = 0
        for r in range(k + 1):
            for s in range(k + 1):
                if 0 <= k - l + r <= k and 0 <= k - l + s <= k:
                    best = max(best, d[r] * d[s] * d[k - l + r] * d[k - l + s])
        out.append(math.sqrt(best))
    return out


def test_kunneth_examples():
    assert kunneth_bound([1, 1]) == [1, 1, 1]
    assert kunneth_bound([1, 3]) == pytest.approx(_kunneth_oracle([1, 3]))
    assert kunneth_bound([1, 3]) == [3, 9, 3]
    assert kunneth_bound([1, 2, 4])[2] == 16


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 30), min_size=2, max_size=5))
def test_kunneth_matches_brute_force(d):
    assert kunneth_bound(d) == pytest.approx(_kunneth_oracle(d))
    k = len(d) - 1
    assert all(kunneth_bound(d)[k] >= x * x for x in d)
    assert kunneth_bound_squares(d)[k] == max(d) ** 4


def test_kunneth_equality_on_simple_models():
    for s, k in [(2, 1), (2, 3), (3, 2)]:
        D = degrees_projective(s, k)
        # at l = k the maximum is attained at r = s = q with d_q the top degree
        assert kunneth_bound(D)[k] == max(D.degrees) ** 2


def test_rpq_bound_and_violation():
    actions, D = product_model([2, 3, 5])
    assert rpq_bound_check(actions, D)["ok"]
    assert simple_action_check(actions, D)
    bad = dict(actions)
    bad[(1, 1)] = actions[(1, 1)] * 1.5
    rep = rpq_bound_check(bad, D)
    assert not rep["ok"] and rep["violations"] == [(1, 1)]


def test_rpq_substochastic_perturbations():
    actions, D = product_model([2, 3, 4])
    rng = np.random.default_rng(3)
    for _ in range(20):
        pert = {}
        for key, A in actions.items():
            n = A.shape[0]
            P = rng.random((n, n))
            P /= P.sum(axis=1, keepdims=True)
            # D^(1/2) P D^(1/2) with row-substochastic P has radius <= max diag
            s = np.sqrt(np.diag(A))
            pert[key] = (s[:, None] * P * s[None, :]) * 0.99
        assert rpq_bound_check(pert, D)["ok"]


def test_product_model_profile():
    actions, D = product_model([2, 2, 2])
    assert D.degrees == (1, 2, 4, 8)
    assert actions[(2, 2)].shape == (comb(3, 2), comb(3, 2))
    assert spectral_radius(actions[(3, 3)]) == 8


def test_simple_action_check_rejects_ties():
    actions, D = product_model([2, 2])
    assert simple_action_check(actions, D)
    assert not simple_action_check({(1, 1): np.diag([2.0, 2.0])}, DegreeProfile([1, 2, 1]))
    assert not simple_action_check({(1, 1): block_diag([[2.0]], [[1.0]])}, DegreeProfile([2, 2, 1]))
