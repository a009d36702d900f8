from __future__ import annotations

from fractions import Fraction

import pytest
import sympy as sp

from corrlab.algres import (
    KINDS,
    ChainSystem,
    build_system,
    eliminate,
    numeric_chain_exists,
    periodicity_obstruction_test,
    res_var,
)
from corrlab.errors import EliminationBlowup

c = sp.Symbol("c")


def _sympy_poly(P):
    return sp.Poly(sum(sp.Rational(v.numerator, v.denominator) * c ** i for i, v in enumerate(P.coeffs)), c)


def _squarefree_primitive(expr):
    p = sp.Poly(expr, c)
    _, parts = sp.sqf_list(p)
    out = sp.Poly(1, c)
    for fac, _ in parts:
        out *= fac
    _, prim = out.primitive()
    return prim if prim.LC() > 0 else -prim


def test_build_system_structure():
    P = build_system(2, 3, 1, "to-infinity")
    assert [str(e.as_expr()) for e in P.equations] == ["c + w0**2", "w0**3 - 1"]
    Q = build_system(2, 3, 2, "cycle")
    assert len(Q.equations) == 3
    R = build_system(2, 3, 2, "to-critical")
    assert str(R.equations[0].as_expr()) == "w0**2 + 3*w0 + 1"
    with pytest.raises(ValueError):
        build_system(1, 3, 1, "cycle")


def test_p_system_n1_matches_sympy():
    res = eliminate(build_system(2, 3, 1, "to-infinity"))
    w = sp.Symbol("w")
    oracle = sp.Poly(sp.resultant(w ** 2 + c, w ** 3 - 1, w), c)
    got = _sympy_poly(res.P)
    assert got == oracle or got == -oracle
    assert not res.zero and all(v.denominator == 1 for v in res.P.coeffs)
    # root-product oracle: lc^3 * prod over roots of w^2 + c of (w^3 - 1) = c^3 + 1 up to sign
    assert _squarefree_primitive(got.as_expr()) == sp.Poly(c ** 3 + 1, c)


@pytest.mark.parametrize("kind", KINDS)
def test_n2_matches_sympy_iterated_resultant(kind):
    S = build_system(2, 3, 2, kind)
    w0, w1 = sp.symbols("w0 w1")
    E = [e.as_expr() for e in S.equations]
    if kind == "cycle":
        inner = sp.resultant(E[1], E[2], w1)
        oracle = sp.resultant(E[0], inner, w0)
    else:
        oracle = sp.resultant(E[0], sp.resultant(E[1], E[2], w1), w0)
    got = _sympy_poly(eliminate(S).P)
    assert _squarefree_primitive(got.as_expr()) == _squarefree_primitive(oracle)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("n", [1, 2])
def test_elimination_order_same_roots(kind, n):
    S = build_system(2, 3, n, kind)
    a = _squarefree_primitive(_sympy_poly(eliminate(S, "forward").P).as_expr())
    b = _squarefree_primitive(_sympy_poly(eliminate(S, "reverse").P).as_expr())
    assert a == b


def test_planted_root_vanishes():
    res = eliminate(build_system(2, 3, 1, "to-infinity"))
    # w0 = 1 solves w0^3 = 1 and w0^2 + c = 0 for c = -1
    assert res.P(Fraction(-1)) == 0
    assert res.P(Fraction(7, 5)) != 0


def test_zero_polynomial_flagged():
    S = build_system(2, 3, 1, "to-infinity")
    e = S.equations[0]
    degenerate = ChainSystem([e, e], S.kind, 1, 2, 3, S.ring, S.gens)
    assert eliminate(degenerate).zero


def test_res_var_constant_cases():
    S = build_system(2, 3, 1, "to-infinity")
    R = S.ring
    w0, cc = S.gens
    assert res_var(R(5), w0 ** 2 + cc, 0, R) == 25
    assert res_var(w0 - 2, w0 - 7, 0, R) == -5


def test_blowup_reports_degrees():
    with pytest.raises(EliminationBlowup) as exc:
        eliminate(build_system(2, 3, 2, "to-infinity"), cap=4)
    assert exc.value.degrees


def test_obstruction_generic_c():
    rep = periodicity_obstruction_test(2, 3, Fraction(7, 5), 2)
    assert rep["certified"]
    assert all(not r["vanishes"] and r["agree"] for r in rep["rows"])


def test_obstruction_planted_c():
    rep = periodicity_obstruction_test(2, 3, -1, 1)
    row = next(r for r in rep["rows"] if r["kind"] == "to-infinity")
    assert row["vanishes"] and row["numeric_chain"]
    assert not rep["certified"]


def test_obstruction_c_zero():
    rep = periodicity_obstruction_test(2, 3, 0, 1)
    cyc = next(r for r in rep["rows"] if r["kind"] == "cycle")
    # 0 is a fixed point of the family at c = 0
    assert cyc["vanishes"] and cyc["numeric_chain"]
    assert all(r["agree"] for r in rep["rows"])


@pytest.mark.parametrize("cval", [Fraction(2), Fraction(-3, 2), Fraction(1, 3)])
def test_exact_numeric_agreement(cval):
    for n in (1, 2):
        for kind in KINDS:
            P = eliminate(build_system(2, 3, n, kind)).P
            assert (P(cval) == 0) == numeric_chain_exists(2, 3, cval, n, kind)
