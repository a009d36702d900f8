"""Exact elimination for critical-orbit obstructions in the family

    z^d1 (w^d0 + 3w + 1) = w^d0 + c.

Chain systems in the unknowns w_0..w_{n-1} and the parameter c are reduced
to a single integer polynomial P(c) by iterated Sylvester resultants.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

from sympy import ZZ
from sympy.polys.rings import ring

from .corr1 import critical_family, find_chains
from .errors import BranchCap, EliminationBlowup
from .polyalg import INF, Poly, bareiss_det, is_inf, roots, sylvester_matrix

log = logging.getLogger(__name__)

KINDS = ("to-infinity", "cycle", "to-critical")
DEGREE_CAP = 5000


@dataclass
class ChainSystem:
    equations: list  # sympy PolyElements over ZZ[w_0..w_{n-1}, c]
    kind: str
    n: int
    d0: int
    d1: int
    ring: object = field(repr=False, default=None)
    gens: tuple = field(repr=False, default=())

    @property
    def c(self):
        return self.gens[-1]

    def w(self, i: int):
        return self.gens[i]

    def to_json(self) -> dict:
        return {"kind": self.kind, "n": self.n, "d0": self.d0, "d1": self.d1,
                "equations": [str(e.as_expr()) for e in self.equations]}


def build_system(d0: int, d1: int, n: int, kind: str) -> ChainSystem:
    """Equations E_0..E_n for a chain of length n of the given kind.

    to-infinity : w_0^d0 + c, link equations, w_{n-1}^d1 - 1
    cycle       : w_0^d0 + c, link equations, closing link from w_{n-1} to w_0
    to-critical : w_0^d0 + 3 w_0 + 1, link equations, w_{n-1}^d1 - 1
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if d0 < 2 or d1 < 1:
        raise ValueError("the system is set up for d0 >= 2 and d1 >= 1")
    names = ",".join([f"w{i}" for i in range(n)] + ["c"])
    R, *gens = ring(names, ZZ)
    ws, c = gens[:-1], gens[-1]

    def link(a, b):
        return a ** d1 * (b ** d0 + 3 * b + 1) - (b ** d0 + c)

    eqs = [ws[0] ** d0 + 3 * ws[0] + 1 if kind == "to-critical" else ws[0] ** d0 + c]
    for i in range(1, n):
        eqs.append(link(ws[i - 1], ws[i]))
    if kind == "cycle":
        eqs.append(link(ws[n - 1], ws[0]))
    else:
        eqs.append(ws[n - 1] ** d1 - 1)
    return ChainSystem(eqs, kind, n, d0, d1, R, tuple(gens))


def _coeffs_in(p, j: int, R) -> list:
    """Ascending coefficients of ``p`` as a polynomial in generator j."""
    by = {}
    for monom, coeff in p.terms():
        e = monom[j]
        rest = list(monom)
        rest[j] = 0
        by.setdefault(e, R.zero)
        by[e] = by[e] + R({tuple(rest): coeff})
    deg = max(by) if by else 0
    return [by.get(e, R.zero) for e in range(deg + 1)]


def res_var(p, q, j: int, R):
    """Res_{x_j}(p, q) via a fraction-free Sylvester determinant."""
    a = _coeffs_in(p, j, R)
    b = _coeffs_in(q, j, R)
    if len(a) == 1 or len(b) == 1:
        # a constant in x_j: Res = const^(deg other)
        if len(a) == 1 and len(b) == 1:
            return R.one
        if len(a) == 1:
            return a[0] ** (len(b) - 1)
        return b[0] ** (len(a) - 1)
    M = sylvester_matrix(a, b, R.zero)
    return bareiss_det(M, exquo=lambda x, y: x.exquo(y), one=R.one)


def _strip_content(p):
    if p == 0:
        return p, 1
    cont = 0
    for _, v in p.terms():
        cont = gcd(cont, int(v))
    if cont > 1:
        p = p.quo_ground(cont)
    return p, cont


@dataclass
class EliminationResult:
    P: Poly
    zero: bool
    degrees: list
    contents: list
    order: str

    def to_json(self) -> dict:
        return {"coeffs": [str(c) for c in self.P.coeffs], "degree": self.P.degree, "zero": self.zero,
                "degrees": self.degrees, "contents": self.contents, "order": self.order}


def _total_degree(p) -> int:
    return max((sum(m) for m in p.monoms()), default=0)


def _check(acc, degrees, cap):
    d = _total_degree(acc)
    degrees.append(d)
    if d > cap:
        raise EliminationBlowup(f"intermediate degree {d} exceeds cap {cap}", degrees=degrees)


def _predict(p, q, j) -> int:
    return _total_degree(p) * q.degree(j) + _total_degree(q) * p.degree(j)


def eliminate(system: ChainSystem, order: str = "forward", cap: int = DEGREE_CAP) -> EliminationResult:
    """Reduce the system to P(c) by iterated resultants with content removal.

    ``forward``: acc = Res_{w_{n-1}}(E_n, E_{n-1}), then Res_{w_j}(E_j, acc)
    for j = n-2..0.  ``reverse`` eliminates w_0 first and walks up the
    chain; for cycle systems w_0 sits in three equations and the closing
    equation is reduced against E_0 separately, which can only add roots.
    """
    R, eqs, n = system.ring, system.equations, system.n
    degrees, contents = [], []

    def step(p, q, j):
        if _predict(p, q, j) > cap:
            raise EliminationBlowup(f"predicted degree {_predict(p, q, j)} exceeds cap {cap}",
                                    degrees=degrees + [_predict(p, q, j)])
        r, cont = _strip_content(res_var(p, q, j, R))
        contents.append(cont)
        if cont > 1:
            log.info("removed integer content %d after eliminating w%d", cont, j)
        _check(r, degrees, cap)
        return r

    if order == "forward":
        acc = step(eqs[n], eqs[n - 1], n - 1)
        for j in range(n - 2, -1, -1):
            if acc == 0:
                break
            acc = step(eqs[j], acc, j)
    elif order == "reverse":
        if system.kind == "cycle" and n > 1:
            acc = step(eqs[0], eqs[1], 0)
            closing = step(eqs[0], eqs[n], 0)
            for j in range(1, n - 1):
                acc = step(acc, eqs[j + 1], j)
            acc = step(acc, closing, n - 1)
        else:
            acc = step(eqs[0], eqs[1], 0)
            for j in range(1, n):
                if acc == 0:
                    break
                acc = step(acc, eqs[j + 1], j)
    else:
        raise ValueError("order must be 'forward' or 'reverse'")
    cidx = len(system.gens) - 1
    parts = _coeffs_in(acc, cidx, R) if acc != 0 else [R.zero]
    coeffs = [Fraction(int(v.LC)) if v != 0 else Fraction(0) for v in parts]
    P = Poly(coeffs, "c", exact=True)
    if P.is_zero():
        log.warning("obstruction polynomial vanishes identically (%s, n=%d)", system.kind, n)
    return EliminationResult(P, P.is_zero(), degrees, contents, order)


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------


def _start_points(d0: int, c, kind: str) -> list:
    coeffs = [0] * (d0 + 1)
    coeffs[d0] = 1
    if kind == "to-critical":
        coeffs[0], coeffs[1] = 1, coeffs[1] + 3
    else:
        coeffs[0] = c
    return roots(Poly(coeffs, "w")).values()


def numeric_chain_exists(d0: int, d1: int, c, n: int, kind: str, tol: float = 1e-8,
                         cap_branches: int = 200_000) -> bool:
    """Search for a chain of the given kind with corr1.find_chains."""
    f = critical_family(d0, d1, c)
    for w0 in _start_points(d0, c, kind):
        if kind == "cycle":
            chains = find_chains(f, w0, n, require_cycle=True, tol_chain=tol, cap_branches=cap_branches)
            if any(not any(is_inf(p) for p in ch.points) for ch in chains):
                return True
        else:
            chains = find_chains(f, w0, n + 1, tol_chain=tol, cap_branches=cap_branches)
            if any(is_inf(ch.points[-1]) and not any(is_inf(p) for p in ch.points[:-1]) for ch in chains):
                return True
    return False


def periodicity_obstruction_test(d0: int, d1: int, c, n_max: int = 2, numeric: bool = True,
                                 cap: int = DEGREE_CAP) -> dict:
    """Evaluate P(c) exactly for every kind and n <= n_max, with an optional numeric cross-check."""
    c = Fraction(c)
    rows = []
    for n in range(1, n_max + 1):
        for kind in KINDS:
            res = eliminate(build_system(d0, d1, n, kind), cap=cap)
            val = res.P(c)
            row = {"n": n, "kind": kind, "P_degree": res.P.degree, "P_zero": res.zero,
                   "value": str(val), "vanishes": val == 0}
            if numeric:
                try:
                    row["numeric_chain"] = numeric_chain_exists(d0, d1, c, n, kind)
                except BranchCap:
                    row["numeric_chain"] = None
                row["agree"] = row["numeric_chain"] is None or row["numeric_chain"] == (val == 0)
            rows.append(row)
    certified = all(not r["vanishes"] for r in rows)
    return {"d0": d0, "d1": d1, "c": str(c), "n_max": n_max, "rows": rows,
            "verdict": "no chain certificate up to n_max" if certified else "obstruction vanishes",
            "certified": certified}
