"""k-fold symmetric products of correspondences on P^1.

pi : (P^1)^k -> P^k sends ([x_l : y_l])_l to the coefficients of
prod_l (x_l T + y_l), highest power of T first.  Points of P^1 are given
either as homogeneous pairs (x, y) or as affine values z = x / y with
``INF`` for (1, 0).
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement, permutations, product
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .cohomlin import DegreeProfile, degrees_sym_product
from .corr1 import Corr1, backward, critical_values, forward
from .mult import adjoint_multiplicity
from .polyalg import INF, Poly, is_exact_number, is_inf, roots


def homog(p) -> tuple:
    """Homogeneous pair for a point given as (x, y) or as an affine value."""
    if isinstance(p, tuple) and len(p) == 2:
        return p
    if is_inf(p):
        return (1, 0)
    return (p, 1)


def pi_map(points: Sequence) -> tuple:
    """Elementary symmetric coordinates (eta_0, ..., eta_k).

    eta_j sums prod_l x_l^{i_l} y_l^{1 - i_l} over {0,1}-vectors with
    sum i_l = k - j.  Exact inputs stay exact.
    """
    pts = [homog(p) for p in points]
    exact = all(is_exact_number(c) for p in pts for c in p)
    if exact:
        acc = [Fraction(1)]
        for x, y in pts:
            x, y = Fraction(x), Fraction(y)
            nxt = [Fraction(0)] * (len(acc) + 1)
            for i, a in enumerate(acc):
                nxt[i] += a * x
                nxt[i + 1] += a * y
            acc = nxt
        return tuple(acc)
    acc = np.array([1.0 + 0j])
    for x, y in pts:
        acc = np.convolve(acc, np.array([complex(x), complex(y)]))
    return tuple(acc)


def proj_equal_exact(a: Sequence, b: Sequence) -> bool:
    """Exact equality of projective points: all 2x2 minors vanish."""
    if len(a) != len(b):
        return False
    return all(a[i] * b[j] == a[j] * b[i] for i in range(len(a)) for j in range(i + 1, len(a)))


def normalize(v) -> np.ndarray:
    """Unit vector with the largest-modulus coordinate made real positive."""
    v = np.asarray(v, dtype=complex)
    i = int(np.argmax(np.abs(v)))
    if v[i] == 0:
        raise ValueError("zero vector is not a projective point")
    v = v / v[i]
    return v / np.linalg.norm(v)


def chordal(a, b) -> float:
    """Fubini-Study chordal distance between two projective points."""
    u, v = normalize(a), normalize(b)
    # |u ^ v|, stable for nearby points unlike sqrt(1 - |<u, v>|^2)
    W = np.outer(u, v) - np.outer(v, u)
    return float(np.linalg.norm(W) / math.sqrt(2.0))


def pi_fiber(eta: Sequence, precision=None) -> list[tuple]:
    """All ordered k-tuples of affine points (INF allowed) mapping to eta.

    The roots T_l of sum_j eta_j T^(k-j) give points z_l = -1/T_l; a
    vanishing top coefficient contributes z = 0 and T = 0 gives INF.
    Orderings of repeated points are listed once.
    """
    k = len(eta) - 1
    asc = list(reversed(list(eta)))
    exact = all(is_exact_number(c) for c in asc)
    p = Poly(asc, "T", exact=exact)
    if p.is_zero():
        raise ValueError("zero vector is not a projective point")
    rs = roots(p, precision)
    pts = []
    for t, m in rs.points:
        z = INF if (not is_inf(t) and t == 0) else (0j if is_inf(t) else -1 / complex(t))
        pts.extend([z] * m)
    pts.extend([0j] * (k - p.degree))
    seen, out = set(), []
    for perm in permutations(range(k)):
        key = tuple(_key(pts[i]) for i in perm)
        if key not in seen:
            seen.add(key)
            out.append(tuple(pts[i] for i in perm))
    return out


def _key(z, digits: int = 9):
    if is_inf(z):
        return ("inf",)
    z = complex(z)
    return (round(z.real, digits), round(z.imag, digits))


def fiber_cardinality(eta: Sequence) -> int:
    return len(pi_fiber(eta))


def induced_degrees(d0: int, d1: int, k: int) -> DegreeProfile:
    return degrees_sym_product(d0, d1, k)


def product_delta(delta_h: int, k: int) -> int:
    """Adjoint multiplicity of (h, ..., h), taken factor-wise."""
    return delta_h ** k


def delta_product_bound(delta_hat: int, k: int) -> int:
    """k! * delta_hat bounds the adjoint multiplicity of the symmetric product."""
    return math.factorial(k) * delta_hat


# ---------------------------------------------------------------------------
# Dual-path semiconjugacy
# ---------------------------------------------------------------------------


def _match_cost(A: list, B: list) -> float:
    if len(A) != len(B):
        return math.inf
    if not A:
        return 0.0
    cost = np.array([[chordal(a, b) for b in B] for a in A])
    i, j = linear_sum_assignment(cost)
    return float(cost[i, j].max())


def image_direct(h: Corr1, x: Sequence) -> list:
    """pi of every tuple (w_1..w_k) with w_i in h(x_i), with multiplicity."""
    fibres = [forward(h, z).multiset() for z in x]
    return [pi_map(w) for w in product(*fibres)]


def image_through_pi(h: Corr1, X: Sequence) -> list:
    """f(X) evaluated from the projective point X: lift X through pi, then map."""
    lift = pi_fiber(X)[-1]
    return image_direct(h, lift)


@dataclass
class SemiconjugacyReport:
    residuals: list
    max_residual: float
    ok: bool

    def to_json(self) -> dict:
        return {"max_residual": self.max_residual, "ok": self.ok, "samples": len(self.residuals)}


def semiconjugacy_check(h: Corr1, k: int, samples: int | Sequence = 100, rng=None, tol: float = 1e-9
                        ) -> SemiconjugacyReport:
    """Compare pi(f_hat(x)) with f(pi(x)) computed from a recomputed lift of pi(x)."""
    if isinstance(samples, int):
        rng = np.random.default_rng(0) if rng is None else rng
        xs = [tuple(complex(v) for v in rng.normal(size=k) + 1j * rng.normal(size=k)) for _ in range(samples)]
    else:
        xs = [tuple(s) for s in samples]
    res = []
    for x in xs:
        A = image_direct(h, x)
        B = image_through_pi(h, pi_map(x))
        res.append(_match_cost(A, B))
    worst = max(res) if res else 0.0
    return SemiconjugacyReport(res, worst, worst <= tol)


# ---------------------------------------------------------------------------
# Sampled adjoint multiplicity
# ---------------------------------------------------------------------------


def _preimage_counts(h: Corr1, w: Sequence, k: int, tol: float) -> int:
    """Largest multiplicity among points of f^-1(pi(w)), counted over all orderings of w."""
    clusters: list[list] = []  # [normalized point, count]
    for perm in permutations(range(k)):
        fibres = [backward(h, w[i]).points for i in perm]
        for combo in product(*fibres):
            pts = [z for z, _ in combo]
            m = math.prod(mm for _, mm in combo)
            Z = pi_map(pts)
            for c in clusters:
                if chordal(c[0], Z) <= tol:
                    c[1] += m
                    break
            else:
                clusters.append([Z, m])
    best = max(c[1] for c in clusters)
    return best // math.factorial(k) if best % math.factorial(k) == 0 else -(-best // math.factorial(k))


def sampled_delta(h: Corr1, k: int, tol: float = 1e-6, extra: Sequence = ()) -> int:
    """Multiplicity of the second projection sampled at critical configurations.

    Targets are k-tuples drawn (with repetition) from the critical values of
    h together with ``extra`` points.
    """
    crit = list(critical_values(h).values()) + list(extra)
    if not crit:
        crit = [0.3 + 0.1j]
    best = 1
    for w in combinations_with_replacement(crit, k):
        best = max(best, _preimage_counts(h, w, k, tol))
    return best


# ---------------------------------------------------------------------------
# Induced endomorphisms G_i
# ---------------------------------------------------------------------------


def _monomials(k: int, d: int) -> list[tuple]:
    out = []
    for combo in combinations_with_replacement(range(k + 1), d):
        c = Counter(combo)
        out.append(tuple(c.get(i, 0) for i in range(k + 1)))
    return out


def _eval_rational(g: tuple, z: complex) -> tuple:
    num, den = g
    d = max(len(num), len(den)) - 1
    n = sum(complex(c) * z ** i for i, c in enumerate(num))
    m = sum(complex(c) * z ** i for i, c in enumerate(den))
    return (n, m), d


def _apply(g: tuple, x: Sequence) -> tuple:
    return pi_map([_eval_rational(g, complex(z))[0] for z in x])


@dataclass
class InducedMap:
    """Homogeneous map of P^k given by degree-d polynomials in eta."""

    monomials: list
    coeffs: np.ndarray  # (len(monomials), k + 1)
    degree: int
    fit_residual: float

    def __call__(self, eta: Sequence) -> np.ndarray:
        e = np.asarray(eta, dtype=complex)
        row = np.array([np.prod(e ** np.array(a)) for a in self.monomials])
        return row @ self.coeffs


def fit_induced_map(g: tuple, k: int, n_samples: int | None = None, seed: int = 0) -> InducedMap:
    """Least-squares fit of G with pi o (g, ..., g) = G o pi.

    ``g`` is (numerator, denominator) ascending coefficient lists of a
    rational map of P^1; the affine representatives (z, 1) fix the scaling.
    """
    d = max(len(g[0]), len(g[1])) - 1
    mons = _monomials(k, d)
    n = n_samples or 4 * len(mons) + 20
    rng = np.random.default_rng(seed)
    rows, rhs = [], []
    for _ in range(n):
        x = rng.normal(size=k) + 1j * rng.normal(size=k)
        eta = np.asarray(pi_map(list(x)), dtype=complex)
        rows.append([np.prod(eta ** np.array(a)) for a in mons])
        rhs.append(np.asarray(_apply(g, x), dtype=complex))
    A, B = np.array(rows), np.array(rhs)
    coef, *_ = np.linalg.lstsq(A, B, rcond=None)
    resid = float(np.max(np.abs(A @ coef - B)) / max(np.max(np.abs(B)), 1e-300))
    return InducedMap(mons, coef, d, resid)


def graph_relation_check(h: Corr1, g0: tuple, g1: tuple, k: int, samples: int = 100, seed: int = 1) -> dict:
    """Sample (Z, W) on the graph of the symmetric product and test G0(Z) ~ G1(W)."""
    G0, G1 = fit_induced_map(g0, k), fit_induced_map(g1, k)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        z = list(rng.normal(size=k) + 1j * rng.normal(size=k))
        ws = [forward(h, zz).values() for zz in z]
        w = [ws_i[rng.integers(0, len(ws_i))] for ws_i in ws]
        if any(is_inf(v) for v in w):
            continue
        worst = max(worst, chordal(G0(pi_map(z)), G1(pi_map(w))))
    return {"max_residual": worst, "fit_residuals": [G0.fit_residual, G1.fit_residual],
            "degrees": [G0.degree, G1.degree]}
