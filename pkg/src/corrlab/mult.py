"""Multiplicity analysis of correspondences on P^1.

Local multiplicity ``rho`` is the largest root multiplicity of F(z*, .) over
base points z* where the fibre degenerates (discriminant and degree-drop
loci, plus z* = infinity).  The adjoint multiplicity ``delta`` is ``rho`` of
the transposed graph.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import NamedTuple, Sequence

import mpmath
import numpy as np
from scipy.optimize import linear_sum_assignment

from .corr1 import Corr1, adjoint, forward, iterate
from .errors import FitUnstable, InvalidGraph
from .polyalg import INF, discriminant, is_exact_number, is_inf, roots, roots_mp

MP_DPS = 60


class LocalMultiplicity(NamedTuple):
    rho: int
    witnesses: list  # (base point, fibre point, multiplicity)


def _mp_fiber(coeffs: list, d0: int):
    """Multiplicities of a high-precision fibre polynomial, degree drop at INF."""
    scale = max(abs(c) for c in coeffs)
    cut = scale * mpmath.mpf(10) ** (-(mpmath.mp.dps - 15))
    top = len(coeffs) - 1
    while top > 0 and abs(coeffs[top]) <= cut:
        top -= 1
    trimmed = coeffs[: top + 1]
    items = [(complex(v), m) for v, m in roots_mp(trimmed, mpmath.mp.dps)] if top > 0 else []
    if d0 - top > 0:
        items.append((INF, d0 - top))
    return items


def _candidate_bases_exact(F) -> list:
    polys = []
    if F.deg_w >= 2:
        disc = discriminant(F, "w")
        if disc.is_zero():
            raise InvalidGraph("graph polynomial is not square-free")
        if disc.degree > 0:
            polys.append(disc.squarefree_part())
    lc = F.leading_coefficient("w")
    if lc.degree > 0:
        polys.append(lc.squarefree_part())
    out = []
    for p in polys:
        out.extend(v for v, _ in roots_mp(list(p.coeffs), MP_DPS))
    return out


def local_multiplicity(f: Corr1) -> LocalMultiplicity:
    """Maximal multiplicity of the first projection restricted to the graph."""
    F = f.graph
    d0 = f.d0
    fibres = []
    if F.exact:
        with mpmath.workdps(MP_DPS):
            for z in _candidate_bases_exact(F):
                fibres.append((complex(z), _mp_fiber(F.fiber_w_mp(z), d0)))
    else:
        cands = []
        if F.deg_w >= 2:
            disc = discriminant(F, "w")
            if disc.degree > 0:
                cands.extend(roots(disc).values())
        lc = F.leading_coefficient("w")
        if lc.degree > 0:
            cands.extend(roots(lc).values())
        for z in cands:
            fibres.append((z, list(forward(f, z).points)))
    fibres.append((INF, list(forward(f, INF).points)))
    rho = 1
    witnesses = []
    for z, items in fibres:
        for w, m in items:
            if m >= 2:
                witnesses.append((z, w, m))
            rho = max(rho, m)
    witnesses.sort(key=lambda t: -t[2])
    return LocalMultiplicity(rho, witnesses)


def adjoint_multiplicity(f: Corr1) -> int:
    return local_multiplicity(adjoint(f)).rho


def kappa(k: int, q: int, rho: int) -> Fraction:
    """1 / (25 k (4 rho)^q)."""
    _check_kq(k, q)
    if rho < 1:
        raise ValueError("rho must be >= 1")
    return Fraction(1, 25 * k * (4 * rho) ** q)


def kappa_tilde(k: int, q: int, delta: int) -> Fraction:
    """1 / (25 k (4 delta)^(k - q + 1))."""
    _check_kq(k, q)
    if delta < 1:
        raise ValueError("delta must be >= 1")
    return Fraction(1, 25 * k * (4 * delta) ** (k - q + 1))


def _check_kq(k, q):
    if not (1 <= q <= k):
        raise ValueError(f"need 1 <= q <= k, got q={q}, k={k}")


@dataclass
class MultReport:
    rho: int
    delta: int
    kappa: Fraction
    kappa_tilde: Fraction
    witnesses: list = field(default_factory=list)

    def to_json(self) -> dict:
        def pt(v):
            return "inf" if is_inf(v) else [complex(v).real, complex(v).imag]

        return {
            "rho": self.rho,
            "delta": self.delta,
            "kappa": str(self.kappa),
            "kappa_tilde": str(self.kappa_tilde),
            "witnesses": [{"base": pt(z), "fiber": pt(w), "mult": m} for z, w, m in self.witnesses],
        }


def mult_report(f: Corr1, k: int = 1, q: int = 1) -> MultReport:
    lm = local_multiplicity(f)
    delta = adjoint_multiplicity(f)
    return MultReport(lm.rho, delta, kappa(k, q, lm.rho), kappa_tilde(k, q, delta), lm.witnesses)


def q_small_adjoint(f: Corr1 | None, dq, dqm1, k: int = 1, q: int = 1, delta: int | None = None) -> bool:
    """dq > dqm1 and 25k(4 delta)^(k-q+1) < dq/dqm1, compared exactly."""
    if delta is None:
        delta = adjoint_multiplicity(f)
    dq, dqm1 = Fraction(dq), Fraction(dqm1)
    if not dq > dqm1:
        return False
    return 1 / kappa_tilde(k, q, delta) < dq / dqm1


def small_multiplicity(
    f: Corr1 | None, ratio, N: int, k: int = 1, delta_F: int | None = None
) -> bool:
    """50k(4 delta(F))^(k+1) < ratio with delta(F) = delta(f^N) * delta(f^-N).

    ``ratio`` is (d1/d0)^N.  delta(f^-N) equals rho(f^N) because the inverse
    correspondence is the adjoint.
    """
    if delta_F is None:
        fN = iterate(f, N)
        delta_F = adjoint_multiplicity(fN) * local_multiplicity(fN).rho
    return 50 * k * (4 * delta_F) ** (k + 1) < Fraction(ratio)


# ---------------------------------------------------------------------------
# Collision detection
# ---------------------------------------------------------------------------


def _as_points(points) -> list[tuple]:
    pts = []
    for p in points:
        if isinstance(p, (list, tuple, np.ndarray)):
            pts.append(tuple(p))
        else:
            pts.append((p,))
    k = len(pts[0])
    if any(len(p) != k for p in pts):
        raise ValueError("all points need the same dimension")
    return pts


def phi_degree_bound(d: int, rho: int, k: int) -> int:
    return math.comb(d, rho) * (k * rho * (rho - 1) // 2 - 1)


def phi_collision(points: Sequence, rho: int, tol_phi: float = 1e-9) -> bool:
    """Detect a rho-subset of coinciding points through the polynomial phi(s).

    phi = prod_J phi_J over rho-subsets J, where
    phi_J(s) = prod_{i} prod_{j<h in J} (s - (y^i_j - y^i_h)) - s^(k rho(rho-1)/2).
    phi_J vanishes identically iff all points of J coincide.  phi has degree
    at most D, so it is evaluated at D+1 distinct sample values and declared
    zero when every evaluation vanishes.  Exact inputs (ints/Fractions) are
    evaluated exactly; floats use a relative threshold ``tol_phi``.
    """
    pts = _as_points(points)
    d, k = len(pts), len(pts[0])
    if not (d >= rho >= 2):
        raise ValueError("need d >= rho >= 2")
    npairs = k * rho * (rho - 1) // 2
    D = phi_degree_bound(d, rho, k)
    exact = all(is_exact_number(c) for p in pts for c in p)
    diffs = []
    for J in combinations(range(d), rho):
        diffs.append([pts[j][i] - pts[h][i] for i in range(k) for j, h in combinations(J, 2)])
    if exact:
        bound = max((abs(Fraction(x)) for ds in diffs for x in ds), default=Fraction(0))
        base = math.floor(bound) + 1
        for l in range(D + 1):
            s = Fraction(base + l)
            val = Fraction(1)
            for ds in diffs:
                prod = Fraction(1)
                for x in ds:
                    prod *= s - x
                val *= prod - s ** npairs
                if val == 0:
                    break
            if val != 0:
                return False
        return True
    arr = np.array(diffs, dtype=complex)  # (C(d, rho), npairs)
    R = 2.0 * float(np.max(np.abs(arr), initial=0.0)) + 1.0
    ss = R * np.exp(1j * (2 * np.pi * np.arange(D + 1) / (D + 1) + 0.1))
    for s in ss:
        rel = np.expm1(np.sum(np.log1p(-arr / s), axis=1))
        if not np.any(np.abs(rel) <= tol_phi):
            return False
    return True


def brute_force_collision(points: Sequence, rho: int, tol: float = 1e-9) -> bool:
    """Reference check: does some rho-subset consist of one repeated point?"""
    pts = _as_points(points)
    exact = all(is_exact_number(c) for p in pts for c in p)
    for J in combinations(range(len(pts)), rho):
        first = pts[J[0]]
        if exact:
            if all(pts[j] == first for j in J[1:]):
                return True
        elif all(max(abs(complex(a) - complex(b)) for a, b in zip(pts[j], first)) <= tol for j in J[1:]):
            return True
    return False


# ---------------------------------------------------------------------------
# Lojasiewicz exponent
# ---------------------------------------------------------------------------


@dataclass
class LojaFit:
    slope: float
    intercept: float
    r2: float
    radii: list
    distances: list

    def to_json(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "radii": list(map(float, self.radii)), "distances": list(map(float, self.distances))}


def _finite_multiset(rs) -> np.ndarray:
    vals = rs.multiset()
    if any(is_inf(v) for v in vals):
        raise ValueError("fibre contains the point at infinity; choose a base point in the affine chart")
    return np.array(vals, dtype=complex)


def loja_exponent(f: Corr1, z0, radii: Sequence[float] | None = None, n_angles: int = 8,
                  min_r2: float = 0.8) -> LojaFit:
    """Fit the exponent in dist(fibre(z), fibre(z0)) ~ C |z - z0|^slope.

    Fibres are matched by minimal-cost assignment and the largest matched
    distance is regressed against the base distance in log-log scale.
    """
    if radii is None:
        radii = np.geomspace(1e-2, 1e-7, 11)
    radii = np.asarray(radii, float)
    base = _finite_multiset(forward(f, z0))
    z0c = complex(z0)
    angles = 2 * np.pi * (np.arange(n_angles) + 0.37) / n_angles
    dists = []
    for r in radii:
        worst = 0.0
        for t in angles:
            fib = _finite_multiset(forward(f, z0c + r * np.exp(1j * t)))
            cost = np.abs(fib[:, None] - base[None, :])
            i, j = linear_sum_assignment(cost)
            worst = max(worst, float(cost[i, j].max()))
        dists.append(worst)
    x = np.log(radii)
    y = np.log(np.maximum(dists, 1e-300))
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ np.array([slope, intercept])
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    fit = LojaFit(float(slope), float(intercept), r2, list(radii), dists)
    if r2 < min_r2:
        raise FitUnstable(f"log-log fit has R^2 = {r2:.3f} < {min_r2}", data=fit)
    return fit
