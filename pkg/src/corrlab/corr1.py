"""Holomorphic correspondences on the Riemann sphere given by a graph F(z, w) = 0.

``forward(f, z)`` returns the multiset f(z) = {w : F(z, w) = 0} and
``backward(f, w)`` the multiset f^{-1}(w).  When F(z, .) loses degree at a
base point, the missing roots are reported at ``INF`` with the size of the
drop as multiplicity.
"""
from __future__ import annotations

import cmath
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    BranchCap,
    DegenerateFiber,
    DegenerateLeadingCoefficient,
    ExtraneousFactorUnresolved,
    InvalidGraph,
)
from .polyalg import (
    INF,
    BiPoly,
    Poly,
    RootSet,
    bipoly_squarefree,
    compose_resultant,
    discriminant,
    is_exact_number,
    is_inf,
    make_rootset,
    resultant,
    roots,
)

log = logging.getLogger(__name__)

DROP_TOL = 1e-12


@dataclass(frozen=True)
class Corr1:
    """A correspondence on P^1 with graph ``F(z, w) = 0``.

    ``d0 = deg_w F`` counts forward images and ``d1 = deg_z F`` counts
    preimages.  ``raw`` keeps an unreduced graph (e.g. a composition
    resultant) and ``removed`` the factors dropped by square-free reduction.
    """

    graph: BiPoly
    raw: BiPoly | None = field(default=None, compare=False)
    removed: tuple = field(default=(), compare=False)

    @property
    def d0(self) -> int:
        return self.graph.deg_w

    @property
    def d1(self) -> int:
        return self.graph.deg_z

    @property
    def bidegree(self) -> tuple[int, int]:
        return self.d0, self.d1

    @property
    def exact(self) -> bool:
        return self.graph.exact

    def to_json(self) -> dict:
        data = self.graph.to_json()
        data["bidegree"] = [self.d0, self.d1]
        return data

    @classmethod
    def from_json(cls, data: dict, validate_graph: bool = True) -> "Corr1":
        f = make_corr(BiPoly.from_json(data), validate_graph=validate_graph)
        declared = data.get("bidegree")
        if declared is not None and tuple(declared) != f.bidegree:
            raise InvalidGraph(f"declared bidegree {tuple(declared)} != computed {f.bidegree}")
        return f


def _content_has_root(polys: list[Poly]) -> bool:
    """True when the nonzero polynomials share a common root (exact gcd)."""
    polys = [p for p in polys if not p.is_zero()]
    if not polys:
        return True
    g = polys[0]
    for p in polys[1:]:
        g = g.gcd(p)
        if g.degree <= 0:
            return False
    return g.degree > 0


def _numeric_common_root(polys: list[Poly], tol: float = 1e-8) -> bool:
    polys = [p for p in polys if not p.is_zero()]
    base = min(polys, key=lambda p: p.degree)
    if base.degree <= 0:
        return False
    for v in roots(base).values():
        if all(abs(p(v)) <= tol * max(1.0, p.scale()) * max(1.0, abs(v)) ** p.degree for p in polys):
            return True
    return False


def validate(F: BiPoly) -> None:
    """Reject graphs that contain a fibre of a projection or a repeated factor."""
    if F.is_zero():
        raise InvalidGraph("zero graph polynomial")
    if F.deg_z < 1 or F.deg_w < 1:
        raise InvalidGraph("graph must depend on both variables")
    cols = [Poly(list(F.coeffs[:, j]), "z", exact=F.exact) for j in range(F.coeffs.shape[1])]
    rows = [Poly(list(F.coeffs[i, :]), "w", exact=F.exact) for i in range(F.coeffs.shape[0])]
    common = _content_has_root if F.exact else _numeric_common_root
    if common(cols):
        raise InvalidGraph("graph contains a fibre {z = const} (factor in z only)")
    if common(rows):
        raise InvalidGraph("graph contains a fibre {w = const} (factor in w only)")
    if F.deg_w >= 2:
        if F.exact:
            if discriminant(F, "w").is_zero():
                raise InvalidGraph("graph polynomial is not square-free")
        else:
            rng = np.random.default_rng(0)
            z0 = complex(*rng.normal(size=2))
            fib = F.fiber_w(z0)
            rs = roots(fib)
            if rs.total != fib.degree or rs.max_multiplicity() > 1:
                raise InvalidGraph("graph polynomial is not square-free (repeated branch at a random base point)")


def make_corr(F: BiPoly | str, validate_graph: bool = True) -> Corr1:
    if isinstance(F, str):
        F = BiPoly.from_expr(F)
    if F.exact:
        F = F.primitive()
    if validate_graph:
        validate(F)
    return Corr1(F)


def critical_family(d0: int, d1: int, c) -> Corr1:
    """Graph z^{d1}(w^{d0} + 3w + 1) - (w^{d0} + c) of the critical-orbit family."""
    if d0 < 1 or d1 < 1:
        raise ValueError("d0, d1 must be positive")
    exact = is_exact_number(c)
    c = Fraction(c) if exact else complex(c)
    terms: dict[tuple[int, int], object] = {}

    def add(i, j, v):
        terms[(i, j)] = terms.get((i, j), 0) + v

    add(d1, d0, 1)
    add(d1, 1, 3)
    add(d1, 0, 1)
    add(0, d0, -1)
    add(0, 0, -c)
    if not exact:
        terms = {k: complex(v) for k, v in terms.items()}
    return make_corr(BiPoly.from_terms(terms, exact=exact))


# ---------------------------------------------------------------------------
# Images and preimages
# ---------------------------------------------------------------------------


def _fiber_roots(p: Poly, full_degree: int, precision=None) -> RootSet:
    if p.is_zero():
        raise DegenerateFiber("fibre polynomial vanishes identically")
    if not p.exact:
        a = p.as_array()
        cut = DROP_TOL * np.max(np.abs(a))
        nz = np.nonzero(np.abs(a) > cut)[0]
        p = Poly(a[: nz[-1] + 1], p.var, exact=False)
    rs = roots(p, precision)
    drop = full_degree - p.degree
    if drop > 0:
        return make_rootset(list(rs.points) + [(INF, drop)])
    return rs


def forward(f: Corr1, z, precision=None) -> RootSet:
    """Multiset f(z), degree drops reported at ``INF``."""
    return _fiber_roots(f.graph.fiber_w(z), f.d0, precision)


def backward(f: Corr1, w, precision=None) -> RootSet:
    """Multiset f^{-1}(w)."""
    return _fiber_roots(f.graph.fiber_z(w), f.d1, precision)


def adjoint(f: Corr1) -> Corr1:
    return Corr1(f.graph.transpose())


def compose(f: Corr1, g: Corr1) -> Corr1:
    """Graph of f o g: Res_y(G(x, y), F(y, z)), reduced.

    The raw resultant is kept on the result; factors removed by square-free
    reduction are logged and stored in ``removed``.
    """
    raw = compose_resultant(g.graph, f.graph)
    if raw.is_zero():
        raise ExtraneousFactorUnresolved("composition resultant vanishes identically")
    expected = (f.d0 * g.d0, f.d1 * g.d1)
    if (raw.deg_w, raw.deg_z) != expected:
        log.info("composition raw bidegree %s differs from expected %s", (raw.deg_w, raw.deg_z), expected)
    if raw.exact:
        reduced, removed = bipoly_squarefree(raw)
        for fac, mult in removed:
            log.info("composition: removed repeated factor of bidegree (%d, %d) with multiplicity %d",
                     fac.deg_w, fac.deg_z, mult)
    else:
        reduced, removed = raw.normalized(), []
    return Corr1(reduced, raw=raw, removed=tuple(removed))


def iterate(f: Corr1, n: int) -> Corr1:
    """n-fold composition f o ... o f; n = 0 gives the identity graph w - z."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return Corr1(BiPoly.from_terms({(0, 1): 1, (1, 0): -1}, exact=True))
    g = f
    for _ in range(n - 1):
        g = compose(f, g) if g.d0 + f.d1 <= f.d0 + g.d1 else compose(g, f)
    return g


def critical_values(f: Corr1, side: str = "pi2", precision=None) -> RootSet:
    """Critical values of the correspondence.

    ``side="pi2"`` (default) returns the w-coordinates of ramification points
    of the second projection on the graph: roots in w of the square-free part
    of Res_z(F, dF/dz).  ``side="pi1"`` returns the analogous z-coordinates of
    ramification of the first projection, i.e. roots of Res_w(F, dF/dw).
    """
    F = f.graph if side == "pi2" else f.graph.transpose()
    if F.deg_z < 2:
        return RootSet(())
    r = resultant(F, F.diff("z"), "z")
    if r.is_zero():
        raise DegenerateLeadingCoefficient("critical resultant vanishes identically")
    if r.degree <= 0:
        return RootSet(())
    if r.exact:
        r = r.squarefree_part()
        return make_rootset((v, 1) for v in roots(r, precision).values())
    return make_rootset((v, 1) for v in roots(r, precision).values())


# ---------------------------------------------------------------------------
# Chains and cycles
# ---------------------------------------------------------------------------


@dataclass
class Chain:
    """Orbit segment w_0, ..., w_{n-1} with w_i in f(w_{i-1})."""

    points: list
    is_cycle: bool
    residuals: list[float]

    def to_json(self) -> dict:
        pts = ["inf" if is_inf(p) else [complex(p).real, complex(p).imag] for p in self.points]
        return {"points": pts, "is_cycle": self.is_cycle, "residuals": self.residuals}


def _homog_residual(F: BiPoly, z, w) -> tuple[float, float]:
    """|F| at (z, w) in the chart containing the point, with its absolute scale."""
    C = F.complex_array()
    if is_inf(z):
        C = C[::-1, :]
        z = 0j
    if is_inf(w):
        C = C[:, ::-1]
        w = 0j
    z, w = complex(z), complex(w)
    zp = np.power(z, np.arange(C.shape[0]))
    wp = np.power(w, np.arange(C.shape[1]))
    val = abs(zp @ C @ wp)
    scale = float(np.abs(zp) @ np.abs(C) @ np.abs(wp))
    return val, max(scale, 1e-300)


def graph_residual(f: Corr1, z, w) -> float:
    """Relative residual |F(z, w)| / (sum |c_ij| |z|^i |w|^j), chart-aware."""
    val, scale = _homog_residual(f.graph, z, w)
    return val / scale


def _newton_refine(f: Corr1, pts: list, closing: bool) -> list:
    """One Gauss–Newton step on the stacked chain equations, w_0 held fixed."""
    if any(is_inf(p) for p in pts) or len(pts) < 2:
        return pts
    C = f.graph.complex_array()
    Fz = f.graph.diff("z").complex_array() if f.graph.deg_z >= 1 else np.zeros((1, 1))
    Fw = f.graph.diff("w").complex_array() if f.graph.deg_w >= 1 else np.zeros((1, 1))

    def ev(A, z, w):
        return np.power(z, np.arange(A.shape[0])) @ A @ np.power(w, np.arange(A.shape[1]))

    x = np.array(pts, dtype=complex)
    n = len(x)
    eqs = [(i - 1, i) for i in range(1, n)]
    if closing:
        eqs.append((n - 1, 0))
    res = np.array([ev(C, x[a], x[b]) for a, b in eqs])
    J = np.zeros((len(eqs), n - 1), complex)
    for r, (a, b) in enumerate(eqs):
        if a >= 1:
            J[r, a - 1] += ev(Fz, x[a], x[b])
        if b >= 1:
            J[r, b - 1] += ev(Fw, x[a], x[b])
    step, *_ = np.linalg.lstsq(J, -res, rcond=None)
    if not np.all(np.isfinite(step)):
        return pts
    new = x.copy()
    new[1:] += step
    old_err = np.max(np.abs(res))
    new_err = max(abs(ev(C, new[a], new[b])) for a, b in eqs)
    return list(new) if new_err <= old_err else pts


def _same_point(a, b, tol: float) -> bool:
    if is_inf(a) or is_inf(b):
        return is_inf(a) and is_inf(b)
    return abs(complex(a) - complex(b)) <= tol * max(1.0, abs(complex(a)))


def find_chains(
    f: Corr1,
    w0,
    n: int,
    require_cycle: bool = False,
    tol_chain: float = 1e-8,
    cap_branches: int = 100_000,
    precision=None,
) -> list[Chain]:
    """Depth-first enumeration of chains (w_0, ..., w_{n-1}) with w_i in f(w_{i-1}).

    With ``require_cycle`` the closing relation w_0 in f(w_{n-1}) must also
    hold.  Distinct branch points are explored once each.  Raises
    ``BranchCap`` (carrying the partial result) when more than
    ``cap_branches`` nodes would be visited.
    """
    if n < 1:
        raise ValueError("chain length must be >= 1")
    found: list[Chain] = []
    nodes = 0

    def accept(pts):
        refined = _newton_refine(f, pts, require_cycle)
        steps = [(refined[i - 1], refined[i]) for i in range(1, len(refined))]
        if require_cycle:
            steps.append((refined[-1], refined[0]))
        res = [graph_residual(f, a, b) for a, b in steps]
        if all(r <= tol_chain for r in res):
            found.append(Chain(points=refined, is_cycle=require_cycle, residuals=res))

    def closes(last) -> bool:
        return any(_same_point(v, w0, 1e-6) for v in forward(f, last, precision).values())

    stack = [[w0]]
    while stack:
        pts = stack.pop()
        nodes += 1
        if nodes > cap_branches:
            raise BranchCap(f"chain enumeration exceeded {cap_branches} nodes", partial=found, nodes=nodes)
        if len(pts) == n:
            if not require_cycle or closes(pts[-1]):
                accept(pts)
            continue
        nxt = forward(f, pts[-1], precision).values()
        for v in reversed(nxt):
            stack.append(pts + [v])
    return found


def random_corr(d0: int, d1: int, rng: np.random.Generator, exact: bool = True, bound: int = 5) -> Corr1:
    """Random dense graph of bidegree (d0, d1), retried until valid."""
    for _ in range(100):
        if exact:
            C = rng.integers(-bound, bound + 1, size=(d1 + 1, d0 + 1)).astype(object)
            C = np.vectorize(int, otypes=[object])(C)
        else:
            C = rng.normal(size=(d1 + 1, d0 + 1)) + 1j * rng.normal(size=(d1 + 1, d0 + 1))
        if any(C[-1, :]) and any(C[:, -1]):
            F = BiPoly(C, exact=exact)
            if F.deg_z != d1 or F.deg_w != d0:
                continue
            try:
                return make_corr(F)
            except InvalidGraph:
                continue
    raise RuntimeError("could not draw a valid random correspondence")


def unit_point(rng: np.random.Generator, radius: float = 2.0) -> complex:
    r = radius * np.sqrt(rng.random())
    return complex(r * cmath.exp(2j * np.pi * rng.random()))


def multiset_match(a: Sequence, b: Sequence, tol: float) -> bool:
    """Compare two multisets of (possibly infinite) points by optimal assignment."""
    from scipy.optimize import linear_sum_assignment

    if len(a) != len(b):
        return False
    ai = [x for x in a if is_inf(x)]
    bi = [x for x in b if is_inf(x)]
    if len(ai) != len(bi):
        return False
    af = np.array([complex(x) for x in a if not is_inf(x)])
    bf = np.array([complex(x) for x in b if not is_inf(x)])
    if len(af) == 0:
        return True
    cost = np.abs(af[:, None] - bf[None, :]) / np.maximum(1.0, np.abs(af[:, None]))
    r, c = linear_sum_assignment(cost)
    return bool(np.max(cost[r, c]) <= tol)
