"""Polynomial substrate: evaluation, roots with multiplicity, Sylvester
resultants and discriminants.

Two coefficient domains are supported throughout:

* ``exact``: Python ``int``/``Fraction`` coefficients, arbitrary precision;
* ``complex``: ``numpy.complex128`` coefficients.

``Poly`` stores coefficients in ascending order, ``coeffs[i]`` multiplies
``var**i``.  ``BiPoly`` stores a matrix ``c[i, j]`` multiplying
``z**i * w**j``.  Points at infinity are represented by :data:`INF`.
"""
from __future__ import annotations

import cmath
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .errors import DegenerateLeadingCoefficient, NonConvergence, ZeroPolynomial

INF = complex("inf")
EPS = np.finfo(float).eps

TOL_CLUSTER = 1e-7
_LADDER = (1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 5e-2)
EXTENDED_DPS = 50


def precision_tier() -> str:
    """Current float tier from ``CORRLAB_PRECISION`` (``double`` or ``extended``)."""
    tier = os.environ.get("CORRLAB_PRECISION", "double").strip().lower()
    if tier not in ("double", "extended"):
        raise ValueError(f"CORRLAB_PRECISION must be 'double' or 'extended', got {tier!r}")
    return tier


def is_inf(z) -> bool:
    if isinstance(z, (int, Fraction)):
        return False
    try:
        return cmath.isinf(complex(z))
    except TypeError:
        return False


def is_exact_number(x) -> bool:
    return isinstance(x, (int, Fraction, np.integer)) and not isinstance(x, bool)


def to_exact(x) -> Fraction:
    if isinstance(x, np.integer):
        return Fraction(int(x))
    return Fraction(x)


def parse_exact(s: str) -> Fraction:
    return Fraction(s.strip())


# ---------------------------------------------------------------------------
# Univariate polynomials
# ---------------------------------------------------------------------------


class Poly:
    """Univariate polynomial, immutable.

    Parameters
    ----------
    coeffs : sequence
        Coefficients in ascending degree order.
    var : str
        Variable tag, informational only.
    exact : bool, optional
        Force the domain.  By default a polynomial is exact when every
        coefficient is an ``int`` or ``Fraction``.
    """

    __slots__ = ("coeffs", "var", "exact")

    def __init__(self, coeffs: Iterable, var: str = "x", exact: bool | None = None):
        vals = list(coeffs)
        if exact is None:
            exact = all(is_exact_number(c) for c in vals)
        if exact:
            cs = [to_exact(c) for c in vals] or [Fraction(0)]
            while len(cs) > 1 and cs[-1] == 0:
                cs.pop()
            self.coeffs = tuple(cs)
        else:
            arr = np.array([complex(c) for c in vals] or [0j], dtype=complex)
            nz = np.nonzero(arr)[0]
            arr = arr[: nz[-1] + 1] if len(nz) else arr[:1] * 0
            arr.setflags(write=False)
            self.coeffs = arr
        self.var = var
        self.exact = bool(exact)

    # -- basic properties -------------------------------------------------
    @property
    def degree(self) -> int:
        return -1 if self.is_zero() else len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 0

    @property
    def lc(self):
        return self.coeffs[-1]

    def scale(self) -> float:
        return float(max(abs(complex(c)) for c in self.coeffs))

    def __len__(self):
        return len(self.coeffs)

    def __repr__(self):
        dom = "exact" if self.exact else "complex"
        cs = [str(c) for c in self.coeffs] if self.exact else [repr(complex(c)) for c in self.coeffs]
        return f"Poly([{', '.join(cs)}], var={self.var!r}, {dom})"

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        if self.exact and other.exact:
            return self.coeffs == other.coeffs
        return len(self.coeffs) == len(other.coeffs) and bool(
            np.all(np.asarray(self.coeffs, complex) == np.asarray(other.coeffs, complex))
        )

    def __hash__(self):
        return hash((self.exact, tuple(complex(c) for c in self.coeffs)))

    # -- conversions ------------------------------------------------------
    def to_complex(self) -> "Poly":
        if not self.exact:
            return self
        return Poly([complex(c) for c in self.coeffs], self.var, exact=False)

    def as_array(self) -> np.ndarray:
        return np.array([complex(c) for c in self.coeffs], dtype=complex)

    def primitive(self) -> "Poly":
        """Content-reduced, sign-normalized integer polynomial (exact only)."""
        if not self.exact:
            raise TypeError("primitive() needs an exact polynomial")
        if self.is_zero():
            return self
        den = reduce(math.lcm, (c.denominator for c in self.coeffs), 1)
        ints = [int(c * den) for c in self.coeffs]
        g = reduce(math.gcd, ints, 0)
        if ints[-1] < 0:
            g = -g
        return Poly([Fraction(v // g) for v in ints], self.var, exact=True)

    def monic(self) -> "Poly":
        lc = self.lc
        if self.exact:
            return Poly([c / lc for c in self.coeffs], self.var, exact=True)
        return Poly(np.asarray(self.coeffs) / lc, self.var, exact=False)

    # -- evaluation -------------------------------------------------------
    def __call__(self, x):
        if isinstance(x, np.ndarray):
            return polyval_asc(self.as_array(), x)
        if self.exact and is_exact_number(x):
            x = to_exact(x)
            acc = Fraction(0)
            for c in reversed(self.coeffs):
                acc = acc * x + c
            return acc
        x = complex(x) if not isinstance(x, (mpmath.mpc, mpmath.mpf)) else x
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + (complex(c) if not isinstance(x, (mpmath.mpc, mpmath.mpf)) else _mp(c))
        return acc

    def log_abs(self, z) -> np.ndarray:
        """log|p(z)| evaluated without overflow for large degree or |z|.

        Zero roots are split off exactly; for |z| > 1 the reversed polynomial
        is evaluated at 1/z.
        """
        z = np.asarray(z, dtype=complex)
        a = self.as_array()
        if self.is_zero():
            return np.full(z.shape, -np.inf)
        k = int(np.nonzero(a)[0][0])
        a = a[k:]
        n = len(a) - 1
        with np.errstate(divide="ignore", invalid="ignore"):
            absz = np.abs(z)
            out = k * np.log(absz) if k else np.zeros(z.shape)
            inner = absz <= 1
            res = np.empty(z.shape)
            if np.any(inner):
                res[inner] = np.log(np.abs(polyval_asc(a, z[inner])))
            outer = ~inner
            if np.any(outer):
                zo = z[outer]
                res[outer] = n * np.log(np.abs(zo)) + np.log(np.abs(polyval_asc(a[::-1], 1.0 / zo)))
            return out + res

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            return other
        return Poly([other], self.var)

    def _combine_exact(self, other: "Poly") -> bool:
        return self.exact and other.exact

    def __add__(self, other):
        other = self._coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        if self._combine_exact(other):
            a = list(self.coeffs) + [Fraction(0)] * (n - len(self.coeffs))
            b = list(other.coeffs) + [Fraction(0)] * (n - len(other.coeffs))
            return Poly([x + y for x, y in zip(a, b)], self.var, exact=True)
        a = np.zeros(n, complex)
        a[: len(self.coeffs)] += self.as_array()
        a[: len(other.coeffs)] += other.as_array()
        return Poly(a, self.var, exact=False)

    __radd__ = __add__

    def __neg__(self):
        if self.exact:
            return Poly([-c for c in self.coeffs], self.var, exact=True)
        return Poly(-self.as_array(), self.var, exact=False)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if self._combine_exact(other):
            out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
            for i, x in enumerate(self.coeffs):
                if x == 0:
                    continue
                for j, y in enumerate(other.coeffs):
                    out[i + j] += x * y
            return Poly(out, self.var, exact=True)
        return Poly(np.convolve(self.as_array(), other.as_array()), self.var, exact=False)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly([1], self.var, exact=self.exact)
        for _ in range(k):
            out = out * self
        return out

    def deriv(self, order: int = 1) -> "Poly":
        p = self
        for _ in range(order):
            if p.exact:
                p = Poly([i * c for i, c in enumerate(p.coeffs)][1:] or [0], p.var, exact=True)
            else:
                a = p.as_array()
                p = Poly((np.arange(len(a)) * a)[1:] if len(a) > 1 else [0j], p.var, exact=False)
        return p

    def divmod(self, other: "Poly"):
        """Long division; exact over Q, floating otherwise."""
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        exact = self._combine_exact(other)
        num = list(self.coeffs) if exact else list(self.as_array())
        den = list(other.coeffs) if exact else list(other.as_array())
        dn = len(den) - 1
        if len(num) - 1 < dn:
            return Poly([0], self.var, exact=exact), Poly(num, self.var, exact=exact)
        q = [0] * (len(num) - dn)
        for k in range(len(num) - dn - 1, -1, -1):
            t = num[k + dn] / den[dn]
            q[k] = t
            for j in range(dn + 1):
                num[k + j] -= t * den[j]
        rem = num[:dn] if dn > 0 else [0]
        return Poly(q, self.var, exact=exact), Poly(rem, self.var, exact=exact)

    def __floordiv__(self, other):
        return self.divmod(self._coerce(other))[0]

    def __mod__(self, other):
        return self.divmod(self._coerce(other))[1]

    def exact_div(self, other: "Poly") -> "Poly":
        q, r = self.divmod(other)
        if self.exact and other.exact and not r.is_zero():
            raise ArithmeticError("inexact polynomial division")
        return q

    # -- exact algorithms -------------------------------------------------
    def gcd(self, other: "Poly") -> "Poly":
        """Monic gcd over Q (exact domain only)."""
        if not (self.exact and other.exact):
            raise TypeError("gcd needs exact polynomials")
        a, b = self, other
        while not b.is_zero():
            a, b = b, a % b
        if a.is_zero():
            return a
        return a.monic()

    def squarefree_part(self) -> "Poly":
        g = self.gcd(self.deriv())
        return self.exact_div(g).monic() if g.degree > 0 else self.monic()

    def squarefree_decomposition(self) -> list[tuple["Poly", int]]:
        """Yun's algorithm: list of (monic square-free factor, multiplicity)."""
        if not self.exact:
            raise TypeError("square-free decomposition needs an exact polynomial")
        if self.degree <= 0:
            return []
        f = self.monic()
        out = []
        a = f.gcd(f.deriv())
        b = f.exact_div(a)
        c = f.deriv().exact_div(a)
        d = c - b.deriv()
        i = 1
        while b.degree > 0:
            a = b.gcd(d)
            b = b.exact_div(a)
            c = d.exact_div(a)
            d = c - b.deriv()
            if a.degree > 0:
                out.append((a, i))
            i += 1
        return out

    # -- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        if self.exact:
            return {"var": self.var, "domain": "exact", "coeffs": [str(c) for c in self.coeffs]}
        return {
            "var": self.var,
            "domain": "complex",
            "coeffs": [[float(c.real), float(c.imag)] for c in self.as_array()],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Poly":
        var = data.get("var", "x")
        cs = data["coeffs"]
        if data.get("domain", "exact" if all(isinstance(c, str) for c in cs) else "complex") == "exact":
            return cls([parse_exact(c) for c in cs], var, exact=True)
        return cls([complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c) for c in cs], var, exact=False)


def polyval_asc(a: np.ndarray, x):
    """Horner evaluation of ascending coefficients ``a`` at array ``x``."""
    x = np.asarray(x, dtype=complex)
    acc = np.zeros(x.shape, dtype=complex)
    for c in a[::-1]:
        acc = acc * x + c
    return acc


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RootSet:
    """Distinct root values with multiplicities; ``INF`` marks the point at infinity."""

    points: tuple[tuple[complex, int], ...]

    @property
    def total(self) -> int:
        return sum(m for _, m in self.points)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def values(self) -> list[complex]:
        return [v for v, _ in self.points]

    def multiset(self) -> list[complex]:
        return [v for v, m in self.points for _ in range(m)]

    def max_multiplicity(self) -> int:
        return max((m for _, m in self.points), default=0)

    def multiplicity_of(self, value, tol: float = 1e-7) -> int:
        for v, m in self.points:
            if is_inf(value) and is_inf(v):
                return m
            if not is_inf(v) and not is_inf(value) and abs(v - value) <= tol * max(1.0, abs(value)):
                return m
        return 0

    def finite(self) -> "RootSet":
        return RootSet(tuple((v, m) for v, m in self.points if not is_inf(v)))

    def to_json(self) -> list:
        out = []
        for v, m in self.points:
            if is_inf(v):
                out.append({"point": "inf", "mult": m})
            else:
                out.append({"point": [v.real, v.imag], "mult": m})
        return out


def _sort_key(item):
    v = item[0]
    if is_inf(v):
        return (1, 0.0, 0.0)
    return (0, round(v.real, 10), round(v.imag, 10))


def make_rootset(items) -> RootSet:
    return RootSet(tuple(sorted(((complex(v), int(m)) for v, m in items), key=_sort_key)))


def _aberth_double(a: np.ndarray, maxiter: int = 800):
    """Aberth–Ehrlich simultaneous iteration; ``a`` ascending, a[0], a[-1] nonzero."""
    n = len(a) - 1
    if n == 1:
        return np.array([-a[0] / a[1]]), True
    desc = a[::-1]
    ddesc = np.polyder(desc)
    absdesc = np.abs(desc)
    r = abs(a[0] / a[-1]) ** (1.0 / n)
    z = r * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))
    done = np.zeros(n, bool)
    for _ in range(maxiter):
        p = np.polyval(desc, z)
        dp = np.polyval(ddesc, z)
        bound = 8 * n * EPS * np.polyval(absdesc, np.abs(z))
        done |= np.abs(p) <= bound
        if done.all():
            return z, True
        with np.errstate(all="ignore"):
            ratio = p / dp
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            step = ratio / (1.0 - ratio * inv.sum(axis=1))
        bad = ~np.isfinite(step)
        step[bad] = 1e-3 * (1 + np.abs(z[bad]))
        step[done] = 0
        z = z - step
    return z, False


def _backward_ok(a: np.ndarray, vals: np.ndarray, tol: float = 1e-9) -> bool:
    p = polyval_asc(a, vals)
    s = polyval_asc(np.abs(a).astype(complex), np.abs(vals)).real
    return bool(np.all(np.abs(p) <= tol * s))


def _mp(c):
    if isinstance(c, Fraction):
        return mpmath.mpf(c.numerator) / c.denominator
    if isinstance(c, (mpmath.mpc, mpmath.mpf)):
        return c
    c = complex(c)
    return mpmath.mpc(c.real, c.imag)


def _horner_mp(a, x):
    acc = mpmath.mpc(0)
    for c in reversed(a):
        acc = acc * x + c
    return acc


def _aberth_mp(a: list, maxiter: int = 4000):
    n = len(a) - 1
    if n == 1:
        return [-a[0] / a[1]], True
    da = [i * a[i] for i in range(1, n + 1)]
    absa = [abs(c) for c in a]
    r = (abs(a[0]) / abs(a[-1])) ** (mpmath.mpf(1) / n)
    z = [r * mpmath.expj(2 * mpmath.pi * k / n + mpmath.mpf("0.4")) for k in range(n)]
    tol = mpmath.mpf(10) ** (-(mpmath.mp.dps - 6))
    done = [False] * n
    for _ in range(maxiter):
        for k in range(n):
            if done[k]:
                continue
            p = _horner_mp(a, z[k])
            if abs(p) <= tol * _horner_mp(absa, abs(z[k])).real:
                done[k] = True
                continue
            dp = _horner_mp(da, z[k])
            s = mpmath.fsum(1 / (z[k] - z[j]) for j in range(n) if j != k)
            if dp == 0:
                z[k] += tol * (1 + abs(z[k]))
                continue
            ratio = p / dp
            z[k] = z[k] - ratio / (1 - ratio * s)
        if all(done):
            return z, True
    return z, False


class _Evaluator:
    """Derivative evaluation helper used by the multiplicity confirmation."""

    def __init__(self, a, mp: bool):
        self.mp = mp
        self.derivs = [list(a)]
        for _ in range(len(a) - 1):
            prev = self.derivs[-1]
            self.derivs.append([i * prev[i] for i in range(1, len(prev))])
        self.abs_derivs = [[abs(c) for c in d] for d in self.derivs]
        self.tol = mpmath.mpf(10) ** (-(mpmath.mp.dps - 10)) if mp else 1e-11

    def val(self, j, x):
        d = self.derivs[j]
        if not d:
            return 0
        acc = 0
        for c in reversed(d):
            acc = acc * x + c
        return acc

    def absval(self, j, x):
        d = self.abs_derivs[j]
        acc = 0
        ax = abs(x)
        for c in reversed(d):
            acc = acc * ax + c
        return acc

    def refine(self, m, c, radius):
        """Newton on the (m-1)-th derivative, staying inside the cluster radius."""
        c0 = c
        for _ in range(8):
            num = self.val(m - 1, c)
            den = self.val(m, c)
            if den == 0:
                break
            step = num / den
            c = c - step
            if abs(c - c0) > radius:
                return c0
            if abs(step) <= (1e-30 if self.mp else 4 * EPS) * (1 + abs(c)):
                break
        return c

    def confirms(self, m, c) -> bool:
        for j in range(m - 1):
            if abs(self.val(j, c)) > self.tol * self.absval(j, c):
                return False
        return True


def _components(idx, vals, radius):
    idx = list(idx)
    parent = {i: i for i in idx}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for p in range(len(idx)):
        for q in range(p + 1, len(idx)):
            i, j = idx[p], idx[q]
            scale = max(1.0, float(abs(vals[i])), float(abs(vals[j])))
            if abs(vals[i] - vals[j]) <= radius * scale:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in idx:
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _cluster(a, vals, mp: bool):
    """Merge numerically coincident roots, confirming each merge by derivative vanishing."""
    ev = _Evaluator(a, mp)
    out = []

    def split(group, level):
        if len(group) == 1:
            out.append((vals[group[0]], 1))
            return
        m = len(group)
        c = sum(vals[i] for i in group) / m
        radius = _LADDER[level] * max(1.0, float(abs(c)))
        c = ev.refine(m, c, radius)
        if ev.confirms(m, c):
            out.append((c, m))
            return
        if level == 0:
            for i in group:
                out.append((vals[i], 1))
            return
        for comp in _components(group, vals, _LADDER[level - 1]):
            split(comp, level - 1)

    top = len(_LADDER) - 1
    for comp in _components(range(len(vals)), vals, _LADDER[top]):
        split(comp, top)
    return out


def _numeric_roots(a: Sequence, precision: str) -> list[tuple[complex, int]]:
    """Roots of a polynomial with nonzero constant and leading coefficients."""
    if precision == "extended":
        with mpmath.workdps(EXTENDED_DPS):
            am = [_mp(c) for c in a]
            z, ok = _aberth_mp(am)
            if not ok:
                raise NonConvergence("extended-precision Aberth iteration did not converge")
            return [(complex(v), m) for v, m in _cluster(am, z, mp=True)]
    arr = np.array([complex(c) for c in a], dtype=complex)
    z, ok = _aberth_double(arr)
    if not ok or not _backward_ok(arr, z):
        z = np.roots(arr[::-1])
        if len(z) != len(arr) - 1 or not _backward_ok(arr, z, tol=1e-7):
            raise NonConvergence("Aberth iteration and companion fallback both failed")
    return _cluster(list(arr), list(z), mp=False)


def roots(p: Poly, precision: str | None = None) -> RootSet:
    """Roots of ``p`` with multiplicities.

    Exact polynomials are first split by Yun's square-free decomposition, so
    their multiplicities are exact.  Floating polynomials are solved by
    Aberth–Ehrlich iteration (companion-matrix fallback); numerically
    coincident roots are merged when the merged point is confirmed to be a
    root of the corresponding derivatives.
    """
    if p.is_zero():
        raise ZeroPolynomial("roots of the zero polynomial")
    if p.degree == 0:
        return RootSet(())
    precision = precision or precision_tier()
    if p.exact:
        items = []
        for g, mult in p.squarefree_decomposition():
            for v, _ in _roots_nonexact_core(list(g.coeffs), precision):
                items.append((v, mult))
        return make_rootset(items)
    return make_rootset(_roots_nonexact_core(list(p.as_array()), precision))


def _roots_nonexact_core(a: list, precision: str):
    k = 0
    while a[k] == 0:
        k += 1
    items = [(0j, k)] if k else []
    rest = a[k:]
    if len(rest) > 1:
        items.extend(_numeric_roots(rest, precision))
    return items


def roots_mp(a: Sequence, dps: int = EXTENDED_DPS) -> list[tuple[mpmath.mpc, int]]:
    """High-precision roots of mpmath coefficients (ascending), clustered.

    Returned values stay in mpmath so callers can evaluate further at full
    precision.
    """
    with mpmath.workdps(dps):
        am = [_mp(c) for c in a]
        while len(am) > 1 and am[-1] == 0:
            am.pop()
        if len(am) == 1:
            if am[0] == 0:
                raise ZeroPolynomial("roots of the zero polynomial")
            return []
        k = 0
        while am[k] == 0:
            k += 1
        items = [(mpmath.mpc(0), k)] if k else []
        rest = am[k:]
        if len(rest) > 1:
            z, ok = _aberth_mp(rest)
            if not ok:
                raise NonConvergence("extended-precision Aberth iteration did not converge")
            items.extend(_cluster(rest, z, mp=True))
        return items


# ---------------------------------------------------------------------------
# Sylvester matrices and determinants
# ---------------------------------------------------------------------------


def sylvester_matrix(p: Sequence, q: Sequence, zero=0) -> list[list]:
    """Sylvester matrix of ascending coefficient lists ``p`` and ``q``.

    Rows hold coefficients in descending order, ``deg q`` shifted copies of
    ``p`` followed by ``deg p`` shifted copies of ``q``.  Entries may be any
    ring elements.
    """
    m, n = len(p) - 1, len(q) - 1
    size = m + n
    rows = []
    pd = list(reversed(p))
    qd = list(reversed(q))
    for i in range(n):
        rows.append([zero] * i + pd + [zero] * (size - m - 1 - i))
    for i in range(m):
        rows.append([zero] * i + qd + [zero] * (size - n - 1 - i))
    return rows


def bareiss_det(matrix: Sequence[Sequence], exquo=None, one=1):
    """Fraction-free determinant (Bareiss).

    ``exquo(a, b)`` must perform exact division in the entry ring; the
    default uses ``//`` which is exact for integers.
    """
    if exquo is None:
        exquo = lambda a, b: a // b  # noqa: E731
    M = [list(r) for r in matrix]
    n = len(M)
    if n == 0:
        return one
    sign = 1
    prev = one
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k] != 0:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return M[k][k] * 0
        pivot = M[k][k]
        for i in range(k + 1, n):
            mik = M[i][k]
            row_i, row_k = M[i], M[k]
            for j in range(k + 1, n):
                row_i[j] = exquo(row_i[j] * pivot - mik * row_k[j], prev)
            row_i[k] = pivot * 0
        prev = pivot
    return M[n - 1][n - 1] if sign > 0 else -M[n - 1][n - 1]


def _clear_denominators(cs: Sequence[Fraction]) -> tuple[list[int], int]:
    den = reduce(math.lcm, (Fraction(c).denominator for c in cs), 1)
    return [int(Fraction(c) * den) for c in cs], den


def _require_positive(p_deg: int, q_deg: int, var: str):
    if p_deg < 1 or q_deg < 1:
        raise DegenerateLeadingCoefficient(
            f"both polynomials need positive degree in {var} (got {p_deg}, {q_deg})"
        )


def resultant(p, q, eliminate: str | None = None):
    """Sylvester resultant.

    ``Poly`` x ``Poly`` gives a scalar.  ``BiPoly`` x ``BiPoly`` with
    ``eliminate`` in ``{"z", "w"}`` gives a ``Poly`` in the remaining variable.
    """
    if isinstance(p, Poly) and isinstance(q, Poly):
        return _resultant_univariate(p, q)
    if isinstance(p, BiPoly) and isinstance(q, BiPoly):
        if eliminate not in ("z", "w"):
            raise ValueError("eliminate must be 'z' or 'w'")
        return _resultant_bivariate(p, q, eliminate)
    raise TypeError("resultant expects two Poly or two BiPoly values")


def _resultant_univariate(p: Poly, q: Poly):
    _require_positive(p.degree, q.degree, p.var)
    if p.exact and q.exact:
        pi, dp = _clear_denominators(p.coeffs)
        qi, dq = _clear_denominators(q.coeffs)
        det = bareiss_det(sylvester_matrix(pi, qi))
        return Fraction(det, dp ** q.degree * dq ** p.degree)
    S = np.array(sylvester_matrix(list(p.as_array()), list(q.as_array()), 0j), dtype=complex)
    return complex(np.linalg.det(S))


def _interp_degree_bound(pe: int, pt: int, qe: int, qt: int) -> int:
    return pe * qt + qe * pt


def _resultant_bivariate(p: "BiPoly", q: "BiPoly", eliminate: str) -> Poly:
    other = "w" if eliminate == "z" else "z"
    P = p.coeffs if eliminate == "z" else p.coeffs.T
    Q = q.coeffs if eliminate == "z" else q.coeffs.T
    pe, qe = P.shape[0] - 1, Q.shape[0] - 1
    _require_positive(pe, qe, eliminate)
    if p.exact and q.exact:
        from sympy import ZZ
        from sympy.polys.rings import ring

        R, t = ring("t", ZZ)
        Pi, dp = _clear_denominators(P.ravel())
        Qi, dq = _clear_denominators(Q.ravel())
        Pi = np.array(Pi, dtype=object).reshape(P.shape)
        Qi = np.array(Qi, dtype=object).reshape(Q.shape)
        pc = [R.from_list([int(v) for v in reversed(list(row))]) for row in Pi]
        qc = [R.from_list([int(v) for v in reversed(list(row))]) for row in Qi]
        det = bareiss_det(sylvester_matrix(pc, qc, R.zero), exquo=lambda a, b: a.exquo(b), one=R.one)
        scale = dp ** qe * dq ** pe
        if det == 0:
            return Poly([0], other, exact=True)
        deg = det.degree()
        coeffs = [Fraction(0)] * (deg + 1)
        for (e,), c in det.terms():
            coeffs[e] = Fraction(int(c), scale)
        return Poly(coeffs, other, exact=True)
    Pc = P.astype(complex)
    Qc = Q.astype(complex)
    bound = _interp_degree_bound(pe, Pc.shape[1] - 1, qe, Qc.shape[1] - 1)
    N = bound + 1
    ts = np.exp(2j * np.pi * np.arange(N) / N)
    vals = np.empty(N, complex)
    for k, t in enumerate(ts):
        pk = [polyval_asc(row, t) for row in Pc]
        qk = [polyval_asc(row, t) for row in Qc]
        vals[k] = np.linalg.det(np.array(sylvester_matrix(pk, qk, 0j), dtype=complex))
    coeffs = np.fft.fft(vals) / N
    cut = 1e-12 * max(1.0, np.max(np.abs(coeffs)))
    coeffs[np.abs(coeffs) <= cut] = 0
    return Poly(coeffs, other, exact=False)


def discriminant(p, var: str | None = None):
    """(-1)^{d(d-1)/2} Res(p, p') / lc(p).

    For a ``BiPoly`` pass ``var`` in ``{"z", "w"}``; the result is a ``Poly``
    in the other variable.
    """
    if isinstance(p, Poly):
        d = p.degree
        if d < 2:
            raise DegenerateLeadingCoefficient("discriminant needs degree >= 2")
        sign = -1 if (d * (d - 1) // 2) % 2 else 1
        r = _resultant_univariate(p, p.deriv())
        return sign * r / p.lc
    if not isinstance(p, BiPoly):
        raise TypeError("discriminant expects Poly or BiPoly")
    if var not in ("z", "w"):
        raise ValueError("var must be 'z' or 'w'")
    d = p.deg_z if var == "z" else p.deg_w
    if d < 2:
        raise DegenerateLeadingCoefficient("discriminant needs degree >= 2")
    sign = -1 if (d * (d - 1) // 2) % 2 else 1
    r = _resultant_bivariate(p, p.diff(var), var)
    lc = p.leading_coefficient(var)
    if p.exact:
        return Poly([sign * c for c in r.exact_div(lc).coeffs], r.var, exact=True)
    q, _ = r.divmod(lc)
    return Poly(sign * q.as_array(), r.var, exact=False)


# ---------------------------------------------------------------------------
# Bivariate polynomials
# ---------------------------------------------------------------------------


def _trim2(c: np.ndarray) -> np.ndarray:
    nz = np.argwhere(c != 0)
    if len(nz) == 0:
        return c[:1, :1] * 0
    return c[: nz[:, 0].max() + 1, : nz[:, 1].max() + 1]


class BiPoly:
    """Bivariate polynomial ``sum c[i, j] z**i w**j``."""

    __slots__ = ("coeffs", "exact", "vars")

    def __init__(self, coeffs, exact: bool | None = None, vars: tuple[str, str] = ("z", "w")):
        arr = np.array(coeffs, dtype=object)
        if arr.ndim != 2:
            raise ValueError("BiPoly needs a 2-d coefficient matrix")
        if exact is None:
            exact = all(is_exact_number(v) for v in arr.ravel())
        if exact:
            arr = np.vectorize(to_exact, otypes=[object])(arr) if arr.size else arr
        else:
            arr = arr.astype(complex)
        arr = _trim2(arr)
        arr.setflags(write=False)
        self.coeffs = arr
        self.exact = bool(exact)
        self.vars = tuple(vars)

    @classmethod
    def from_terms(cls, terms: dict, exact: bool | None = None) -> "BiPoly":
        if not terms:
            return cls([[0]], exact=True if exact is None else exact)
        dz = max(i for i, _ in terms) + 1
        dw = max(j for _, j in terms) + 1
        if exact is None:
            exact = all(is_exact_number(v) for v in terms.values())
        arr = np.zeros((dz, dw), dtype=object if exact else complex)
        if exact:
            arr[:] = Fraction(0)
        for (i, j), v in terms.items():
            arr[i, j] += v
        return cls(arr, exact=exact)

    @classmethod
    def from_expr(cls, expr: str, z: str = "z", w: str = "w", **subs) -> "BiPoly":
        """Parse a polynomial expression in ``z`` and ``w`` (via sympy)."""
        import sympy

        zs, ws = sympy.symbols(f"{z} {w}")
        e = sympy.sympify(expr, locals={z: zs, w: ws, "I": sympy.I})
        if subs:
            e = e.subs({sympy.Symbol(k): sympy.nsimplify(v) for k, v in subs.items()})
        P = sympy.Poly(sympy.expand(e), zs, ws)
        terms = {}
        exact = True
        for (i, j), c in P.terms():
            if c.is_Rational:
                terms[(int(i), int(j))] = Fraction(int(c.p), int(c.q))
            else:
                exact = False
                terms[(int(i), int(j))] = complex(c)
        if not exact:
            terms = {k: complex(v) for k, v in terms.items()}
        return cls.from_terms(terms, exact=exact)

    # -- properties -------------------------------------------------------
    @property
    def deg_z(self) -> int:
        return -1 if self.is_zero() else self.coeffs.shape[0] - 1

    @property
    def deg_w(self) -> int:
        return -1 if self.is_zero() else self.coeffs.shape[1] - 1

    def is_zero(self) -> bool:
        return self.coeffs.shape == (1, 1) and self.coeffs[0, 0] == 0

    def __repr__(self):
        return f"BiPoly(deg_z={self.deg_z}, deg_w={self.deg_w}, exact={self.exact})"

    def __eq__(self, other):
        if not isinstance(other, BiPoly):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(np.all(self.coeffs == other.coeffs))

    def __hash__(self):
        return hash((self.coeffs.shape, tuple(complex(v) for v in self.coeffs.ravel())))

    def to_complex(self) -> "BiPoly":
        return self if not self.exact else BiPoly(self.coeffs.astype(complex), exact=False)

    def complex_array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=complex)

    # -- evaluation -------------------------------------------------------
    def __call__(self, z, w):
        if self.exact and is_exact_number(z) and is_exact_number(w):
            return self.fiber_w(z)(w)
        C = self.complex_array()
        zp = np.power(complex(z), np.arange(C.shape[0]))
        wp = np.power(complex(w), np.arange(C.shape[1]))
        return complex(zp @ C @ wp)

    def fiber_w(self, z) -> Poly:
        """``F(z, .)`` as a polynomial in w.  ``z = INF`` selects the top z-row."""
        if is_inf(z):
            return Poly(list(self.coeffs[-1, :]), "w", exact=self.exact)
        if self.exact and is_exact_number(z):
            z = to_exact(z)
            powers = [z ** i for i in range(self.coeffs.shape[0])]
            vals = [sum(powers[i] * self.coeffs[i, j] for i in range(len(powers))) for j in range(self.coeffs.shape[1])]
            return Poly(vals, "w", exact=True)
        zp = np.power(complex(z), np.arange(self.coeffs.shape[0]))
        return Poly(zp @ self.complex_array(), "w", exact=False)

    def fiber_z(self, w) -> Poly:
        p = self.transpose().fiber_w(w)
        return Poly(p.coeffs, "z", exact=p.exact)

    def fiber_w_mp(self, z) -> list:
        """Coefficients of ``F(z, .)`` in mpmath at the current working precision."""
        rows = [[_mp(v) for v in row] for row in self.coeffs]
        out = []
        for j in range(self.coeffs.shape[1]):
            acc = mpmath.mpc(0)
            for i in reversed(range(self.coeffs.shape[0])):
                acc = acc * z + rows[i][j]
            out.append(acc)
        return out

    def leading_coefficient(self, var: str) -> Poly:
        if var == "w":
            return Poly(list(self.coeffs[:, -1]), "z", exact=self.exact)
        return Poly(list(self.coeffs[-1, :]), "w", exact=self.exact)

    # -- algebra ----------------------------------------------------------
    def transpose(self) -> "BiPoly":
        return BiPoly(self.coeffs.T.copy(), exact=self.exact)

    def diff(self, var: str) -> "BiPoly":
        c = self.coeffs
        if var == "z":
            if c.shape[0] == 1:
                return BiPoly([[0]], exact=self.exact)
            out = np.array([c[i] * i for i in range(1, c.shape[0])], dtype=c.dtype)
        else:
            if c.shape[1] == 1:
                return BiPoly([[0]], exact=self.exact)
            out = np.array([c[:, j] * j for j in range(1, c.shape[1])], dtype=c.dtype).T
        return BiPoly(out, exact=self.exact)

    def _zeros(self, shape, exact):
        if exact:
            a = np.empty(shape, dtype=object)
            a[:] = Fraction(0)
            return a
        return np.zeros(shape, complex)

    def __add__(self, other: "BiPoly") -> "BiPoly":
        exact = self.exact and other.exact
        shape = (max(self.coeffs.shape[0], other.coeffs.shape[0]), max(self.coeffs.shape[1], other.coeffs.shape[1]))
        out = self._zeros(shape, exact)
        out[: self.coeffs.shape[0], : self.coeffs.shape[1]] += self.coeffs if exact else self.complex_array()
        out[: other.coeffs.shape[0], : other.coeffs.shape[1]] += other.coeffs if exact else other.complex_array()
        return BiPoly(out, exact=exact)

    def __neg__(self):
        return BiPoly(-self.coeffs, exact=self.exact)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, BiPoly):
            return BiPoly(self.coeffs * other, exact=self.exact and is_exact_number(other))
        exact = self.exact and other.exact
        a = self.coeffs if exact else self.complex_array()
        b = other.coeffs if exact else other.complex_array()
        out = self._zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1), exact)
        for i, j in zip(*np.nonzero(a != 0)):
            out[i : i + b.shape[0], j : j + b.shape[1]] += a[i, j] * b
        return BiPoly(out, exact=exact)

    __rmul__ = __mul__

    def primitive(self) -> "BiPoly":
        """Integer coefficients with unit content; leading (max z, then w) term positive."""
        if not self.exact:
            raise TypeError("primitive() needs an exact polynomial")
        flat = list(self.coeffs.ravel())
        ints, _ = _clear_denominators(flat)
        g = reduce(math.gcd, ints, 0) or 1
        arr = np.array([Fraction(v // g) for v in ints], dtype=object).reshape(self.coeffs.shape)
        nz = np.argwhere(arr != 0)
        if len(nz):
            i, j = max(map(tuple, nz))
            if arr[i, j] < 0:
                arr = -arr
        return BiPoly(arr, exact=True)

    def normalized(self) -> "BiPoly":
        """Scalar-normalized copy: primitive for exact, unit max-norm otherwise."""
        if self.exact:
            return self.primitive()
        C = self.complex_array()
        k = np.argmax(np.abs(C.ravel()))
        return BiPoly(C / C.ravel()[k], exact=False)

    def proportional_to(self, other: "BiPoly", tol: float = 1e-9) -> bool:
        if self.coeffs.shape != other.coeffs.shape:
            return False
        if self.exact and other.exact:
            return self.primitive() == other.primitive() or self.primitive() == (-other).primitive()
        return bool(np.max(np.abs(self.normalized().complex_array() - other.normalized().complex_array())) <= tol)

    # -- sympy bridge (exact arithmetic in several variables) -------------
    def to_ring(self, R, zgen, wgen):
        acc = R.zero
        for i, j in zip(*np.nonzero(self.coeffs != 0)):
            acc += R.domain.convert(self.coeffs[i, j]) * zgen ** int(i) * wgen ** int(j)
        return acc

    @classmethod
    def from_ring(cls, elem, zpos: int, wpos: int) -> "BiPoly":
        terms = {}
        for mon, c in elem.terms():
            key = (mon[zpos], mon[wpos])
            val = Fraction(int(c.numerator), int(c.denominator)) if hasattr(c, "denominator") else Fraction(int(c))
            terms[key] = terms.get(key, Fraction(0)) + val
        return cls.from_terms(terms, exact=True)

    # -- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        if self.exact:
            rows = [[str(v) for v in row] for row in self.coeffs]
            return {"vars": list(self.vars), "domain": "exact", "coeffs": rows}
        rows = [[[float(v.real), float(v.imag)] for v in row] for row in self.complex_array()]
        return {"vars": list(self.vars), "domain": "complex", "coeffs": rows}

    @classmethod
    def from_json(cls, data: dict) -> "BiPoly":
        if "expr" in data:
            return cls.from_expr(data["expr"])
        rows = data["coeffs"]
        domain = data.get("domain")
        if domain is None:
            domain = "exact" if all(isinstance(v, str) for row in rows for v in row) else "complex"
        if domain == "exact":
            return cls([[parse_exact(v) for v in row] for row in rows], exact=True)
        return cls([[complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v) for v in row] for row in rows],
                   exact=False)


def compose_resultant(G: BiPoly, F: BiPoly) -> BiPoly:
    """Res_y(G(x, y), F(y, z)) as a ``BiPoly`` in (x, z).

    ``G`` is read with variables (x, y) and ``F`` with (y, z); the shared
    variable y is eliminated.
    """
    m = G.deg_w
    n = F.deg_z
    _require_positive(m, n, "y")
    if G.exact and F.exact:
        from sympy import ZZ
        from sympy.polys.rings import ring

        R, x, z = ring("x,z", ZZ)
        Gi, dg = _clear_denominators(G.coeffs.ravel())
        Fi, df = _clear_denominators(F.coeffs.ravel())
        Gi = np.array(Gi, dtype=object).reshape(G.coeffs.shape)
        Fi = np.array(Fi, dtype=object).reshape(F.coeffs.shape)
        gc = [sum((int(Gi[i, j]) * x ** i for i in range(Gi.shape[0]) if Gi[i, j]), R.zero) for j in range(m + 1)]
        fc = [sum((int(Fi[i, j]) * z ** j for j in range(Fi.shape[1]) if Fi[i, j]), R.zero) for i in range(n + 1)]
        det = bareiss_det(sylvester_matrix(gc, fc, R.zero), exquo=lambda a, b: a.exquo(b), one=R.one)
        scale = dg ** n * df ** m
        terms = {}
        for (i, j), c in det.terms():
            terms[(i, j)] = Fraction(int(c), scale)
        return BiPoly.from_terms(terms, exact=True)
    Gc = G.complex_array()
    Fc = F.complex_array()
    nx = n * (Gc.shape[0] - 1) + 1
    nz = m * (Fc.shape[1] - 1) + 1
    xs = np.exp(2j * np.pi * np.arange(nx) / nx)
    zs = np.exp(2j * np.pi * np.arange(nz) / nz)
    gvals = np.power.outer(xs, np.arange(Gc.shape[0])) @ Gc  # (nx, m+1)
    fvals = Fc @ np.power.outer(zs, np.arange(Fc.shape[1])).T  # (n+1, nz)
    vals = np.empty((nx, nz), complex)
    for a in range(nx):
        for b in range(nz):
            S = sylvester_matrix(list(gvals[a]), list(fvals[:, b]), 0j)
            vals[a, b] = np.linalg.det(np.array(S, dtype=complex))
    coeffs = np.fft.fft2(vals) / (nx * nz)
    cut = 1e-12 * max(1.0, np.max(np.abs(coeffs)))
    coeffs[np.abs(coeffs) <= cut] = 0
    return BiPoly(coeffs, exact=False)


def bipoly_squarefree(F: BiPoly) -> tuple[BiPoly, list[tuple[BiPoly, int]]]:
    """Square-free, content-reduced part of an exact ``BiPoly``.

    Returns the reduced polynomial and the list of (factor, multiplicity)
    whose surplus powers were removed.
    """
    if not F.exact:
        raise TypeError("square-free reduction needs an exact polynomial")
    from sympy import QQ
    from sympy.polys.rings import ring

    R, z, w = ring("z,w", QQ)
    elem = F.to_ring(R, z, w)
    _, factors = elem.sqf_list()
    reduced = R.one
    removed = []
    for fac, mult in factors:
        reduced *= fac
        if mult > 1:
            removed.append((BiPoly.from_ring(fac, 0, 1), mult - 1))
    return BiPoly.from_ring(reduced, 0, 1).primitive(), removed
