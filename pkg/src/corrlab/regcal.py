"""Regularity calculus: Holder exponent propagation rules, the log-Holder
rate certificate and rate constants for equidistribution.

Rules return exact Fractions whenever their inputs are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermeval

from . import mult
from .errors import Infeasible


def _num(x):
    """Keep exact rationals exact, everything else becomes float."""
    if isinstance(x, bool):
        raise TypeError("boolean is not a number")
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return float(x)


@dataclass(frozen=True)
class HolderDesc:
    C: float
    eta: float

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")


@dataclass(frozen=True)
class LogHolderDesc:
    L: float
    r: float

    def __post_init__(self):
        if not (self.L > 0 and self.r > 0):
            raise ValueError("L and r must be positive")


def _eta(h):
    return _num(h.eta if isinstance(h, HolderDesc) else h)


def wedge_rule(h1, h2):
    """Exponent min(eta1, 1) * min(eta2, 1) / 2 for a wedge product."""
    e1, e2 = _eta(h1), _eta(h2)
    if e1 <= 0 or e2 <= 0:
        raise ValueError("exponents must be positive")
    return min(e1, 1) * min(e2, 1) / 2


def domination_rule(eta, k: int):
    """Exponent eta / (50 k) inherited by a dominated current."""
    eta = _eta(eta)
    if eta <= 0:
        raise ValueError("exponent must be positive")
    if k < 1:
        raise ValueError("k must be >= 1")
    return eta / (50 * k)


def pullback_chain(k: int, q: int, rho: int) -> list[Fraction]:
    """Exponents after pulling back a smooth form: one factor, the q-fold wedge, then domination."""
    if not (1 <= q <= k) or rho < 1:
        raise ValueError("need 1 <= q <= k and rho >= 1")
    e1 = Fraction(1, 2 * rho)
    e2 = Fraction(1, 2 ** (q - 1) * (2 * rho) ** q)
    e3 = Fraction(1, 25 * k * (4 * rho) ** q)
    assert e3 == domination_rule(e2, k)
    assert e3 == mult.kappa(k, q, rho)
    return [e1, e2, e3]


def pushforward_iterate(C2, kappa, xi, l: int, eps: float = 1e-3) -> float:
    """C3^(1/(1-kappa)) * xi^(kappa^l) with C3 = max(C2, 1 + eps)."""
    kappa, xi = float(kappa), float(xi)
    if not 0 < kappa < 1:
        raise ValueError("kappa must lie in (0, 1)")
    if l < 0:
        raise ValueError("l must be >= 0")
    C3 = max(float(C2), 1.0 + eps)
    return C3 ** (1.0 / (1.0 - kappa)) * xi ** (kappa ** l)


def skoda_bound(A, C, eta) -> float:
    """A (1 + log+(C) / eta)."""
    if eta <= 0 or C <= 0:
        raise ValueError("C and eta must be positive")
    return float(A) * (1.0 + max(math.log(C), 0.0) / float(eta))


# ---------------------------------------------------------------------------
# Rate certificate
# ---------------------------------------------------------------------------


def c5_constant(r: float) -> float:
    """sup over t >= log log 4 of exp(r t - e^(t/2)).

    This is the smallest C5 with exp(-|log xi|^(1/2)) <= C5 |log xi|^(-r)
    for all xi < 1/4.
    """
    t0 = math.log(math.log(4.0))
    if r <= 0:
        return math.exp(r * t0 - math.exp(t0 / 2))
    t_star = 2.0 * math.log(2.0 * r)
    if t_star >= t0:
        return (2.0 * r / math.e) ** (2.0 * r)
    return math.exp(r * t0 - math.exp(t0 / 2))


@dataclass
class RateCertificate:
    kappa: float
    D: float
    r: float
    delta_choice: float
    C3: float
    C4: float
    C5: float
    kappa_tilde: object = None
    lambda0: object = None
    lambda1: object = None
    r_plus: float = 0.0
    rows: list = field(default_factory=list)
    ok: bool = True

    def to_json(self) -> dict:
        def v(x):
            if isinstance(x, Fraction):
                return {"exact": str(x), "float": float(x)}
            return x

        return {
            "kappa": v(self.kappa), "kappa_tilde": v(self.kappa_tilde), "D": self.D, "r": self.r,
            "delta_choice": self.delta_choice, "C3": self.C3, "C4": self.C4, "C5": self.C5,
            "lambda0": v(self.lambda0), "lambda1": v(self.lambda1), "r_plus": self.r_plus,
            "ok": self.ok, "rows": self.rows,
        }


def certify_log_rate(dq, dqm1, kappa, xi_grid: Sequence[float], delta=None, C2: float = 1.0,
                     eps: float = 1e-3, kappa_tilde=None, r_plus: float = 0.0, strict: bool = True
                     ) -> RateCertificate:
    """Verify the log-rate inequality chain on a grid of xi values.

    With D = dq/delta, N = floor(log|log xi| / |2 log kappa|) and
    r = log D / |2 log kappa|, each grid point is checked for
    xi^(kappa^N) <= C5 |log xi|^(-r), D^(-N) <= D |log xi|^(-r) and for the
    geometric tail sum being at most C4 (C5 + D) |log xi|^(-r).
    Raises AssertionError on a violation when ``strict``.
    """
    dq, dqm1 = float(dq), float(dqm1)
    k_ = float(kappa)
    if not dqm1 < dq:
        raise ValueError("need dqm1 < dq")
    if not 0 < k_ < 1:
        raise ValueError("kappa must lie in (0, 1)")
    delta = math.sqrt(dq * dqm1) if delta is None else float(delta)
    if not dqm1 < delta < dq:
        raise ValueError("delta must lie strictly between dqm1 and dq")
    D = dq / delta
    two_log_k = abs(2.0 * math.log(k_))
    r = math.log(D) / two_log_k
    C5 = c5_constant(r)
    C3 = max(float(C2), 1.0 + eps)
    A = max(C3 ** (k_ / (1.0 - k_)), 1.0)
    C4 = D / (D - 1.0) * A
    rows = []
    ok = True
    for xi in xi_grid:
        xi = float(xi)
        if not 0 < xi < 0.25:
            raise ValueError("grid values must lie in (0, 1/4)")
        L = abs(math.log(xi))
        N = math.floor(math.log(L) / two_log_k)
        rhs = L ** (-r)
        log_t1 = (k_ ** N) * math.log(xi)
        t1 = math.exp(log_t1)
        t2 = D ** (-N)
        tail = sum(D ** (-l) * A * math.exp(k_ ** (l + 1) * math.log(xi)) for l in range(N))
        tail += D ** (-N + 1) / (D - 1.0)
        c1 = log_t1 <= math.log(C5) + math.log(rhs) + 1e-12
        c2 = t2 <= D * rhs * (1 + 1e-12)
        c3 = tail <= C4 * (t1 + t2) * (1 + 1e-12)
        c4 = C4 * (t1 + t2) <= C4 * (C5 + D) * rhs * (1 + 1e-12)
        row_ok = c1 and c2 and c3 and c4
        ok &= row_ok
        rows.append({"xi": xi, "N": N, "xi_pow": t1, "D_pow": t2, "log_rate": rhs, "tail": tail,
                     "pow_bound": C5 * rhs, "D_bound": D * rhs, "ok": row_ok})
    cert = RateCertificate(kappa, D, r, delta, C3, C4, C5, rows=rows, ok=ok, r_plus=r_plus)
    if kappa_tilde is not None:
        cert.kappa_tilde = kappa_tilde
        try:
            cert.lambda0, cert.lambda1 = rate_lambda(dq, dqm1, kappa_tilde, r_plus)
        except Infeasible:
            pass
    if strict and not ok:
        bad = [row["xi"] for row in rows if not row["ok"]]
        raise AssertionError(f"log-rate chain violated at xi = {bad}")
    return cert


def rate_lambda(dq, dqm1, kappa_tilde, r_plus=0, eps=Fraction(1, 1000)):
    """(lambda0, lambda1): lambda0 slightly above dqm1 / (dq kappa_tilde), lambda1 = max(lambda0, r_plus)."""
    dq, dqm1, kt = _num(dq), _num(dqm1), _num(kappa_tilde)
    if not kt > 0:
        raise ValueError("kappa_tilde must be positive")
    if not 1 / kt < dq / dqm1:
        raise Infeasible("adjoint multiplicity is not small: 1/kappa_tilde >= dq/dqm1")
    base = dqm1 / (dq * kt)
    lam0 = (1 + _num(eps)) * base
    if lam0 >= 1:
        lam0 = (base + 1) / 2
    lam1 = max(lam0, _num(r_plus))
    return lam0, lam1


# ---------------------------------------------------------------------------
# Interpolation between negative Sobolev-type norms
# ---------------------------------------------------------------------------

DICT_VERSION = 1
DICT_CENTERS = np.linspace(-2.0, 2.0, 9)
DICT_WIDTHS = (0.05, 0.1, 0.2, 0.5, 1.0)


@lru_cache(maxsize=None)
def _hermite_sup(j: int) -> float:
    """sup_u |d^j/du^j exp(-u^2/2)| = sup_u |He_j(u) exp(-u^2/2)|."""
    u = np.linspace(-12, 12, 48001)
    c = np.zeros(j + 1)
    c[j] = 1.0
    return float(np.max(np.abs(hermeval(u, c) * np.exp(-u * u / 2))))


def _bump_norm(sigma: float, l: int) -> float:
    """C^l norm of exp(-|x|^2 / (2 sigma^2)) on the plane."""
    return max(
        sigma ** (-(a + b)) * _hermite_sup(a) * _hermite_sup(b)
        for a in range(l + 1) for b in range(l + 1 - a)
    )


def dictionary_norm(points, weights, l: int) -> float:
    """max over the bump dictionary of |<S, phi>| / |phi|_{C^l}."""
    z = np.asarray(points, dtype=complex).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if z.size == 0:
        return 0.0
    cx, cy = np.meshgrid(DICT_CENTERS, DICT_CENTERS)
    centers = (cx + 1j * cy).ravel()
    best = 0.0
    for s in DICT_WIDTHS:
        vals = np.exp(-np.abs(z[None, :] - centers[:, None]) ** 2 / (2 * s * s))
        pair = np.abs(vals @ w)
        best = max(best, float(pair.max()) / _bump_norm(s, l))
    return best


def interpolation_inequality_check(l: int, l_prime: int, samples: Sequence, c: float | None = None,
                                   tol: float = 1e-12) -> dict:
    """Check dist_l' <= dist_l <= c dist_l'^(l/l') on atomic signed measures.

    ``samples`` is a list of (points, weights).  When ``c`` is None the
    smallest constant fitting the samples is reported.
    """
    if not 0 < l < l_prime:
        raise ValueError("need 0 < l < l_prime")
    rows = []
    for pts, wts in samples:
        a = dictionary_norm(pts, wts, l)
        b = dictionary_norm(pts, wts, l_prime)
        rows.append((a, b))
    ratios = [a / b ** (l / l_prime) for a, b in rows if b > 0]
    fitted = max(ratios, default=0.0)
    cc = fitted if c is None else float(c)
    lower_ok = all(b <= a * (1 + tol) + tol for a, b in rows)
    upper_ok = all(a <= cc * b ** (l / l_prime) * (1 + tol) + tol for a, b in rows)
    return {"c": cc, "fitted_c": fitted, "lower_ok": lower_ok, "upper_ok": upper_ok,
            "ok": lower_ok and upper_ok, "rows": rows, "dictionary_version": DICT_VERSION}
