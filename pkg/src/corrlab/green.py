"""Equidistribution experiments on P^1.

Atomic measures, normalized pullbacks, Monte-Carlo backward orbits,
Green potentials of iterated graphs and the super-potential series.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corr1 import Corr1, adjoint, backward, forward, iterate
from .errors import CorrlabError, CriticalCollision, FitUnstable
from .polyalg import INF, is_inf
from .regcal import _bump_norm

BLOCK = 4096
LC_TOL = 1e-13


# ---------------------------------------------------------------------------
# Measures and test functions
# ---------------------------------------------------------------------------


@dataclass
class AtomicMeasure:
    """Points on P^1 (complex, ``inf`` allowed) with real weights."""

    points: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex).ravel()
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.points.shape != self.weights.shape:
            raise ValueError("points and weights differ in length")

    @classmethod
    def dirac(cls, a, weight: float = 1.0) -> "AtomicMeasure":
        return cls([complex(a)], [weight])

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self):
        return self.points.size

    def __sub__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        return AtomicMeasure(np.concatenate([self.points, other.points]),
                             np.concatenate([self.weights, -other.weights]))

    def charts(self) -> tuple[np.ndarray, np.ndarray]:
        """(chart index, chart coordinate): chart 1 holds 1/z for |z| > 1 and infinity."""
        inf = ~np.isfinite(self.points)
        finite = np.where(inf, 0, self.points)
        big = inf | (np.abs(finite) > 1)
        inv = 1 / np.where(big & ~inf, finite, 1)
        coord = np.where(inf, 0, np.where(big, inv, finite))
        return big.astype(int), coord

    def to_csv(self, path) -> None:
        chart, coord = self.charts()
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["re", "im", "weight", "chart"])
            for c, u, wt in zip(chart, coord, self.weights):
                wr.writerow([repr(float(u.real)), repr(float(u.imag)), repr(float(wt)), int(c)])

    @classmethod
    def from_csv(cls, path) -> "AtomicMeasure":
        pts, wts = [], []
        with open(path) as fh:
            for row in csv.DictReader(fh):
                u = complex(float(row["re"]), float(row["im"]))
                if int(row["chart"]) == 1:
                    u = INF if u == 0 else 1 / u
                pts.append(u)
                wts.append(float(row["weight"]))
        return cls(pts, wts)


def _sphere(z: np.ndarray):
    """Unit-sphere coordinates of points of P^1 (infinity is the north pole)."""
    z = np.asarray(z, dtype=complex)
    inf = ~np.isfinite(z)
    zz = np.where(inf, 0, z)
    r2 = np.abs(zz) ** 2
    X = np.where(inf, 0.0, 2 * zz.real / (1 + r2))
    Y = np.where(inf, 0.0, 2 * zz.imag / (1 + r2))
    Z = np.where(inf, 1.0, (r2 - 1) / (r2 + 1))
    return X, Y, Z


class TestFunction:
    """A smooth real test function on P^1 with a declared C^2-norm bound.

    kinds
    -----
    polynomial : params {"coeffs": {(i, j): c}, "chart": 0 | 1}, polynomial in
        (Re u, Im u) with u = z (chart 0) or 1/z (chart 1).
    gaussian : params {"center": complex, "sigma": float, "amp": float}.
    fs : params {"coeffs": {(i, j, k): c}}, polynomial in the sphere
        coordinates (X, Y, Z).
    """

    __test__ = False  # keep pytest from collecting this class

    def __init__(self, kind: str, params: dict, norm_bound: float | None = None):
        if kind not in ("polynomial", "gaussian", "fs"):
            raise ValueError(f"unknown test-function kind {kind!r}")
        self.kind = kind
        self.params = dict(params)
        est = self.c2_estimate()
        if norm_bound is None:
            norm_bound = est
        elif est > norm_bound * 1.05 + 1e-12:
            raise ValueError(f"declared C^2 bound {norm_bound} below grid estimate {est:.4g}")
        self.norm_bound = float(norm_bound)

    def __repr__(self):
        return f"TestFunction({self.kind!r}, {self.params!r})"

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        inf = ~np.isfinite(z)
        if self.kind == "gaussian":
            c = complex(self.params.get("center", 0))
            s = float(self.params.get("sigma", 1.0))
            amp = float(self.params.get("amp", 1.0))
            zz = np.where(inf, 0, z)
            return np.where(inf, 0.0, amp * np.exp(-np.abs(zz - c) ** 2 / (2 * s * s)))
        if self.kind == "fs":
            X, Y, Z = _sphere(z)
            out = np.zeros(z.shape)
            for (i, j, k), c in self.params["coeffs"].items():
                out = out + float(c) * X ** i * Y ** j * Z ** k
            return out
        chart = int(self.params.get("chart", 0))
        with np.errstate(divide="ignore", invalid="ignore"):
            u = z if chart == 0 else np.where(inf, 0, 1 / np.where(z == 0, np.inf, z))
        bad = ~np.isfinite(u)
        if np.any(bad):
            raise ValueError("polynomial test function evaluated outside its chart")
        out = np.zeros(z.shape)
        for (i, j), c in self.params["coeffs"].items():
            out = out + float(c) * u.real ** i * u.imag ** j
        return out

    def c2_estimate(self, half_width: float = 2.0, n: int = 161) -> float:
        """Grid estimate of the C^2 norm in the chart coordinates |x|, |y| <= half_width."""
        if self.kind == "gaussian":
            return float(self.params.get("amp", 1.0)) * _bump_norm(float(self.params.get("sigma", 1.0)), 2)
        xs = np.linspace(-half_width, half_width, n)
        h = xs[1] - xs[0]
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        best = 0.0
        charts = [0, 1] if self.kind == "fs" else [0]
        for ch in charts:
            U = X + 1j * Y
            if ch == 1:
                with np.errstate(divide="ignore", invalid="ignore"):
                    U = np.where(U == 0, INF, 1 / U)
            V = self(U)
            dx, dy = np.gradient(V, h, h)
            dxx, dxy = np.gradient(dx, h, h)
            _, dyy = np.gradient(dy, h, h)
            best = max(best, *(float(np.max(np.abs(a))) for a in (V, dx, dy, dxx, dxy, dyy)))
        return best

    def to_json(self) -> dict:
        p = {}
        for k, v in self.params.items():
            if isinstance(v, dict):
                p[k] = {",".join(map(str, key)): float(c) for key, c in v.items()}
            elif isinstance(v, complex):
                p[k] = [v.real, v.imag]
            else:
                p[k] = v
        return {"kind": self.kind, "params": p, "norm_bound": self.norm_bound}

    @classmethod
    def from_json(cls, data: dict) -> "TestFunction":
        params = {}
        for k, v in data["params"].items():
            if isinstance(v, dict):
                params[k] = {tuple(int(t) for t in key.split(",")): c for key, c in v.items()}
            elif isinstance(v, list) and len(v) == 2:
                params[k] = complex(v[0], v[1])
            else:
                params[k] = v
        return cls(data["kind"], params, data.get("norm_bound"))


def standard_test_functions() -> list[TestFunction]:
    """Three functions used for equidistribution checks on the z^2 family."""
    return [
        TestFunction("gaussian", {"center": 1.0 + 0.0j, "sigma": 0.5}),
        TestFunction("polynomial", {"coeffs": {(2, 0): 0.25, (0, 1): 0.1}}),
        TestFunction("fs", {"coeffs": {(1, 0, 0): 0.5, (0, 0, 2): 0.5}}),
    ]


def dictionary_test_functions(n: int = 10) -> list[TestFunction]:
    out = []
    for j in range(n):
        ang = 2 * np.pi * j / n
        out.append(TestFunction("gaussian", {"center": complex(np.cos(ang), np.sin(ang)), "sigma": 0.6}))
    return out


def pair(mu: AtomicMeasure, phi: Callable) -> float:
    """sum_i w_i phi(x_i)."""
    return float(np.sum(mu.weights * phi(mu.points)))


def pair_with_sigma(mu: AtomicMeasure, phi: Callable) -> tuple[float, float]:
    """Pairing and its Monte-Carlo standard error (equal-weight samples)."""
    v = phi(mu.points)
    n = v.size
    mean = float(np.sum(mu.weights * v))
    sigma = float(np.std(v, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, sigma


def circle_average(phi: Callable, radius: float = 1.0, n: int = 1 << 14) -> float:
    """Average of phi over the circle |z| = radius (trapezoid rule)."""
    t = 2 * np.pi * np.arange(n) / n
    return float(np.mean(phi(radius * np.exp(1j * t))))


# ---------------------------------------------------------------------------
# Batched fibres
# ---------------------------------------------------------------------------


def _batched_roots(coefs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Roots of each row (ascending coefficients).  Returns (roots, ok-mask).

    Rows whose leading coefficient is negligible are marked not ok.
    """
    n, m = coefs.shape
    d = m - 1
    scale = np.max(np.abs(coefs), axis=1)
    lc = coefs[:, -1]
    ok = (np.abs(lc) > LC_TOL * scale) & np.all(np.isfinite(coefs), axis=1)
    out = np.full((n, d), np.nan + 0j)
    if d == 0 or not np.any(ok):
        return out, ok
    b = coefs[ok, :-1] / lc[ok, None]
    if d == 1:
        out[ok, 0] = -b[:, 0]
        return out, ok
    comp = np.zeros((b.shape[0], d, d), dtype=complex)
    comp[:, 0, :] = -b[:, ::-1]
    idx = np.arange(d - 1)
    comp[:, idx + 1, idx] = 1.0
    out[ok] = np.linalg.eigvals(comp)
    ok2 = ok.copy()
    ok2[ok] = np.all(np.isfinite(out[ok]), axis=1)
    return out, ok2


def _fiber_coeffs(C: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Coefficients in z of F(z, a) for each a (C[i, j] multiplies z^i w^j)."""
    V = np.power.outer(np.where(np.isfinite(a), a, 0), np.arange(C.shape[1]))
    return V @ C.T


def _preimages(f: Corr1, a: np.ndarray, C: np.ndarray | None = None) -> np.ndarray:
    """(n, d1) array of preimages, multiplicity repeated, INF for degree drops."""
    a = np.asarray(a, dtype=complex)
    C = f.graph.complex_array() if C is None else C
    R, ok = _batched_roots(_fiber_coeffs(C, a))
    ok &= np.isfinite(a)
    for i in np.nonzero(~ok)[0]:
        rs = backward(f, INF if not np.isfinite(a[i]) else a[i])
        R[i] = np.array(rs.multiset(), dtype=complex)
    return R


def pullback_measure(f: Corr1, mu: AtomicMeasure) -> AtomicMeasure:
    """Normalized pullback d1^-1 f^* mu: each atom spreads over its d1 preimages."""
    try:
        R = _preimages(f, mu.points)
    except CorrlabError as exc:
        raise type(exc)(f"pullback failed: {exc}") from exc
    d1 = f.d1
    w = np.repeat(mu.weights / d1, d1)
    return AtomicMeasure(R.ravel(), w)


def pullback_iterate(f: Corr1, a, n: int) -> AtomicMeasure:
    mu = AtomicMeasure.dirac(a)
    for _ in range(n):
        mu = pullback_measure(f, mu)
    return mu


def pushforward_function(f: Corr1, phi: Callable) -> Callable:
    """w -> d1^-1 sum over z in f^-1(w) of phi(z), computed through the adjoint's forward fibres."""
    g = adjoint(f)

    def psi(w):
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        out = np.empty(w.shape)
        for i, x in enumerate(w):
            pts = np.array(forward(g, INF if not np.isfinite(x) else x).multiset(), dtype=complex)
            out[i] = float(np.sum(phi(pts))) / f.d1
        return out

    return psi


# ---------------------------------------------------------------------------
# Monte-Carlo backward orbits
# ---------------------------------------------------------------------------


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def _sample_block(args):
    graph_json, a, depth, count, seed, block = args
    f = Corr1.from_json(graph_json, validate_graph=False)
    C = f.graph.complex_array()
    rng = _block_rng(seed, block)
    pts = np.full(count, complex(a))
    resampled = 0
    for _ in range(depth):
        R = _preimages(f, pts, C)
        choice = rng.integers(0, f.d1, size=count)
        nxt = R[np.arange(count), choice]
        bad = np.isnan(nxt)
        if np.any(bad):
            resampled += int(bad.sum())
            for i in np.nonzero(bad)[0]:
                good = R[i][~np.isnan(R[i])]
                nxt[i] = good[rng.integers(0, good.size)]
        pts = nxt
    return pts, resampled


def backward_orbit_sample(f: Corr1, a, n: int, n_paths: int, seed: int = 0, jobs: int = 1) -> AtomicMeasure:
    """Monte-Carlo estimate of d1^-n (f^n)^* delta_a from random backward paths.

    Paths are generated in fixed blocks of 4096, block b using the counter
    stream seeded by (seed, b), so output is independent of ``jobs``.
    """
    if n == 0:
        return AtomicMeasure.dirac(a)
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    gj = f.to_json()
    tasks = []
    for b, start in enumerate(range(0, n_paths, BLOCK)):
        tasks.append((gj, complex(a), n, min(BLOCK, n_paths - start), seed, b))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sample_block, tasks))
    else:
        results = [_sample_block(t) for t in tasks]
    pts = np.concatenate([r[0] for r in results])
    resampled = sum(r[1] for r in results)
    mu = AtomicMeasure(pts, np.full(pts.size, 1.0 / pts.size))
    mu.meta = {"depth": n, "paths": n_paths, "seed": seed, "resampled": resampled}
    return mu


# ---------------------------------------------------------------------------
# Convergence rates
# ---------------------------------------------------------------------------


@dataclass
class RateFit:
    pairs: list
    lam: float | None
    C: float | None
    r2: float | None
    degenerate: bool = False
    lambda1: float | None = None

    def to_json(self) -> dict:
        return {"pairs": [[int(n), float(v)] for n, v in self.pairs], "lambda": self.lam, "C": self.C,
                "r2": self.r2, "degenerate": self.degenerate, "lambda1": self.lambda1,
                "below_certificate": None if self.lambda1 is None or self.lam is None else self.lam <= self.lambda1}


def fit_exponential(ns: Sequence[int], vals: Sequence[float], floor: float = 1e-13,
                    min_r2: float = 0.9) -> RateFit:
    """Least-squares fit of vals ~ C lam^n in the log domain over values above ``floor``."""
    pairs = list(zip(ns, vals))
    scale = max((abs(v) for v in vals), default=0.0)
    use = [(n, v) for n, v in pairs if abs(v) > floor * max(scale, 1.0)]
    if scale == 0 or len(use) < 3:
        return RateFit(pairs, None, None, None, degenerate=True)
    x = np.array([n for n, _ in use], float)
    y = np.log(np.array([abs(v) for _, v in use]))
    A = np.vstack([x, np.ones_like(x)]).T
    (s, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ np.array([s, c])
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    fit = RateFit(pairs, float(math.exp(s)), float(math.exp(c)), r2)
    if r2 < min_r2:
        raise FitUnstable(f"exponential fit has R^2 = {r2:.3f} < {min_r2}", data=fit)
    return fit


def equidist_rate(f: Corr1, a, phi: Callable, n_max: int, mode: str = "successive",
                  lambda1: float | None = None, min_r2: float = 0.9) -> RateFit:
    """Fit the decay of s_n = <d1^-n (f^n)^* delta_a, phi> using exact pullback iterates.

    mode "successive" fits |s_{n+1} - s_n|, mode "tail" fits |s_n - s_{n_max}|.
    """
    mu = AtomicMeasure.dirac(a)
    s = [pair(mu, phi)]
    for _ in range(n_max):
        mu = pullback_measure(f, mu)
        s.append(pair(mu, phi))
    if mode == "successive":
        ns = list(range(n_max))
        vals = [s[n + 1] - s[n] for n in ns]
    elif mode == "tail":
        ns = list(range(n_max))
        vals = [s[n] - s[n_max] for n in ns]
    else:
        raise ValueError("mode must be 'successive' or 'tail'")
    fit = fit_exponential(ns, vals, min_r2=min_r2)
    fit.lambda1 = None if lambda1 is None else float(lambda1)
    return fit


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------


def graph_iterate(f: Corr1, n: int) -> Corr1:
    return iterate(f, n)


def standard_grid(n_r: int = 200, n_theta: int = 200, r_min: float = 0.1, r_max: float = 10.0,
                  avoid: tuple = (0.999, 1.001)) -> np.ndarray:
    """Polar grid split around the ring ``avoid``."""
    lo = np.geomspace(r_min, avoid[0], n_r // 2, endpoint=False)
    hi = np.geomspace(r_max, avoid[1], n_r - n_r // 2, endpoint=False)[::-1]
    radii = np.concatenate([lo, hi])
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    return (radii[:, None] * np.exp(1j * th)[None, :]).ravel()


def potential_samples(f: Corr1, a, n: int, grid: np.ndarray) -> np.ndarray:
    """p_n = d1^-n log|F_n(z, a)| with F_n the graph of the n-th iterate."""
    g = graph_iterate(f, n)
    p = g.graph.fiber_z(a)
    return p.log_abs(grid) / f.d1 ** n


def potential_iterate(f: Corr1, a, n: int, grid: np.ndarray | None = None) -> dict:
    """Samples p_0..p_n on the grid and the sup-differences |p_{j+1} - p_j|."""
    if grid is None:
        grid = standard_grid()
    samples = [potential_samples(f, a, j, grid) for j in range(n + 1)]
    diffs = [float(np.max(np.abs(samples[j + 1] - samples[j]))) for j in range(n)]
    return {"grid": grid, "samples": samples, "diffs": diffs}


def green_power(z, d: int = 2):
    """log+|z| - (1/2) log(1 + |z|^2), a normalized Green potential of z^d."""
    z = np.asarray(z, dtype=complex)
    inf = ~np.isfinite(z)
    zz = np.where(inf, 1.0, z)
    r = np.abs(zz)
    val = np.maximum(np.log(r), 0) - 0.5 * np.log1p(r * r)
    return np.where(inf, 0.0, val)


def quasi_potential(f: Corr1, z) -> float:
    """u(z) = log(|a_top(z)| prod_{w in f(z) finite} sqrt(1 + |w|^2)) - (d1/2) log(1 + |z|^2).

    a_top is the highest nonvanishing coefficient of F(z, .); infinite fibre
    points contribute nothing.  At z = infinity the top z-row is used.
    """
    F = f.graph
    p = F.fiber_w(INF if is_inf(z) else z)
    a = p.as_array()
    nz = np.nonzero(np.abs(a) > 1e-12 * np.max(np.abs(a)))[0]
    if nz.size == 0:
        raise CriticalCollision("fibre polynomial vanishes")
    lead = abs(a[nz[-1]])
    rs = forward(f, INF if is_inf(z) else z)
    acc = math.log(lead)
    for w, m in rs.points:
        if not is_inf(w):
            acc += 0.5 * m * math.log1p(abs(w) ** 2)
    if not is_inf(z):
        acc -= 0.5 * f.d1 * math.log1p(abs(complex(z)) ** 2)
    if not math.isfinite(acc):
        raise CriticalCollision(f"quasi-potential is not finite at {z}")
    return acc


def _forward_orbit(f: Corr1, pts: list) -> list:
    out = []
    for z, m in pts:
        for w, k in forward(f, z).points:
            if not is_inf(w) and not np.isfinite(w):
                raise CriticalCollision("orbit left the finite chart")
            out.append((w, m * k))
    return out


@dataclass
class SeriesResult:
    partial_sums: list
    increments: list
    tail_bounds: list
    truncated_at: int | None = None

    def to_json(self) -> dict:
        return {"partial_sums": self.partial_sums, "increments": self.increments,
                "tail_bounds": self.tail_bounds, "truncated_at": self.truncated_at}


def quasi_potential_bound(f: Corr1, n: int = 64) -> float:
    """Sampled sup |u| over a sphere grid (including both poles)."""
    t = np.linspace(0.02, np.pi - 0.02, n)
    ph = 2 * np.pi * (np.arange(n) + 0.5) / n
    pts = [0j, INF]
    for a in t:
        r = math.tan(a / 2)
        pts.extend(r * np.exp(1j * ph))
    best = 0.0
    for z in pts:
        try:
            best = max(best, abs(quasi_potential(f, z)))
        except CriticalCollision:
            continue
    return best


def superpotential_series(f: Corr1, a, b, L: int) -> SeriesResult:
    """Partial sums of sum_l d1^(-l-1) <u, (f^l)_*(delta_a - delta_b)>.

    Tail bounds use |u| <= U (sampled) and the pushforward mass d0^l.
    """
    d0, d1 = f.d0, f.d1
    U = quasi_potential_bound(f)
    orb_a, orb_b = [(complex(a) if not is_inf(a) else INF, 1)], [(complex(b) if not is_inf(b) else INF, 1)]
    sums, incs, tails = [], [], []
    acc = 0.0
    truncated = None
    for l in range(L + 1):
        try:
            ua = sum(m * quasi_potential(f, z) for z, m in orb_a)
            ub = sum(m * quasi_potential(f, z) for z, m in orb_b)
        except CriticalCollision:
            truncated = l
            break
        inc = (ua - ub) / d1 ** (l + 1)
        acc += inc
        incs.append(inc)
        sums.append(acc)
        ratio = d0 / d1
        tails.append(2 * U * d0 ** (l + 1) / d1 ** (l + 2) / (1 - ratio) if ratio < 1 else math.inf)
        if l < L:
            try:
                orb_a, orb_b = _forward_orbit(f, orb_a), _forward_orbit(f, orb_b)
            except CriticalCollision:
                truncated = l + 1
                break
    return SeriesResult(sums, incs, tails, truncated)


# ---------------------------------------------------------------------------
# Branch-sum inequality
# ---------------------------------------------------------------------------


def wedge_branch_inequality(f: Corr1, phi: Callable, psi: Callable, zs: Sequence) -> dict:
    """Check sum_j phi psi (w_j) <= (sum_j phi(w_j)) (sum_j psi(w_j)) over forward branches."""
    rows = []
    worst = math.inf
    for z in zs:
        w = np.array(forward(f, z).multiset(), dtype=complex)
        a, b = phi(w), psi(w)
        if np.any(a < 0) or np.any(b < 0):
            raise ValueError("test functions must be nonnegative on the branches")
        lhs = float(np.sum(a * b))
        rhs = float(np.sum(a) * np.sum(b))
        slack = rhs - lhs
        worst = min(worst, slack)
        rows.append({"lhs": lhs, "rhs": rhs, "slack": slack})
    return {"ok": worst >= -1e-12, "min_slack": worst, "rows": rows}
