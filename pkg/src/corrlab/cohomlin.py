"""Linear algebra of cone-preserving maps: Jordan data, normalized powers,
dynamical-degree profiles and spectral bounds for model actions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import mpmath
import numpy as np
from scipy.linalg import null_space, subspace_angles

from .errors import IllConditioned
from .polyalg import precision_tier

TOL_RANK = 1e-8
TOL_EIG_CLUSTER = 1e-4


@dataclass
class ConeMap:
    """A square real matrix, optionally with cone generators (as columns)."""

    matrix: np.ndarray
    cone_generators: np.ndarray | None = None
    tol: float = 1e-9

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("matrix must be square")
        if not np.all(np.isfinite(M)):
            raise ValueError("matrix has non-finite entries")
        self.matrix = M
        if self.cone_generators is not None:
            G = np.asarray(self.cone_generators, dtype=float)
            coords, *_ = np.linalg.lstsq(G, M @ G, rcond=None)
            if np.any(coords < -self.tol * max(1.0, np.abs(coords).max())):
                raise ValueError("matrix does not map the cone into itself")
            self.cone_generators = G


def _as_matrix(M) -> np.ndarray:
    if isinstance(M, ConeMap):
        return M.matrix
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    return M


@dataclass
class Block:
    eigenvalue: complex
    algebraic: int
    sizes: list  # Jordan block sizes, descending

    @property
    def max_size(self) -> int:
        return self.sizes[0] if self.sizes else 0


@dataclass
class SpectralData:
    lam: float
    m: int
    F_basis: np.ndarray
    H_basis: np.ndarray
    theta: tuple
    blocks: list = field(default_factory=list)
    certificate: dict = field(default_factory=dict)

    @property
    def dim_F(self) -> int:
        return self.F_basis.shape[1]

    @property
    def dim_H(self) -> int:
        return self.H_basis.shape[1]

    def to_json(self) -> dict:
        return {
            "lambda": self.lam,
            "m": self.m,
            "dim_F": self.dim_F,
            "dim_H": self.dim_H,
            "theta": list(self.theta),
            "F_basis": self.F_basis.tolist(),
            "H_basis": self.H_basis.tolist(),
            "blocks": [
                {"eigenvalue": [b.eigenvalue.real, b.eigenvalue.imag], "sizes": b.sizes} for b in self.blocks
            ],
            "certificate": self.certificate,
        }


def _cluster_eigenvalues(ev: np.ndarray, scale: float) -> list[list[complex]]:
    left = sorted(ev.tolist(), key=lambda z: (-abs(z), z.real, z.imag))
    groups: list[list[complex]] = []
    rad = TOL_EIG_CLUSTER * max(1.0, scale)
    for z in left:
        for g in groups:
            if abs(np.mean(g) - z) <= rad:
                g.append(z)
                break
        else:
            groups.append([z])
    return groups


def _orth(A: np.ndarray, rtol: float) -> np.ndarray:
    if A.size == 0:
        return A.reshape(A.shape[0], 0)
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return U[:, :0]
    r = int(np.sum(s > rtol * s[0]))
    return U[:, :r]


def _real_span(C: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    """Real basis of the smallest real subspace whose complexification contains C."""
    if C.shape[1] == 0:
        return np.zeros((C.shape[0], 0))
    return _orth(np.hstack([C.real, C.imag]), rtol)


def spectral_data(M, tol_rank: float = TOL_RANK, gap: float = 1e2) -> SpectralData:
    """Spectral radius, its multiplicity and the dominant eigenspaces.

    Block sizes come from staircase ranks of (M - mu I)^j.  Singular values
    within a factor ``gap`` of the rank threshold make the structure
    ambiguous and raise IllConditioned.
    """
    A = _as_matrix(M)
    h = A.shape[0]
    norm = max(np.linalg.norm(A, 2), 1.0)
    ev = np.linalg.eigvals(A)
    groups = _cluster_eigenvalues(ev, norm)
    lam = float(np.max(np.abs(ev))) if h else 0.0
    blocks: list[Block] = []
    worst_gap = math.inf
    dominant = []
    for g in groups:
        mu = complex(np.mean(g))
        if abs(mu.imag) <= TOL_EIG_CLUSTER * norm:
            mu = complex(mu.real, 0.0)
        a = len(g)
        B = A - mu * np.eye(h)
        P = np.eye(h, dtype=complex)
        nullities = [0]
        for j in range(1, a + 1):
            P = P @ B
            s = np.linalg.svd(P, compute_uv=False)
            thr = tol_rank * norm ** j
            near = s[(s > thr / gap) & (s < thr * gap)]
            if near.size:
                raise IllConditioned(
                    f"ambiguous rank of (M - mu I)^{j} near mu={mu:.6g}",
                    certificate={"mu": [mu.real, mu.imag], "power": j, "singular_values": s.tolist(), "threshold": thr},
                )
            kept = s[s > thr]
            dropped = s[s <= thr]
            if kept.size and dropped.size:
                worst_gap = min(worst_gap, float(kept.min() / max(dropped.max(), 1e-300)))
            nullities.append(h - kept.size)
            if nullities[-1] >= a:
                break
        # number of blocks of size >= j is n_j - n_{j-1}
        ge = [nullities[j] - nullities[j - 1] for j in range(1, len(nullities))]
        sizes = []
        for j in range(len(ge), 0, -1):
            count = ge[j - 1] - (ge[j] if j < len(ge) else 0)
            sizes.extend([j] * count)
        blocks.append(Block(mu, a, sizes))
        if lam > 0 and abs(abs(mu) - lam) <= TOL_EIG_CLUSTER * max(lam, 1.0):
            dominant.append(blocks[-1])
    blocks.sort(key=lambda b: (-abs(b.eigenvalue), b.eigenvalue.real, b.eigenvalue.imag))
    if lam == 0:
        dominant = [b for b in blocks]
    m = max((b.max_size for b in dominant), default=1)
    FC, HC, thetas = [], [], []
    for b in dominant:
        if b.max_size != m:
            continue
        Bm = A - b.eigenvalue * np.eye(h)
        K = null_space(np.linalg.matrix_power(Bm, b.algebraic), rcond=tol_rank)
        V = np.linalg.matrix_power(Bm, m - 1) @ K
        V = _orth(V, 1e-6)
        FC.append(V)
        th = (np.angle(b.eigenvalue) / (2 * np.pi)) % 1.0
        thetas.append(float(th))
        if abs(b.eigenvalue - lam) <= TOL_EIG_CLUSTER * max(lam, 1.0):
            HC.append(V)
    F = _real_span(np.hstack(FC) if FC else np.zeros((h, 0), complex))
    H = _real_span(np.hstack(HC) if HC else np.zeros((h, 0), complex))
    cert = {"rank_gap": None if worst_gap == math.inf else worst_gap, "tol_rank": tol_rank}
    return SpectralData(lam, m, F, H, tuple(sorted(thetas)), blocks, cert)


def lambda_n(M, S: SpectralData, n: int, precision: str | None = None) -> np.ndarray:
    """n^(1-m) lambda^(-n) M^n via repeated squaring of M / lambda."""
    if n < 1:
        raise ValueError("n must be >= 1")
    A = _as_matrix(M)
    if S.lam == 0:
        raise ValueError("spectral radius is zero")
    if (precision or precision_tier()) == "extended":
        with mpmath.workdps(40):
            B = mpmath.matrix(A.tolist()) / mpmath.mpf(S.lam)
            R = B ** n
            R = R * mpmath.mpf(n) ** (1 - S.m)
            return np.array(R.tolist(), dtype=float)
    return np.linalg.matrix_power(A / S.lam, n) * float(n) ** (1 - S.m)


def continued_fraction_denominators(theta: float, max_n: int = 10 ** 9) -> list[int]:
    """Denominators of the continued-fraction convergents of theta, up to max_n.

    The expansion is done in exact arithmetic on the binary value of theta.
    """
    x = Fraction(theta) % 1
    qs = [1]
    q_prev, q = 0, 1
    while x != 0:
        y = 1 / x
        a = math.floor(y)
        x = y - a
        q_prev, q = q, a * q + q_prev
        if q > max_n:
            break
        if q != qs[-1]:
            qs.append(q)
    return qs


def rotation_subsequence(S: SpectralData, max_n: int = 10 ** 8, min_n: int = 1) -> list[int]:
    """Indices n_i along which n_i * theta converges to 0 mod 1.

    Uses convergent denominators of the first nontrivial angle; for rational
    angles the common denominator multiples are returned.
    """
    thetas = [t for t in S.theta if min(t, 1 - t) > 1e-12]
    if not thetas:
        return [2 ** j for j in range(0, 41) if min_n <= 2 ** j <= max_n]
    fr = [Fraction(t).limit_denominator(10 ** 6) for t in thetas]
    if all(abs(float(f) - t) < 1e-13 for f, t in zip(fr, thetas)):
        den = math.lcm(*(f.denominator for f in fr))
        return [den * 2 ** j for j in range(0, 41) if min_n <= den * 2 ** j <= max_n]
    qs = continued_fraction_denominators(thetas[0], max_n)
    return [q for q in qs if q >= min_n]


def cauchy_report(M, S: SpectralData, seq: Sequence[int], tail: int = 3, tol: float = 1e-6,
                  precision: str | None = None) -> dict:
    """Largest difference between consecutive Lambda_n over the last ``tail`` steps."""
    seq = list(seq)
    if len(seq) < 2:
        raise ValueError("need at least two indices")
    idx = seq[-(tail + 1):]
    mats = [lambda_n(M, S, n, precision) for n in idx]
    diffs = [float(np.linalg.norm(b - a, 2)) for a, b in zip(mats, mats[1:])]
    return {"indices": idx, "diffs": diffs, "max_diff": max(diffs), "cauchy": max(diffs) <= tol, "tol": tol}


def check_surjectivity_limit(M, S: SpectralData, subsequence: Sequence[int] | None = None,
                             tol: float = 1e-6, precision: str | None = None) -> dict:
    """Verify that the limit of Lambda_n along a subsequence maps onto F."""
    if subsequence is None:
        subsequence = rotation_subsequence(S, max_n=2 ** 40)
    rep = cauchy_report(M, S, subsequence, tol=tol, precision=precision)
    L = lambda_n(M, S, list(subsequence)[-1], precision)
    s = np.linalg.svd(L, compute_uv=False)
    rank = int(np.sum(s > tol * max(s[0], 1e-300))) if s.size else 0
    col = _orth(L, tol)
    if col.shape[1] and S.dim_F:
        angle = float(np.max(subspace_angles(col, S.F_basis)))
    else:
        angle = 0.0 if col.shape[1] == S.dim_F else math.pi / 2
    ok = rep["cauchy"] and rank == S.dim_F and angle <= math.sqrt(tol)
    return {"rank": rank, "dim_F": S.dim_F, "max_angle": angle, "cauchy": rep, "ok": bool(ok),
            "limit": L.tolist()}


# ---------------------------------------------------------------------------
# Degree profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DegreeProfile:
    degrees: tuple
    source: str = "matrix-family"

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(self.degrees))

    @property
    def k(self) -> int:
        return len(self.degrees) - 1

    def to_json(self) -> dict:
        return {"degrees": [d if isinstance(d, int) else float(d) for d in self.degrees], "source": self.source}


def degrees_projective(s: int, k: int) -> DegreeProfile:
    return DegreeProfile([s ** q for q in range(k + 1)], "projective-endo")


def degrees_graph_sum(s1: int, s2: int, k: int) -> DegreeProfile:
    return DegreeProfile([s1 ** q + s2 ** (k - q) for q in range(k + 1)], "graph-sum")


def degrees_sym_product(d0: int, d1: int, k: int) -> DegreeProfile:
    return DegreeProfile([d1 ** q * d0 ** (k - q) for q in range(k + 1)], "symmetric-product")


@dataclass
class MonotonicityVerdict:
    holds: bool
    peak: tuple  # (p, p') plateau of the best unimodal fit
    violations: list  # step indices i where (d_i, d_{i+1}) breaks the pattern
    decreasing_at_start: bool
    increasing_at_end: bool

    def to_json(self) -> dict:
        return {"holds": self.holds, "peak": list(self.peak), "violations": self.violations,
                "decreasing_at_start": self.decreasing_at_start, "increasing_at_end": self.increasing_at_end}


def _violations(d: Sequence, p: int, pp: int) -> list[int]:
    bad = []
    for i in range(len(d) - 1):
        if i < p:
            ok = d[i] < d[i + 1]
        elif i < pp:
            ok = d[i] == d[i + 1]
        else:
            ok = d[i] > d[i + 1]
        if not ok:
            bad.append(i)
    return bad


def monotonicity_check(D: DegreeProfile | Sequence) -> MonotonicityVerdict:
    """Does d_0 < ... < d_p = ... = d_p' > ... > d_k hold?"""
    d = list(D.degrees if isinstance(D, DegreeProfile) else D)
    k = len(d) - 1
    best = None
    for p in range(k + 1):
        for pp in range(p, k + 1):
            v = _violations(d, p, pp)
            if best is None or len(v) < len(best[2]):
                best = (p, pp, v)
    p, pp, v = best
    return MonotonicityVerdict(
        holds=not v,
        peak=(p, pp),
        violations=v,
        decreasing_at_start=k >= 1 and d[1] < d[0],
        increasing_at_end=k >= 1 and d[k] > d[k - 1],
    )


def kunneth_bound_squares(D: DegreeProfile | Sequence) -> list[int]:
    """Squares of the Kunneth bounds for d_l of (f, f^-1) on X x X, l = 0..2k."""
    d = list(D.degrees if isinstance(D, DegreeProfile) else D)
    k = len(d) - 1
    out = []
    for l in range(2 * k + 1):
        rng = [r for r in range(k + 1) if 0 <= k - l + r <= k]
        out.append(max(d[r] * d[s] * d[k - l + r] * d[k - l + s] for r in rng for s in rng))
    return out


def kunneth_bound(D: DegreeProfile | Sequence) -> list[float]:
    """max over admissible (r, s) of sqrt(d_r d_s d_{k-l+r} d_{k-l+s})."""
    return [math.sqrt(x) for x in kunneth_bound_squares(D)]


# ---------------------------------------------------------------------------
# Spectral bound checks on model actions
# ---------------------------------------------------------------------------


def spectral_radius(A) -> float:
    A = np.asarray(A, dtype=complex)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def product_model(degrees: Sequence[int]) -> tuple[dict, DegreeProfile]:
    """Actions on H^{q,q} of (P^1)^k under a product of maps of the given degrees.

    The basis of H^{q,q} is indexed by q-subsets I of the factors and the
    action is diagonal with entries prod_{i in I} s_i.
    """
    k = len(degrees)
    actions = {}
    prof = []
    for q in range(k + 1):
        diag = [math.prod(degrees[i] for i in I) for I in combinations(range(k), q)]
        actions[(q, q)] = np.diag(np.array(diag, dtype=float))
        prof.append(max(diag))
    return actions, DegreeProfile(prof, "matrix-family")


def rpq_bound_check(actions: dict, D: DegreeProfile | Sequence, tol: float = 1e-9) -> dict:
    """Check spectral radius of each (p, q) action against sqrt(d_p d_q)."""
    d = list(D.degrees if isinstance(D, DegreeProfile) else D)
    entries = []
    for (p, q), A in sorted(actions.items()):
        r = spectral_radius(A)
        bound = math.sqrt(d[p] * d[q])
        entries.append({"p": p, "q": q, "radius": r, "bound": bound, "ok": r <= bound * (1 + tol)})
    return {"ok": all(e["ok"] for e in entries), "entries": entries,
            "violations": [(e["p"], e["q"]) for e in entries if not e["ok"]]}


def simple_action_check(actions: dict, D: DegreeProfile | Sequence, tol: float = 1e-9) -> bool:
    """True iff a unique q maximizes d_q and the action on H^{q,q} has d_q as a simple top eigenvalue."""
    d = list(D.degrees if isinstance(D, DegreeProfile) else D)
    top = max(d)
    qs = [q for q, x in enumerate(d) if x == top]
    if len(qs) != 1:
        return False
    q = qs[0]
    A = actions.get((q, q), actions.get(q))
    if A is None:
        return False
    ev = np.linalg.eigvals(np.asarray(A, dtype=complex))
    r = np.max(np.abs(ev))
    near = np.abs(np.abs(ev) - r) <= tol * max(r, 1.0)
    if int(np.sum(near)) != 1:
        return False
    lead = ev[near][0]
    return abs(lead - top) <= tol * max(top, 1)


def rotation_example(theta: float, scale: float = 2.0) -> np.ndarray:
    """block-diag(scale * R(2 pi theta), 1)."""
    c, s = math.cos(2 * math.pi * theta), math.sin(2 * math.pi * theta)
    return np.array([[scale * c, -scale * s, 0.0], [scale * s, scale * c, 0.0], [0.0, 0.0, 1.0]])
