"""Admissible tuples of linear functionals and the polytope volumes built from them.

Small problems are solved exactly in rational arithmetic by enumerating the
vertices of {y : A y <= b}; larger ones fall back to scipy's LP solver and
Monte Carlo.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import linprog

from .errors import DomainError, GHKError

EXACT_MAX_N = 4     # vertex enumeration for LPs
SLICE_MAX_N = 3     # exact volumes


@dataclass
class AdmissibleTuple:
    functionals: np.ndarray   # (M, N)
    lengths: np.ndarray       # (M,)

    def __post_init__(self):
        self.functionals = np.atleast_2d(np.asarray(self.functionals, float))
        self.lengths = np.asarray(self.lengths, float).ravel()
        if self.lengths.size != self.functionals.shape[0]:
            raise DomainError("one length per functional required")
        if np.any(np.all(self.functionals == 0, axis=1)):
            raise DomainError("zero functional")
        if np.any(self.lengths <= 0):
            raise DomainError("lengths must be positive")

    @property
    def N(self) -> int:
        return self.functionals.shape[1]

    @property
    def M(self) -> int:
        return self.functionals.shape[0]

    def to_json(self) -> dict:
        return {"N": self.N, "M": self.M, "functionals": self.functionals.ravel().tolist(),
                "lengths": self.lengths.tolist()}

    @classmethod
    def from_json(cls, d):
        return cls(np.asarray(d["functionals"], float).reshape(int(d["M"]), int(d["N"])), d["lengths"])

    def key(self, extra=()) -> int:
        blob = json.dumps([self.to_json(), list(map(float, extra))], sort_keys=True).encode()
        return int.from_bytes(hashlib.sha256(blob).digest()[:16], "little")


def gowers_tuple(k: int, length: float = 1.0) -> AdmissibleTuple:
    """Functionals h -> alpha.h on R^k for alpha in {0,1}^k minus 0 (bit i = alpha_{i+1})."""
    rows = [[(a >> i) & 1 for i in range(k)] for a in range(1, 2 ** k)]
    return AdmissibleTuple(np.array(rows, float), np.full(len(rows), length))


def gowers_witnesses(k: int) -> List[Tuple[Fraction, ...]]:
    """h_alpha with (h_alpha)_i = 1/|alpha| where alpha_i = 1, in the order of
    gowers_tuple.  Exact rationals, since 1/3 etc. do not survive rounding."""
    out = []
    for a in range(1, 2 ** k):
        bits = [(a >> i) & 1 for i in range(k)]
        out.append(tuple(Fraction(b, sum(bits)) for b in bits))
    return out


def riesz_sobolev_tuple(l1, l2, l3) -> AdmissibleTuple:
    return AdmissibleTuple(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]), [l1, l2, l3])


# --------------------------------------------------------------------------
# exact rational helpers

def _F(a):
    return [[Fraction(float(v)) for v in row] for row in np.atleast_2d(a)]


def _solve_exact(A, b):
    """Solve the square system A x = b over Q; None if singular."""
    n = len(A)
    M = [list(A[i]) + [b[i]] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        pv = M[col][col]
        for r in range(n):
            if r != col and M[r][col] != 0:
                fac = M[r][col] / pv
                M[r] = [x - fac * y for x, y in zip(M[r], M[col])]
    return [M[i][n] / M[i][i] for i in range(n)]


def vertices_exact(A, b) -> List[Tuple[Fraction, ...]]:
    """Vertices of {y : A y <= b} (A, b rational lists); empty if none.

    Candidate supports are screened in floating point and every survivor is
    recomputed and checked exactly.
    """
    m = len(A)
    if m == 0:
        return []
    N = len(A[0])
    Af = np.array([[float(v) for v in row] for row in A])
    bf = np.array([float(v) for v in b])
    scale = 1.0 + np.abs(bf).max()
    combos = np.array(list(itertools.combinations(range(m), N)), dtype=int)
    out = set()
    if combos.size == 0:
        return []
    sub = Af[combos]                     # (C, N, N)
    det = np.linalg.det(sub)
    ok = np.abs(det) > 1e-12
    if not ok.any():
        return []
    xs = np.linalg.solve(sub[ok], bf[combos[ok]][..., None])[..., 0]
    feas = np.all(xs @ Af.T <= bf + 1e-7 * scale, axis=1)
    for comb in combos[ok][feas]:
        x = _solve_exact([A[i] for i in comb], [b[i] for i in comb])
        if x is None:
            continue
        if all(sum(a * v for a, v in zip(row, x)) <= bi for row, bi in zip(A, b)):
            out.add(tuple(x))
    return sorted(out)


def _constraints(t: AdmissibleTuple, shifts=None):
    """|L_i y - t_i| <= l_i as rational rows A y <= b."""
    L = _F(t.functionals)
    l = [Fraction(float(v)) for v in t.lengths]
    s = [Fraction(0)] * t.M if shifts is None else [Fraction(float(v)) for v in shifts]
    A, b = [], []
    for row, li, si in zip(L, l, s):
        A.append(row)
        b.append(li + si)
        A.append([-v for v in row])
        b.append(li - si)
    return A, b


def lp_max_exact(A, b, c):
    """max c.y over {A y <= b}, assumed pointed and bounded; (value, argmax) or None."""
    V = vertices_exact(A, b)
    if not V:
        return None
    vals = [sum(ci * vi for ci, vi in zip(c, v)) for v in V]
    i = max(range(len(V)), key=lambda j: (vals[j], [-x for x in V[j]]))
    return vals[i], V[i]


# --------------------------------------------------------------------------
# admissibility

@dataclass
class AdmissibilityResult:
    admissible: bool
    optima: List[float]
    witnesses: List[np.ndarray]
    exact: bool


def is_admissible(t: AdmissibleTuple, rtol: float = 1e-9) -> AdmissibilityResult:
    """For each m maximize L_m over K = {|L_i| <= l_i}; admissible iff every max is l_m."""
    spans = np.linalg.matrix_rank(t.functionals) == t.N
    if t.N <= EXACT_MAX_N and spans:
        A, b = _constraints(t)
        L = _F(t.functionals)
        V = vertices_exact(A, b)
        if V:
            optima, wit, ok = [], [], True
            for m in range(t.M):
                vals = [sum(a * x for a, x in zip(L[m], v)) for v in V]
                j = max(range(len(V)), key=lambda i: vals[i])
                optima.append(float(vals[j]))
                wit.append(np.array([float(x) for x in V[j]]))
                ok &= vals[j] == Fraction(float(t.lengths[m]))
            return AdmissibilityResult(bool(ok), optima, wit, True)
    # scipy / HiGHS
    A = np.vstack([t.functionals, -t.functionals])
    b = np.concatenate([t.lengths, t.lengths])
    optima, wit, ok = [], [], True
    for m in range(t.M):
        res = linprog(-t.functionals[m], A_ub=A, b_ub=b, bounds=[(None, None)] * t.N, method="highs")
        if res.status != 0:
            raise GHKError(f"LP for functional {m} failed: {res.message}")
        optima.append(float(-res.fun))
        wit.append(res.x)
        ok &= abs(-res.fun - t.lengths[m]) <= rtol * t.lengths[m]
    return AdmissibilityResult(bool(ok), optima, wit, False)


def validate_witness(t: AdmissibleTuple, m: int, x) -> bool:
    """Exact check that |L_m x| = l_m and |L_i x| <= l_i for all i."""
    L = _F(t.functionals)
    xs = [Fraction(v) if isinstance(v, Fraction) else Fraction(float(v)) for v in x]
    l = [Fraction(float(v)) for v in t.lengths]
    vals = [abs(sum(a * v for a, v in zip(row, xs))) for row in L]
    return vals[m] == l[m] and all(v <= li for v, li in zip(vals, l))


def strict_margin(t: AdmissibleTuple, m: int) -> Fraction:
    """max s with L_m x = l_m and |L_i x| <= l_i - s for i != m (exact)."""
    N = t.N
    L = _F(t.functionals)
    l = [Fraction(float(v)) for v in t.lengths]
    A, b = [], []
    A.append(L[m] + [Fraction(0)]); b.append(l[m])
    A.append([-v for v in L[m]] + [Fraction(0)]); b.append(-l[m])
    for i in range(t.M):
        if i == m:
            continue
        A.append(L[i] + [Fraction(1)]); b.append(l[i])
        A.append([-v for v in L[i]] + [Fraction(1)]); b.append(l[i])
    big = sum(l)
    A.append([Fraction(0)] * N + [Fraction(1)]); b.append(big)
    A.append([Fraction(0)] * N + [Fraction(-1)]); b.append(big)
    res = lp_max_exact(A, b, [Fraction(0)] * N + [Fraction(1)])
    if res is None:
        raise GHKError("strict-admissibility LP has no vertex")
    return res[0]


def is_strictly_admissible(t: AdmissibleTuple) -> bool:
    """Each constraint m is attained by a point where all other constraints are slack."""
    return all(strict_margin(t, m) > 0 for m in range(t.M))


def burchard_check(l1: float, l2: float, l3: float) -> Tuple[bool, bool]:
    """(LP strict admissibility, strict triangle inequality) for L = (x1, x2, x1 + x2)."""
    t = riesz_sobolev_tuple(l1, l2, l3)
    lp = is_strictly_admissible(t)
    a, b, c = (Fraction(float(v)) for v in (l1, l2, l3))
    tri = a < b + c and b < a + c and c < a + b
    return lp, tri


# --------------------------------------------------------------------------
# volumes

@dataclass
class VolumeEstimate:
    value: float
    stderr: float = 0.0
    exact: Optional[Fraction] = None

    def __float__(self):
        return float(self.value)


def _vol1(A, b) -> Fraction:
    lo, hi = None, None
    for (a,), bi in zip(A, b):
        if a > 0:
            v = bi / a
            hi = v if hi is None or v < hi else hi
        elif a < 0:
            v = bi / a
            lo = v if lo is None or v > lo else lo
        elif bi < 0:
            return Fraction(0)
    if lo is None or hi is None:
        raise DomainError("unbounded polytope")
    return max(hi - lo, Fraction(0))


def volume_exact(A, b) -> Fraction:
    """Volume of {y : A y <= b} for dimension <= 3, exact over Q.

    The slice volume along the last coordinate is a polynomial of degree N-1
    between consecutive vertex heights, so Simpson's rule per piece is exact.
    """
    N = len(A[0])
    if N == 1:
        return _vol1(A, b)
    V = vertices_exact(A, b)
    if len(V) < N + 1:
        return Fraction(0)
    zs = sorted({v[-1] for v in V})
    total = Fraction(0)

    def slice_vol(z):
        A2 = [row[:-1] for row in A]
        b2 = [bi - row[-1] * z for row, bi in zip(A, b)]
        return volume_exact(A2, b2)

    vals = {z: slice_vol(z) for z in zs}
    for z0, z1 in zip(zs[:-1], zs[1:]):
        mid = (z0 + z1) / 2
        total += (z1 - z0) / 6 * (vals[z0] + 4 * slice_vol(mid) + vals[z1])
    return total


def _bbox(A, b):
    V = vertices_exact(A, b)
    if not V:
        return None
    Vf = np.array([[float(x) for x in v] for v in V])
    return Vf.min(axis=0), Vf.max(axis=0)


def volume_mc(t: AdmissibleTuple, shifts, samples: int = 10 ** 6, key: Optional[int] = None,
              chunk: int = 200_000) -> VolumeEstimate:
    """Monte Carlo volume over the bounding box using a keyed Philox stream per chunk."""
    shifts = np.zeros(t.M) if shifts is None else np.asarray(shifts, float)
    A, b = _constraints(t, shifts)
    box = _bbox(A, b)
    if box is None:
        return VolumeEstimate(0.0, 0.0)
    lo, hi = box
    width = hi - lo
    bvol = float(np.prod(width))
    if bvol == 0:
        return VolumeEstimate(0.0, 0.0)
    key = t.key(shifts) if key is None else key
    hits = 0
    done = 0
    ci = 0
    while done < samples:
        m = min(chunk, samples - done)
        bg = np.random.Philox(key=key, counter=[0, 0, 0, ci])
        y = lo + width * np.random.Generator(bg).random((m, t.N))
        v = y @ t.functionals.T
        hits += int(np.sum(np.all(np.abs(v - shifts) <= t.lengths, axis=1)))
        done += m
        ci += 1
    p = hits / samples
    return VolumeEstimate(bvol * p, bvol * math.sqrt(p * (1 - p) / samples))


def psi(t: AdmissibleTuple, shifts=None, method: str = "exact", samples: int = 10 ** 6,
        key: Optional[int] = None) -> VolumeEstimate:
    """Volume of {y : |L_i(y) - t_i| <= l_i for all i}."""
    if method == "exact":
        if t.N > SLICE_MAX_N:
            raise DomainError(f"exact slicing supports N <= {SLICE_MAX_N}")
        A, b = _constraints(t, shifts)
        v = volume_exact(A, b)
        return VolumeEstimate(float(v), 0.0, v)
    if method == "mc":
        return volume_mc(t, shifts, samples, key)
    raise DomainError(f"unknown method {method!r}")


def h_profile(x: float, k: int, method: str = "exact", samples: int = 10 ** 6) -> VolumeEstimate:
    """vol{h in R^k : |x + alpha.h| <= 1 for all alpha != 0}."""
    if k < 2:
        raise DomainError("k >= 2 required")
    t = gowers_tuple(k)
    return psi(t, np.full(t.M, -float(x)), method, samples)


def h_support(k: int) -> float:
    return (k + 1) / (k - 1)


@dataclass
class PhiValue:
    value: float
    error: float
    eta_in_range: bool


def phi_profile(t: float, k: int, eta: float, epsabs: float = 1e-12) -> PhiValue:
    """phi(t) = integral of H over [-1-eta+t, 1+eta+t], by adaptive quadrature.

    Monotonicity in |t| is only claimed for eta in [0, 2/(k-1)]; outside that
    range the value is still computed and ``eta_in_range`` is False.
    """
    in_range = 0 <= eta <= 2.0 / (k - 1)
    if not in_range:
        warnings.warn(f"eta={eta} outside [0, {2.0 / (k - 1)}]; phi need not be decreasing")
    s = h_support(k)
    lo = max(-1 - eta + t, -s)
    hi = min(1 + eta + t, s)
    if hi <= lo:
        return PhiValue(0.0, 0.0, in_range)
    pts = [p for p in (-1.0, 0.0, 1.0) if lo < p < hi]
    val, err = quad(lambda x: float(h_profile(x, k).value), lo, hi, points=pts or None,
                    epsabs=epsabs, epsrel=1e-12, limit=200)
    return PhiValue(val, err, in_range)
