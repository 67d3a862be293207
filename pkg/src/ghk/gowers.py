"""Gowers-Host-Kra norms, Gowers inner products and their sharp constants.

Cube vertices alpha in {0,1}^k are encoded as integers with bit i-1 holding
alpha_i, so ``fs[a]`` is the function at vertex a.  Slots with an odd number
of ones are conjugated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy import fft as sfft

from .errors import BudgetError, DomainError, ParameterError, ShapeError
from .grid import GridFunction, _overlap_slices, lp_norm, require_same_grid

DEFAULT_BUDGET = 1e8


# --------------------------------------------------------------------------
# constants

def holder_exponent(k: int) -> float:
    if k < 1:
        raise DomainError("k >= 1 required")
    return 2.0 ** k / (k + 1)


def sharp_constant(k: int, n: int = 1) -> float:
    """A(k, n) = (2^(k/2^k) / (k+1)^((k+1)/2^(k+1)))^n; A(1, n) = 1."""
    if k < 1 or n < 1:
        raise DomainError("k >= 1 and n >= 1 required")
    if k == 1:
        return 1.0
    a1 = 2.0 ** (k / 2.0 ** k) / (k + 1) ** ((k + 1) / 2.0 ** (k + 1))
    return a1 ** n


def young_c(t: float) -> float:
    """C_t = (t^(1/t) / t'^(1/t'))^(1/2) with 1/t + 1/t' = 1."""
    if not t > 1:
        raise DomainError(f"young_c needs t > 1, got {t}")
    if math.isinf(t):
        return 1.0
    tp = t / (t - 1.0)
    return math.sqrt(t ** (1.0 / t) / tp ** (1.0 / tp))


def young_sharp_constant(p: float, q: float, r: float, n: int = 1) -> float:
    """Best constant in ||f*g||_r <= K ||f||_p ||g||_q, 1/p + 1/q = 1 + 1/r."""
    if abs(1 / p + 1 / q - 1 - 1 / r) > 1e-12:
        raise DomainError("exponents violate 1/p + 1/q = 1 + 1/r")
    rp = r / (r - 1.0)
    return (young_c(p) * young_c(q) * young_c(rp)) ** n


def sharp_young_B(k: int, n: int = 1) -> float:
    """B(k+1, n) defined by A(k)^(2^k) B(k+1)^(k+1) = A(k+1)^(2^(k+1))."""
    if k < 1:
        raise DomainError("k >= 1 required")
    a_next = sharp_constant(k + 1, n) ** (2.0 ** (k + 1))
    a_cur = sharp_constant(k, n) ** (2.0 ** k)
    return (a_next / a_cur) ** (1.0 / (k + 1))


def sharp_constant_from_young(k: int, n: int = 1) -> float:
    """A(k) rebuilt from Young constants: (C_{2k/(k+1)}^2 / C_k)^(k/2^k) A(k-1)^(1/2).

    C_1 is the limit value 1 (t' = inf).
    """
    if k == 1:
        return 1.0
    ck = young_c(k) if k > 1 else 1.0
    ratio = young_c(2.0 * k / (k + 1)) ** 2 / ck
    return (ratio ** (k / 2.0 ** k) * sharp_constant_from_young(k - 1, 1) ** 0.5) ** n


# --------------------------------------------------------------------------
# multilinear forms on arrays

def _trim(arrs: List[np.ndarray]) -> List[np.ndarray]:
    """Crop the common all-zero border (all forms here are translation invariant)."""
    nz = np.zeros(arrs[0].shape, bool)
    for a in arrs:
        nz |= a != 0
    if not nz.any():
        return [a[tuple(slice(0, 0) for _ in a.shape)] for a in arrs]
    sl = []
    for ax in range(nz.ndim):
        other = tuple(i for i in range(nz.ndim) if i != ax)
        idx = np.flatnonzero(nz.any(axis=other) if other else nz)
        sl.append(slice(idx[0], idx[-1] + 1))
    sl = tuple(sl)
    return [a[sl] for a in arrs]


def _fft_shape(shape):
    return tuple(sfft.next_fast_len(2 * m, real=False) for m in shape)


def _u2_pow4(a: np.ndarray, cellvol: float) -> float:
    (a,) = _trim([a])
    if a.size == 0:
        return 0.0
    L = _fft_shape(a.shape)
    F = sfft.fftn(a, s=L)
    w = (F.real * F.real + F.imag * F.imag)
    return float(np.sum(w * w)) * cellvol ** 3 / float(np.prod(L))


def _inner2_fft(arrs, cellvol) -> complex:
    arrs = _trim(list(arrs))
    if arrs[0].size == 0:
        return 0j
    L = _fft_shape(arrs[0].shape)
    F = [sfft.fftn(a, s=L) for a in arrs]
    s = np.sum(F[0] * F[3] * np.conj(F[1] * F[2]))
    return complex(s) * cellvol ** 3 / float(np.prod(L))


def _inner1(arrs, cellvol) -> complex:
    return complex(np.sum(arrs[0]) * cellvol) * np.conj(complex(np.sum(arrs[1]) * cellvol))


def _offsets(shape):
    rngs = [range(-(m - 1), m) for m in shape]
    return np.stack(np.meshgrid(*rngs, indexing="ij"), -1).reshape(-1, len(shape)) if shape else np.zeros((1, 0), int)


def _inner_rec(arrs, k, cellvol, base) -> complex:
    if k == 1:
        return _inner1(arrs, cellvol)
    if k == 2 and base == 2:
        return _inner2_fft(arrs, cellvol)
    arrs = _trim(list(arrs))
    if arrs[0].size == 0:
        return 0j
    half = len(arrs) // 2
    total = 0j
    for h in _offsets(arrs[0].shape):
        src, dst = _overlap_slices(arrs[0].shape, h)
        # g(y) = f_(a,0)(y) conj(f_(a,1)(y + h))
        gs = [arrs[i][dst] * np.conj(arrs[i + half][src]) for i in range(half)]
        if any(not g.any() for g in gs):
            continue
        total += _inner_rec(gs, k - 1, cellvol, base)
    return total * cellvol


def _norm_rec(a, k, cellvol, base) -> float:
    """||a||_{U^k}^(2^k)."""
    if k == 1:
        return abs(complex(np.sum(a)) * cellvol) ** 2
    if k == 2 and base == 2:
        return _u2_pow4(a, cellvol)
    (a,) = _trim([a])
    if a.size == 0:
        return 0.0
    total = 0.0
    # h and -h give conjugate-translated slices with equal norms; visit h >= 0
    # in lexicographic order once and double.
    for h in _offsets(a.shape):
        nzh = np.flatnonzero(h)
        if nzh.size and h[nzh[0]] < 0:
            continue
        src, dst = _overlap_slices(a.shape, h)
        g = a[src] * np.conj(a[dst])
        if not g.any():
            continue
        v = _norm_rec(g, k - 1, cellvol, base)
        total += v if nzh.size == 0 else 2.0 * v
    return total * cellvol


def cost_estimate(shape: Sequence[int], k: int, base: int = 2) -> float:
    """Rough count of inner evaluations: (#lattice offsets)^(k-base) * cells."""
    slices = float(np.prod([2 * m - 1 for m in shape])) ** max(k - base, 0)
    return slices * float(np.prod(shape))


def _guard(shape, k, base, budget):
    budget = DEFAULT_BUDGET if budget is None else budget
    est = cost_estimate(shape, k, base)
    if est > budget:
        raise BudgetError(f"estimated {est:.3g} evaluations exceeds budget {budget:.3g} "
                          f"(shape={tuple(shape)}, k={k})")


def u2_norm(f: GridFunction) -> float:
    """||f||_{U^2} = ||f^||_4 via a zero-padded FFT (padding >= 2x per axis)."""
    return _u2_pow4(f.values, f.cellvol) ** 0.25


def uk_norm(f: GridFunction, k: int, budget: float | None = None, base: int = 2) -> float:
    """||f||_{U^k} by recursion over lattice offsets.

    ``base`` selects where the recursion stops: 2 (FFT evaluation of U^2, the
    default) or 1 (direct sums down to U^1).
    """
    if k < 1:
        raise DomainError("k >= 1 required")
    if base not in (1, 2):
        raise DomainError("base must be 1 or 2")
    if k == 1:
        return abs(complex(np.sum(f.values)) * f.cellvol)
    _guard(f.shape, k, min(base, k), budget)
    v = _norm_rec(f.values, k, f.cellvol, base)
    return abs(v) ** (1.0 / 2 ** k)


def gowers_inner(fs: Sequence[GridFunction], k: int, budget: float | None = None,
                 base: int = 2) -> complex:
    """T_k(f_alpha): integral of prod_alpha C^{|alpha| odd} f_alpha(x + alpha.h)."""
    if k < 1:
        raise DomainError("k >= 1 required")
    fs = list(fs)
    if len(fs) != 2 ** k:
        raise ShapeError(f"need 2^k = {2 ** k} functions, got {len(fs)}")
    require_same_grid(*fs)
    _guard(fs[0].shape, k, min(base, k), budget)
    return _inner_rec([g.values for g in fs], k, fs[0].cellvol, base)


def deficit(f: GridFunction, k: int, budget: float | None = None) -> float:
    """delta = 1 - ||f||_{U^k} / (A(k,n) ||f||_{p_k}); not clamped."""
    npk = lp_norm(f, holder_exponent(k))
    if npk == 0:
        raise DomainError("deficit of the zero function is undefined")
    return 1.0 - uk_norm(f, k, budget) / (sharp_constant(k, f.n) * npk)


# --------------------------------------------------------------------------
# Gaussian tuples

@dataclass
class GaussianTuple:
    """2^k Gaussians m_a exp(-(x - c_a).M_a(x - c_a)), vertex a encoded as above."""

    k: int
    n: int
    m: np.ndarray   # (2^k,)
    M: np.ndarray   # (2^k, n, n)
    c: np.ndarray   # (2^k, n)

    def __post_init__(self):
        K = 2 ** self.k
        self.m = np.asarray(self.m, float).reshape(K)
        self.M = np.asarray(self.M, float).reshape(K, self.n, self.n)
        self.c = np.asarray(self.c, float).reshape(K, self.n)
        if np.any(self.m <= 0):
            raise ParameterError("amplitudes must be positive")
        for a in range(K):
            if not np.allclose(self.M[a], self.M[a].T):
                raise ParameterError(f"M[{a}] not symmetric")
            try:
                np.linalg.cholesky(self.M[a])
            except np.linalg.LinAlgError:
                raise ParameterError(f"M[{a}] not positive-definite") from None

    @classmethod
    def scalar(cls, k, m, a, c):
        K = 2 ** k
        return cls(k, 1, m, np.asarray(a, float).reshape(K, 1, 1), np.asarray(c, float).reshape(K, 1))

    def sample(self, shape, box) -> List[GridFunction]:
        from .grid import sample
        out = []
        for a in range(2 ** self.k):
            Ma, ca, ma = self.M[a], self.c[a], self.m[a]
            out.append(sample(lambda x: ma * np.exp(-np.einsum("...i,ij,...j->...", x - ca, Ma, x - ca)),
                              shape, box))
        return out


def vertex_bits(a: int, k: int) -> np.ndarray:
    return np.array([(a >> i) & 1 for i in range(k)], float)


def gaussian_tuple_inner(t: GaussianTuple) -> float:
    """Closed form of T_k on a Gaussian tuple (a (k+1)n-dimensional Gaussian integral)."""
    k, n = t.k, t.n
    d = (k + 1) * n
    Q = np.zeros((d, d))
    rhs = np.zeros(d)
    Bs = []
    for a in range(2 ** k):
        b = np.concatenate([[1.0], vertex_bits(a, k)])
        B = np.kron(b[None, :], np.eye(n))          # n x d, B z = x + alpha.h
        Bs.append(B)
        Q += B.T @ t.M[a] @ B
        rhs += B.T @ t.M[a] @ t.c[a]
    try:
        L = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        raise RuntimeError("singular quadratic form in gaussian_tuple_inner") from None
    T = np.linalg.solve(Q, rhs)
    expo = 0.0
    for a in range(2 ** k):
        r = t.c[a] - Bs[a] @ T
        expo += r @ t.M[a] @ r
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return float(np.prod(t.m) * math.pi ** (d / 2) * math.exp(-0.5 * logdet - expo))


def unit_gaussian_amplitude(k: int, M: np.ndarray) -> float:
    """m such that m exp(-x.Mx) has unit L^{p_k} norm."""
    p = holder_exponent(k)
    M = np.atleast_2d(M)
    n = M.shape[0]
    # int exp(-p x.Mx) = pi^(n/2) / sqrt(det(pM))
    integral = math.pi ** (n / 2) / math.sqrt(np.linalg.det(p * M))
    return integral ** (-1.0 / p)
