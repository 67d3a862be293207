"""Polynomial phase recovery from approximately polynomial R/Z-valued data.

Phases are handled through unit complex numbers exp(2 pi i psi); residuals are
measured as |exp(2 pi i u) - 1| and never as raw differences.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, RankError, SampleLookupError, SamplingError

TWO_PI = 2.0 * math.pi
MultiIndex = Tuple[int, ...]


def wrap(u):
    """Representative of u mod 1 in [-1/2, 1/2)."""
    return np.mod(np.asarray(u) + 0.5, 1.0) - 0.5


def multi_indices(n: int, deg: int) -> List[MultiIndex]:
    """All multi-indices of total degree exactly ``deg``, in lexicographic order."""
    out = [g for g in itertools.product(range(deg + 1), repeat=n) if sum(g) == deg]
    return sorted(out, reverse=True)


def monomials(x: np.ndarray, gammas: Sequence[MultiIndex]) -> np.ndarray:
    x = np.atleast_2d(x)
    return np.stack([np.prod(x ** np.asarray(g), axis=1) for g in gammas], axis=1)


@dataclass
class RealPolynomial:
    n: int
    d: int
    coeffs: Dict[MultiIndex, float] = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = {tuple(int(i) for i in g): float(c) for g, c in self.coeffs.items()}
        for g in self.coeffs:
            if len(g) != self.n:
                raise DomainError(f"multi-index {g} has wrong length for n={self.n}")
            if sum(g) > self.d:
                raise DomainError(f"multi-index {g} exceeds degree bound {self.d}")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        flat = x.reshape(-1, self.n)
        out = np.zeros(flat.shape[0])
        for g, c in self.coeffs.items():
            out += c * np.prod(flat ** np.asarray(g), axis=1)
        return out.reshape(x.shape[:-1]) if x.ndim > 1 else out

    def coef(self, g) -> float:
        return self.coeffs.get(tuple(g), 0.0)

    def canonical(self) -> "RealPolynomial":
        """Constant term mod 1, in [0, 1); zero coefficients dropped."""
        c = dict(self.coeffs)
        z = (0,) * self.n
        c[z] = float(np.mod(c.get(z, 0.0), 1.0))
        return RealPolynomial(self.n, self.d, {g: v for g, v in c.items() if v != 0.0 or g == z})

    def __add__(self, other: "RealPolynomial") -> "RealPolynomial":
        c = dict(self.coeffs)
        for g, v in other.coeffs.items():
            c[g] = c.get(g, 0.0) + v
        return RealPolynomial(self.n, max(self.d, other.d), c)

    def __sub__(self, other):
        return self + RealPolynomial(other.n, other.d, {g: -v for g, v in other.coeffs.items()})

    def max_coef_diff(self, other, skip_constant=False, constant_mod1=True) -> float:
        z = (0,) * self.n
        keys = set(self.coeffs) | set(other.coeffs)
        err = 0.0
        for g in keys:
            dv = self.coef(g) - other.coef(g)
            if g == z:
                if skip_constant:
                    continue
                if constant_mod1:
                    dv = float(wrap(dv))
            err = max(err, abs(dv))
        return err

    def to_json(self) -> list:
        return [[list(g), v] for g, v in sorted(self.coeffs.items())]

    @classmethod
    def from_json(cls, data, n: Optional[int] = None, d: Optional[int] = None):
        coeffs = {tuple(g): float(v) for g, v in data}
        if n is None:
            n = len(next(iter(coeffs))) if coeffs else 1
        if d is None:
            d = max((sum(g) for g in coeffs), default=0)
        return cls(n, d, coeffs)

    @classmethod
    def random(cls, n, d, rng, scale=2.0):
        coeffs = {}
        for deg in range(d + 1):
            for g in multi_indices(n, deg):
                coeffs[g] = float(rng.uniform(-scale, scale))
        return cls(n, d, coeffs)


@dataclass
class PhaseSamples:
    """Samples of psi: B -> R/Z with B a ball; values stored in [0, 1)."""

    points: np.ndarray
    values: np.ndarray
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, float))
        self.values = np.mod(np.asarray(self.values, float).ravel(), 1.0)
        self.center = np.atleast_1d(np.asarray(self.center, float))
        if self.points.shape[0] != self.values.size:
            raise DomainError("points and values differ in length")
        if self.points.shape[1] != self.center.size:
            raise DomainError("point dimension differs from ball centre")
        r = np.linalg.norm(self.points - self.center, axis=1)
        if np.any(r > self.radius * (1 + 1e-12) + 1e-12):
            raise DomainError("sample outside the ball")
        self._lat = None

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @classmethod
    def on_grid(cls, psi, center, radius, spacing, n=None):
        """Lattice points centre + spacing*Z^n inside the ball; values psi(points) mod 1."""
        center = np.atleast_1d(np.asarray(center, float))
        n = center.size if n is None else n
        spacing = np.broadcast_to(np.asarray(spacing, float), (n,))
        m = [int(math.floor(radius / s + 1e-9)) for s in spacing]
        idx = np.stack(np.meshgrid(*[np.arange(-mi, mi + 1) for mi in m], indexing="ij"), -1).reshape(-1, n)
        pts = center + idx * spacing
        keep = np.linalg.norm(pts - center, axis=1) <= radius * (1 + 1e-12)
        pts = pts[keep]
        return cls(pts, psi(pts), center, radius)

    # lattice view -------------------------------------------------------
    def lattice(self):
        if self._lat is None:
            self._lat = _Lattice.from_points(self.points, self.values)
        return self._lat

    def value_at(self, x) -> float:
        lat = self.lattice()
        return lat.lookup(np.asarray(x, float))

    # io -----------------------------------------------------------------
    def save(self, path):
        header = {"format": "ghk-phase1", "n": self.n, "m": int(self.values.size),
                  "center": self.center.tolist(), "radius": float(self.radius)}
        with open(path, "wb") as fh:
            fh.write((json.dumps(header, sort_keys=True) + "\n").encode("ascii"))
            fh.write(np.ascontiguousarray(self.points, "<f8").tobytes())
            fh.write(np.ascontiguousarray(self.values, "<f8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            data = fh.read()
        nl = data.index(b"\n")
        h = json.loads(data[:nl].decode("ascii"))
        n, m = int(h["n"]), int(h["m"])
        body = data[nl + 1:]
        if len(body) != 8 * m * (n + 1):
            raise DomainError("phase sample file has wrong payload size")
        pts = np.frombuffer(body[:8 * m * n], "<f8").reshape(m, n)
        vals = np.frombuffer(body[8 * m * n:], "<f8")
        return cls(pts.copy(), vals.copy(), np.array(h["center"]), float(h["radius"]))


class _Lattice:
    """Samples placed in a dense array; missing cells are masked."""

    def __init__(self, origin, spacing, z, mask):
        self.origin = origin
        self.spacing = spacing
        self.z = z
        self.mask = mask

    @classmethod
    def from_points(cls, pts, values, tol=1e-6):
        n = pts.shape[1]
        origin = pts.min(axis=0)
        spacing = np.ones(n)
        for i in range(n):
            u = np.unique(pts[:, i])
            if u.size > 1:
                spacing[i] = np.min(np.diff(u))
        fidx = (pts - origin) / spacing
        idx = np.rint(fidx).astype(np.int64)
        if np.max(np.abs(fidx - idx), initial=0.0) > tol:
            raise SamplingError("samples do not lie on a regular lattice")
        shape = tuple(idx.max(axis=0) + 1)
        z = np.zeros(shape, complex)
        mask = np.zeros(shape, bool)
        z[tuple(idx.T)] = np.exp(1j * TWO_PI * values)
        mask[tuple(idx.T)] = True
        return cls(origin, spacing, z, mask)

    def coords(self):
        ax = [o + s * np.arange(m) for o, s, m in zip(self.origin, self.spacing, self.z.shape)]
        return np.stack(np.meshgrid(*ax, indexing="ij"), -1)

    def lookup(self, x, tol=1e-6):
        f = (x - self.origin) / self.spacing
        i = np.rint(f).astype(int)
        if np.any(np.abs(f - i) > tol) or np.any(i < 0) or np.any(i >= self.z.shape) \
                or not self.mask[tuple(i)]:
            raise SampleLookupError(f"no sample at {x}")
        return float(np.mod(np.angle(self.z[tuple(i)]) / TWO_PI, 1.0))


def _shift_masked(z, mask, h):
    """out[x] = z[x + h] with availability mask (no wraparound)."""
    from .grid import _overlap_slices
    oz = np.zeros_like(z)
    om = np.zeros_like(mask)
    src, dst = _overlap_slices(z.shape, h)
    oz[dst] = z[src]
    om[dst] = mask[src]
    return oz, om


# --------------------------------------------------------------------------
# multiplicative derivative

def mult_derivative(s: PhaseSamples, x, hs) -> complex:
    """exp(2 pi i sum_alpha (-1)^(k-|alpha|) psi(x + alpha.h)) for offsets h_1..h_k."""
    x = np.atleast_1d(np.asarray(x, float))
    hs = [np.atleast_1d(np.asarray(h, float)) for h in hs]
    k = len(hs)
    acc = 0.0
    for bits in itertools.product((0, 1), repeat=k):
        pt = x + sum(b * h for b, h in zip(bits, hs))
        sign = -1.0 if (k - sum(bits)) % 2 else 1.0
        acc += sign * s.value_at(pt)
    return complex(np.exp(1j * TWO_PI * acc))


# --------------------------------------------------------------------------
# affine recovery

@dataclass
class AffineMap:
    v: np.ndarray
    b: complex | float
    inlier_fraction: float = 1.0

    def __call__(self, x):
        return np.atleast_2d(x) @ self.v + self.b


def _consensus_slopes(x, a, n, rng, n_subsets=200, intercept=True):
    """Coordinate-wise median slope estimates.

    Uses difference quotients between points that share all other coordinates
    when such pairs exist; otherwise medians of exact fits on random minimal subsets.
    """
    v = np.full(n, np.nan)
    for i in range(n):
        other = np.delete(x, i, axis=1)
        key = np.round(other, 9)
        order = np.lexsort(np.vstack([x[:, i], key.T[::-1]]) if n > 1 else x[:, i][None])
        xs, ks, as_ = x[order, i], key[order], a[order]
        same = np.all(ks[1:] == ks[:-1], axis=1) if n > 1 else np.ones(len(xs) - 1, bool)
        dx = xs[1:] - xs[:-1]
        ok = same & (np.abs(dx) > 1e-12)
        if ok.sum() >= 1:
            v[i] = np.median((as_[1:] - as_[:-1])[ok] / dx[ok])
    if np.any(np.isnan(v)):
        p = n + 1 if intercept else n
        ests = []
        for _ in range(n_subsets):
            sel = rng.choice(len(a), size=p, replace=False)
            D = np.hstack([x[sel], np.ones((p, 1))]) if intercept else x[sel]
            if abs(np.linalg.det(D)) < 1e-12:
                continue
            ests.append(np.linalg.solve(D, a[sel])[:n])
        if not ests:
            raise RankError("no non-degenerate minimal subset for slope consensus")
        med = np.median(np.array(ests), axis=0)
        v = np.where(np.isnan(v), med, v)
    return v


def _mad(r):
    return 1.4826 * float(np.median(np.abs(r)))


def affine_recover(x, y, ax, by, gxy, tau: Optional[float], intercept: bool = True,
                   K: float = 4.0, seed: int = 0, trace: Optional[list] = None) -> AffineMap:
    """Recover an affine L approximating alpha from triples alpha(x), beta(y), gamma(x+y).

    Triples violating |alpha(x) + beta(y) - gamma(x+y)| <= tau are discarded, the
    slope is a coordinate-wise median consensus, the intercept a median
    residual, and one least-squares pass over samples within 3 K tau refines both.
    With ``intercept=False`` the map is forced linear.  ``tau=None`` replaces
    tau by a robust (MAD) scale of the residuals at each stage.
    """
    x = np.atleast_2d(np.asarray(x, float))
    ax = np.asarray(ax).ravel()
    if np.iscomplexobj(ax) or np.iscomplexobj(by) or np.iscomplexobj(gxy):
        re = affine_recover(x, y, np.real(ax), np.real(by), np.real(gxy), tau, intercept, K, seed)
        im = affine_recover(x, y, np.imag(ax), np.imag(by), np.imag(gxy), tau, intercept, K, seed)
        return AffineMap(re.v + 1j * im.v, re.b + 1j * im.b,
                         min(re.inlier_fraction, im.inlier_fraction))
    n = x.shape[1]
    unknowns = n + (1 if intercept else 0)
    if ax.size < unknowns:
        raise RankError(f"{ax.size} samples for {unknowns} unknowns")
    by = np.asarray(by, float).ravel()
    gxy = np.asarray(gxy, float).ravel()
    floor = 1e-12 * max(1.0, float(np.max(np.abs(ax), initial=0.0)))
    viol = np.abs(ax + by - gxy)
    tc = max(3 * _mad(viol), floor) if tau is None else tau
    consistent = viol <= tc
    if consistent.sum() < unknowns:
        consistent = np.ones_like(consistent)
    xs, as_ = x[consistent], ax[consistent]
    rng = np.random.default_rng(seed)
    v = _consensus_slopes(xs, as_, n, rng, intercept=intercept)
    b = float(np.median(as_ - xs @ v)) if intercept else 0.0
    resid = np.abs(ax - (x @ v + b))
    tr = max(_mad(resid[consistent]), floor) if tau is None else tau
    inl = resid <= 3 * K * tr
    if inl.sum() < unknowns:
        raise RankError("too few inliers for the refinement fit")
    D = np.hstack([x[inl], np.ones((inl.sum(), 1))]) if intercept else x[inl]
    if np.linalg.matrix_rank(D) < unknowns:
        raise RankError("design matrix is rank deficient")
    sol, *_ = np.linalg.lstsq(D, ax[inl], rcond=None)
    v = sol[:n]
    b = float(sol[n]) if intercept else 0.0
    if trace is not None:
        Df = np.hstack([x[inl], np.ones((inl.sum(), 1))])
        free, *_ = np.linalg.lstsq(Df, ax[inl], rcond=None)
        trace.append(float(free[n]))
    final = np.abs(ax - (x @ v + b)) <= K * tr
    return AffineMap(v, b, float(final.mean()))


# --------------------------------------------------------------------------
# polynomial phase recovery

def stencil_set(n: int, J: int = 3) -> np.ndarray:
    """Lattice offsets with nonnegative entries, 1 <= |h|_1 <= J."""
    hs = [h for h in itertools.product(range(J + 1), repeat=n) if 1 <= sum(h) <= J]
    return np.array(sorted(hs, key=lambda h: (sum(h), tuple(-np.array(h)))), dtype=int)


def _circular_mean(z, mask, min_count=3):
    w = z[mask]
    if w.size < min_count:
        raise SamplingError(f"only {w.size} stencil samples available")
    c = np.angle(np.mean(w)) / TWO_PI
    for _ in range(3):
        r = np.abs(w * np.exp(-1j * TWO_PI * c) - 1.0)
        thr = max(3.0 * float(np.median(r)), 1e-12)
        inl = r <= thr
        c = np.angle(np.mean(w[inl])) / TWO_PI
    return float(np.mod(c, 1.0))


class _Recovery:
    def __init__(self, lat: _Lattice, tau: float, J: int, seed: int, stride: int = 1):
        self.lat = lat
        self.n = lat.z.ndim
        self.tau = tau
        self.H = stride * stencil_set(self.n, J)
        self.Hphys = self.H * lat.spacing
        self.seed = seed
        self.trace: List[float] = []
        hset = {tuple(h): i for i, h in enumerate(self.H)}
        pairs = []
        for i, h1 in enumerate(self.H):
            for j, h2 in enumerate(self.H):
                s = tuple(h1 + h2)
                if s in hset:
                    pairs.append((i, j, hset[s]))
        self.pairs = np.array(pairs, int)

    def _fit_linear(self, vals: np.ndarray, level: int) -> np.ndarray:
        """Fit vals[h] = <A, h> (zero intercept) over the stencil set."""
        if len(self.H) < self.n or np.linalg.matrix_rank(self.Hphys) < self.n:
            raise RankError("stencil set cannot determine a linear map", level)
        i, j, s = self.pairs.T
        try:
            am = affine_recover(self.Hphys[i], self.Hphys[j], vals[i], vals[j], vals[s],
                                tau=None, intercept=False, seed=self.seed,
                                trace=self.trace)
        except RankError as e:
            raise RankError(str(e), level) from None
        return am.v

    def top(self, z, mask, d, level=0) -> Dict[MultiIndex, float]:
        """Coefficients of the degree-d homogeneous part of the phase of z."""
        n = self.n
        if d == 0:
            return {(0,) * n: _circular_mean(z, mask)}
        gam = multi_indices(n, d - 1)
        vals = np.zeros((len(self.H), len(gam)))
        for hi, h in enumerate(self.H):
            zs, ms = _shift_masked(z, mask, h)
            dz = zs * np.conj(z)
            dm = ms & mask
            sub = self.top(dz, dm, d - 1, level + 1)
            vals[hi] = [sub[g] for g in gam]
        if d == 1:
            # constants known only mod 1: unwrap against a consensus slope
            c = vals[:, 0]
            A0 = np.zeros(n)
            for ax in range(n):
                qs = []
                prev = 0.0
                step = int(np.min(self.H[self.H[:, ax] > 0, ax]))
                for jm in range(1, len(self.H) + 1):
                    e = np.zeros(n, int)
                    e[ax] = jm * step
                    hit = np.flatnonzero(np.all(self.H == e, axis=1))
                    if hit.size == 0:
                        break
                    qs.append(float(wrap(c[hit[0]] - prev)))
                    prev = c[hit[0]]
                if not qs:
                    raise RankError(f"no axis stencils along axis {ax}", level)
                A0[ax] = np.median(qs) / (step * self.lat.spacing[ax])
            pred = self.Hphys @ A0
            vals[:, 0] = pred + wrap(c - pred)
        A = np.stack([self._fit_linear(vals[:, gi], level) for gi in range(len(gam))])
        return self._antiderivative(gam, A, d, level)

    def _antiderivative(self, gam, A, d, level):
        """Homogeneous q of degree d with d_i q = sum_gamma A[gamma, i] x^gamma (least squares)."""
        n = self.n
        betas = multi_indices(n, d)
        bidx = {b: i for i, b in enumerate(betas)}
        rows, rhs = [], []
        for gi, g in enumerate(gam):
            for i in range(n):
                b = list(g)
                b[i] += 1
                row = np.zeros(len(betas))
                row[bidx[tuple(b)]] = g[i] + 1
                rows.append(row)
                rhs.append(A[gi, i])
        c, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
        return {b: float(c[i]) for i, b in enumerate(betas)}


@dataclass
class PhaseRecoveryResult:
    poly: RealPolynomial
    inlier_fraction: float
    rho: float
    intercepts: List[float]


def poly_phase_recover(s: PhaseSamples, k: int, tau: float = 0.05, J: int = 3,
                       seed: int = 0, stride: int = 1) -> PhaseRecoveryResult:
    """Polynomial P of degree <= k-1 with exp(2 pi i psi) ~ exp(2 pi i P).

    Degree by degree from the top: the top coefficients come from the linear
    dependence of the top coefficients of Delta_h psi on h; the corresponding
    homogeneous polynomial is removed before the next degree is treated.
    Samples must lie on a lattice; stencil offsets are ``stride`` times the
    vectors of ``stencil_set(n, J)`` in lattice units.  Larger strides average
    noise better but the linear level must not alias (|slope * step| < 1/2). ``inlier_fraction`` counts samples with
    |exp(2 pi i (psi - P)) - 1| <= tau; ``rho`` is the largest inlier residual.
    """
    if k < 1:
        raise DomainError("k >= 1 required")
    lat = s.lattice()
    rec = _Recovery(lat, tau, J, seed, stride)
    X = lat.coords()
    z = lat.z.copy()
    mask = lat.mask
    coeffs: Dict[MultiIndex, float] = {}
    for d in range(k - 1, -1, -1):
        top = rec.top(z, mask, d)
        coeffs.update(top)
        q = RealPolynomial(s.n, d, top)
        z = z * np.exp(-1j * TWO_PI * q(X))
    P = RealPolynomial(s.n, k - 1, coeffs).canonical()
    r = np.abs(np.exp(1j * TWO_PI * (s.values - P(s.points))) - 1.0)
    inl = r <= tau
    rho = float(r[inl].max()) if inl.any() else float("nan")
    return PhaseRecoveryResult(P, float(inl.mean()), rho, rec.trace)
