"""Gaussian extremizers C exp(-(x-c).M(x-c)) exp(2 pi i P(x)) and fitting them."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, GHKError, ParameterError
from .grid import GridFunction, lp_norm, make_grid
from .gowers import holder_exponent
from .phase import PhaseSamples, RealPolynomial, multi_indices, poly_phase_recover

MultiIndex = Tuple[int, ...]
M_FLOOR = 1e-9


def phase_indices(n: int, k: int) -> List[MultiIndex]:
    """Multi-indices of degree <= k-1, constant first."""
    out = []
    for d in range(k):
        out.extend(sorted(multi_indices(n, d)))
    return out


@dataclass
class ExtremizerParams:
    k: int
    n: int
    amplitude: complex
    c: np.ndarray
    M: np.ndarray
    P: Dict[MultiIndex, float] = field(default_factory=dict)
    notes: Tuple[str, ...] = ()

    def __post_init__(self):
        self.amplitude = complex(self.amplitude)
        self.c = np.atleast_1d(np.asarray(self.c, float)).reshape(self.n)
        self.M = np.asarray(self.M, float).reshape(self.n, self.n)
        self.P = {tuple(int(i) for i in g): float(v) for g, v in self.P.items()}
        if self.amplitude == 0:
            raise ParameterError("amplitude must be nonzero")
        for g in self.P:
            if len(g) != self.n or sum(g) > self.k - 1:
                raise ParameterError(f"phase term {g} not allowed for n={self.n}, k={self.k}")

    def check_M(self):
        if not np.allclose(self.M, self.M.T, rtol=1e-12, atol=1e-14):
            raise ParameterError("M is not symmetric")
        try:
            return np.linalg.cholesky(self.M)
        except np.linalg.LinAlgError:
            raise ParameterError("M is not positive-definite") from None

    def poly(self) -> RealPolynomial:
        return RealPolynomial(self.n, max(self.k - 1, 0), self.P)

    def to_json(self) -> dict:
        return {
            "k": self.k, "n": self.n,
            "amplitude_re": self.amplitude.real, "amplitude_im": self.amplitude.imag,
            "c": self.c.tolist(),
            "M": self.M.ravel().tolist(),
            "P": [[list(g), v] for g, v in sorted(self.P.items())],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ExtremizerParams":
        n = int(d["n"])
        return cls(int(d["k"]), n, complex(d.get("amplitude_re", 1.0), d.get("amplitude_im", 0.0)),
                   np.asarray(d.get("c", [0.0] * n)), np.asarray(d.get("M", np.eye(n).ravel())),
                   {tuple(g): v for g, v in d.get("P", [])})

    @classmethod
    def standard(cls, k: int, n: int = 1, unit: bool = True):
        """Centred exp(-|x|^2), scaled to unit L^{p_k} norm if ``unit``."""
        p = cls(k, n, 1.0, np.zeros(n), np.eye(n))
        if unit:
            p.amplitude = 1.0 / gaussian_lp_norm(p, holder_exponent(k))
        return p

    @classmethod
    def random(cls, k, n, rng, center_scale=0.5, phase_scale=0.5):
        A = rng.normal(size=(n, n)) * 0.3
        M = np.eye(n) * rng.uniform(0.6, 1.6) + A @ A.T
        P = {g: float(rng.uniform(-phase_scale, phase_scale)) for g in phase_indices(n, k)}
        P[(0,) * n] = float(rng.uniform(0, 1))
        return cls(k, n, complex(rng.uniform(0.5, 2.0)), rng.uniform(-center_scale, center_scale, n), M, P)


def gaussian_lp_norm(params: ExtremizerParams, p: float) -> float:
    """Exact continuum L^p norm of the extremizer."""
    integral = math.pi ** (params.n / 2) / math.sqrt(np.linalg.det(p * params.M))
    return abs(params.amplitude) * integral ** (1.0 / p)


def _grid_template(shape, box=None, like: Optional[GridFunction] = None):
    if like is not None:
        return like.shape, like.spacing, like.origin
    shape = tuple(int(m) for m in np.atleast_1d(shape))
    spacing, origin = make_grid(shape, box)
    return shape, spacing, origin


def synthesize(params: ExtremizerParams, shape=None, box=None, like: Optional[GridFunction] = None,
               warn: bool = True) -> GridFunction:
    """Sample the extremizer at cell centres of the grid (shape, box) or of ``like``."""
    params.check_M()
    shape, spacing, origin = _grid_template(shape, box, like)
    g = GridFunction(np.zeros(shape, complex), spacing, origin)
    X = g.coords()
    u = X - params.c
    quad = np.einsum("...i,ij,...j->...", u, params.M, u)
    ph = params.poly()(X) if params.P else 0.0
    vals = params.amplitude * np.exp(-quad) * np.exp(2j * math.pi * ph)
    if warn:
        lo = np.array(origin) - np.array(spacing) / 2
        hi = lo + np.array(spacing) * np.array(shape)
        sd = 1.0 / np.sqrt(2 * np.linalg.eigvalsh(params.M).min())
        if np.any(params.c - 4 * sd < lo) or np.any(params.c + 4 * sd > hi):
            warnings.warn("grid box leaves less than 4 standard deviations around the centre")
    return g.with_values(vals)


def normalize(f: GridFunction, p: float) -> GridFunction:
    nrm = lp_norm(f, p)
    if nrm == 0:
        raise DomainError("cannot normalize the zero function")
    return f.with_values(f.values / nrm)


def moment_init(f: GridFunction, k: int) -> ExtremizerParams:
    """Moment-based starting point for ``fit``.

    Centre and inverse covariance of |f|^{p_k}; for exp(-p x.Mx) the covariance
    is (2 p M)^{-1}, which fixes the scaling.  The phase is recovered on the bulk
    {|f| > max|f|/2}.
    """
    p = holder_exponent(k)
    n = f.n
    a = np.abs(f.values)
    w = a ** p
    tot = w.sum()
    if tot == 0:
        raise DomainError("moment_init of the zero function")
    X = f.coords().reshape(-1, n)
    wf = w.ravel() / tot
    c = wf @ X
    u = X - c
    cov = (u * wf[:, None]).T @ u
    notes = []
    ev = np.linalg.eigvalsh(cov)
    if ev.min() <= 1e-12 * max(ev.max(), 1e-300):
        M = np.eye(n)
        notes.append("degenerate-moments")
    else:
        M = np.linalg.inv(cov) / (2 * p)
        M = 0.5 * (M + M.T)
    P = {g: 0.0 for g in phase_indices(n, k)}
    bulk = (a > 0.5 * a.max()).ravel()
    if k >= 1 and bulk.sum() >= 3:
        pts = X[bulk]
        ctr = pts.mean(axis=0)
        rad = float(np.max(np.linalg.norm(pts - ctr, axis=1)))
        try:
            samples = PhaseSamples(pts, f.phase().ravel()[bulk], ctr, rad)
            res = poly_phase_recover(samples, k)
            P.update(res.poly.coeffs)
        except GHKError:
            notes.append("phase-recovery-failed")
            P[(0,) * n] = float(np.mod(np.angle(np.sum(f.values.ravel()[bulk])) / (2 * math.pi), 1.0))
    out = ExtremizerParams(k, n, 1.0, c, M, P, tuple(notes))
    out.amplitude = lp_norm(f, p) / gaussian_lp_norm(out, p)
    return out


# --------------------------------------------------------------------------
# fitting

class _Objective:
    def __init__(self, f: GridFunction, k: int):
        self.f = f
        self.k = k
        self.p = holder_exponent(k)
        self.n = f.n
        self.X = f.coords().reshape(-1, self.n)
        self.target = f.values.ravel()
        self.gammas = phase_indices(self.n, k)
        self.mono = np.stack([np.prod(self.X ** np.asarray(g), axis=1) for g in self.gammas], axis=1)
        self.tri = np.triu_indices(self.n)
        self.norm_p = float(np.sum(np.abs(self.target) ** self.p))
        self.evals = 0

    def pack(self, prm: ExtremizerParams) -> np.ndarray:
        G = np.linalg.cholesky(prm.M - M_FLOOR * np.eye(self.n)
                               if np.linalg.eigvalsh(prm.M).min() > 2 * M_FLOOR else prm.M).T
        P = prm.P
        phase0 = np.angle(prm.amplitude) / (2 * math.pi)
        pc = np.array([P.get(g, 0.0) for g in self.gammas])
        pc[0] += phase0
        return np.concatenate([[math.log(abs(prm.amplitude))], prm.c, G[self.tri], pc])

    def unpack(self, th: np.ndarray) -> ExtremizerParams:
        n = self.n
        logA = th[0]
        c = th[1:1 + n]
        m = len(self.tri[0])
        G = np.zeros((n, n))
        G[self.tri] = th[1 + n:1 + n + m]
        M = G.T @ G + M_FLOOR * np.eye(n)
        pc = th[1 + n + m:]
        P = {g: float(v) for g, v in zip(self.gammas, pc)}
        P[(0,) * n] = float(np.mod(P[(0,) * n], 1.0))
        return ExtremizerParams(self.k, n, math.exp(logA), c, M, P)

    def values(self, th):
        n = self.n
        m = len(self.tri[0])
        c = th[1:1 + n]
        G = np.zeros((n, n))
        G[self.tri] = th[1 + n:1 + n + m]
        M = G.T @ G + M_FLOOR * np.eye(n)
        u = self.X - c
        quad = np.einsum("ij,jk,ik->i", u, M, u)
        ph = self.mono @ th[1 + n + m:]
        return np.exp(th[0] - quad + 2j * math.pi * ph)

    def __call__(self, th) -> float:
        self.evals += 1
        if not np.all(np.isfinite(th)) or th[0] > 700:
            return float("inf")
        d = np.abs(self.values(th) - self.target)
        return float(np.sum(d ** self.p) / self.norm_p) ** (1.0 / self.p)


def distance(f: GridFunction, params: ExtremizerParams) -> float:
    """||synthesize(params) - f||_{p_k} / ||f||_{p_k}, evaluated with lp_norm."""
    p = holder_exponent(params.k)
    g = synthesize(params, like=f, warn=False)
    return lp_norm(g - f, p) / lp_norm(f, p)


@dataclass
class FitResult:
    params: ExtremizerParams
    epsilon: float
    converged: bool
    epsilon_init: float
    restart: int
    evaluations: int


def fit(f: GridFunction, k: int, restarts: int = 8, seed: int = 0, maxiter: Optional[int] = None,
        init: Optional[ExtremizerParams] = None) -> FitResult:
    """Best extremizer found by Nelder-Mead from moment_init plus seeded restarts.

    Restart 0 starts at the moment estimate; restarts 1..r start from seeded
    perturbations of it.  The winner is the smallest (epsilon, restart index).
    The returned epsilon is an upper bound for the distance to the family.
    """
    if lp_norm(f, holder_exponent(k)) == 0:
        raise DomainError("fit of the zero function")
    obj = _Objective(f, k)
    p0 = moment_init(f, k) if init is None else init
    th0 = obj.pack(p0)
    dim = th0.size
    maxiter = maxiter or 400 * dim
    rng = np.random.default_rng(seed)
    n = f.n
    m = len(obj.tri[0])
    sd = 1.0 / np.sqrt(2 * np.linalg.eigvalsh(p0.M).max())
    starts = [th0]
    for _ in range(restarts):
        th = th0.copy()
        th[0] += rng.normal(scale=0.2)
        th[1:1 + n] += rng.normal(scale=0.5 * sd, size=n)
        th[1 + n:1 + n + m] *= np.exp(rng.normal(scale=0.2, size=m))
        th[1 + n + m:] += rng.normal(scale=0.05, size=dim - 1 - n - m)
        starts.append(th)
    best = None
    for idx, th in enumerate(starts):
        res = minimize(obj, th, method="Nelder-Mead",
                       options={"maxiter": maxiter, "maxfev": 2 * maxiter, "xatol": 1e-10,
                                "fatol": 1e-13, "adaptive": dim > 4})
        # polish: a second run restarts the simplex around the optimum
        res2 = minimize(obj, res.x, method="Nelder-Mead",
                        options={"maxiter": maxiter, "maxfev": 2 * maxiter, "xatol": 1e-11,
                                 "fatol": 1e-14, "adaptive": dim > 4})
        if res2.fun <= res.fun:
            res = res2
        key = (float(res.fun), idx)
        if best is None or key < best[0]:
            best = (key, res)
    (_, widx), res = best
    prm = obj.unpack(res.x)
    eps = distance(f, prm)
    eps0 = distance(f, p0)
    if eps > eps0:
        prm, eps = p0, eps0
    return FitResult(prm, eps, bool(res.success), eps0, widx, obj.evals)
