"""Functions sampled on uniform rectangular grids over a box in R^n.

All integrals are midpoint (cell) sums with weight ``cellvol = prod(spacing)``.
Functions are zero outside their box, so translations zero-pad.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from .errors import DomainError, ShapeError

GHK1_LAYOUT = "row-major complex128 little-endian"


@dataclass(frozen=True)
class GridFunction:
    """Complex samples on a uniform grid.

    ``origin`` is the coordinate of the first sample (cell centre of index 0).
    """

    values: np.ndarray
    spacing: Tuple[float, ...]
    origin: Tuple[float, ...]

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "values", v)
        sp = tuple(float(s) for s in np.atleast_1d(self.spacing))
        org = tuple(float(o) for o in np.atleast_1d(self.origin))
        object.__setattr__(self, "spacing", sp)
        object.__setattr__(self, "origin", org)
        if v.ndim != len(sp) or len(org) != len(sp):
            raise ShapeError(f"values.ndim={v.ndim}, spacing {len(sp)}, origin {len(org)}")
        if any(s <= 0 for s in sp):
            raise DomainError("spacing must be strictly positive")
        if not np.all(np.isfinite(v)):
            raise DomainError("values must be finite")

    @property
    def n(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def cellvol(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self):
        return [o + s * np.arange(m) for o, s, m in zip(self.origin, self.spacing, self.shape)]

    def coords(self) -> np.ndarray:
        """Cell centres, array of shape ``shape + (n,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def center(self) -> np.ndarray:
        return np.array([o + s * (m - 1) / 2 for o, s, m in zip(self.origin, self.spacing, self.shape)])

    def with_values(self, values) -> "GridFunction":
        values = np.asarray(values)
        if values.shape != self.shape:
            raise ShapeError(f"expected shape {self.shape}, got {values.shape}")
        return GridFunction(values, self.spacing, self.origin)

    def same_grid(self, other: "GridFunction", tol: float = 1e-12) -> bool:
        return (self.shape == other.shape
                and np.allclose(self.spacing, other.spacing, rtol=tol, atol=0)
                and np.allclose(self.origin, other.origin, rtol=0, atol=tol * max(1.0, max(self.spacing))))

    # derived views
    def modulus(self) -> "GridFunction":
        return self.with_values(np.abs(self.values))

    def unimodular(self) -> "GridFunction":
        a = np.abs(self.values)
        u = np.where(a > 0, self.values / np.where(a > 0, a, 1.0), 0.0)
        return self.with_values(u)

    def phase(self) -> np.ndarray:
        """arg(f)/(2 pi) in [0, 1)."""
        return np.mod(np.angle(self.values) / (2 * np.pi), 1.0)

    def __mul__(self, c):
        if isinstance(c, GridFunction):
            require_same_grid(self, c)
            return self.with_values(self.values * c.values)
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __add__(self, other: "GridFunction"):
        require_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "GridFunction"):
        require_same_grid(self, other)
        return self.with_values(self.values - other.values)


def require_same_grid(*fs: GridFunction):
    f0 = fs[0]
    for f in fs[1:]:
        if not f0.same_grid(f):
            raise ShapeError(f"grid mismatch: {f0.shape}/{f0.spacing}/{f0.origin} vs {f.shape}/{f.spacing}/{f.origin}")


def make_grid(shape, box) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    """Cell-centred grid over ``box``: returns (spacing, origin).

    ``box`` is either (lo, hi) applied to every axis or a list of per-axis pairs.
    """
    shape = tuple(int(m) for m in np.atleast_1d(shape))
    box = np.asarray(box, dtype=float)
    if box.ndim == 1:
        box = np.tile(box, (len(shape), 1))
    spacing = tuple((hi - lo) / m for (lo, hi), m in zip(box, shape))
    origin = tuple(lo + s / 2 for (lo, _), s in zip(box, spacing))
    return spacing, origin


def sample(func, shape, box) -> GridFunction:
    """Sample ``func(x)`` (x of shape (..., n)) at cell centres."""
    spacing, origin = make_grid(shape, box)
    shape = tuple(int(m) for m in np.atleast_1d(shape))
    g = GridFunction(np.zeros(shape, complex), spacing, origin)
    return g.with_values(np.asarray(func(g.coords()), dtype=complex))


def indicator(shape, box, lo, hi) -> GridFunction:
    """Indicator of the box [lo, hi) (per axis), evaluated at cell centres."""
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))

    def f(x):
        return np.all((x >= lo) & (x < hi), axis=-1).astype(float)

    return sample(f, shape, box)


# --------------------------------------------------------------------------
# norms

def _fsum(a: np.ndarray) -> float:
    # math.fsum is exactly rounded, so the result does not depend on order;
    # that gives bit-exact invariance under cell permutations.
    return math.fsum(np.ravel(a).tolist())


def lp_norm(f: GridFunction, p: float) -> float:
    if not (p >= 1) or not math.isfinite(p):
        raise DomainError(f"lp_norm needs finite p >= 1, got {p}")
    a = np.abs(f.values)
    if p == 1:
        s = _fsum(a)
    elif p == 2:
        s = _fsum(a * a)
    else:
        s = _fsum(a ** p)
    return (s * f.cellvol) ** (1.0 / p)


@dataclass
class DyadicDecomposition:
    """Sparse dyadic levels j -> (mask, measure), mask of {2^j <= |f| < 2^(j+1)}."""

    levels: Dict[int, Tuple[np.ndarray, float]] = field(default_factory=dict)

    def measures(self) -> Dict[int, float]:
        return {j: m for j, (_, m) in sorted(self.levels.items())}


def level_index(a: np.ndarray) -> np.ndarray:
    """floor(log2 a) computed exactly via frexp (a > 0)."""
    m, e = np.frexp(a)
    # frexp: a = m * 2**e with m in [0.5, 1)
    return (e - 1).astype(np.int64)


def layer_cake(f: GridFunction) -> DyadicDecomposition:
    a = np.abs(f.values)
    supp = a > 0
    out = DyadicDecomposition()
    if not supp.any():
        return out
    j = np.full(a.shape, np.iinfo(np.int64).min)
    j[supp] = level_index(a[supp])
    for lev in np.unique(j[supp]):
        mask = supp & (j == lev)
        out.levels[int(lev)] = (mask, int(mask.sum()) * f.cellvol)
    return out


def lorentz_seminorm(f: GridFunction, q: float, qt: float) -> float:
    """Dyadic surrogate of the Lorentz (q, qt) seminorm.

    sum_j 2^(j qt) meas_j^(qt/q), to the power 1/qt; sup_j 2^j meas_j^(1/q) if qt is inf.
    Comparable to the rearrangement form up to absolute constants only.
    """
    if q < 1 or not (qt >= 1):
        raise DomainError(f"need q >= 1 and qt in [1, inf], got {q}, {qt}")
    meas = layer_cake(f).measures()
    if not meas:
        return 0.0
    if math.isinf(qt):
        return max(2.0 ** j * m ** (1.0 / q) for j, m in meas.items())
    s = math.fsum(2.0 ** (j * qt) * m ** (qt / q) for j, m in meas.items())
    return s ** (1.0 / qt)


def super_level_mask(f: GridFunction, s: float) -> Tuple[np.ndarray, float]:
    if not s > 0:
        raise DomainError("s must be positive")
    mask = np.abs(f.values) > s
    return mask, int(mask.sum()) * f.cellvol


def _overlap_slices(shape, h):
    """Slices (src, dst) so that dst region x has x + h inside the box."""
    src, dst = [], []
    for m, d in zip(shape, h):
        d = int(d)
        if d >= 0:
            src.append(slice(d, m) if d < m else slice(0, 0))
            dst.append(slice(0, max(m - d, 0)))
        else:
            src.append(slice(0, max(m + d, 0)))
            dst.append(slice(-d, m) if -d < m else slice(0, 0))
    return tuple(src), tuple(dst)


def shift(values: np.ndarray, h) -> np.ndarray:
    """T^h on a zero-padded array: out[x] = values[x + h]."""
    out = np.zeros_like(values)
    src, dst = _overlap_slices(values.shape, h)
    out[dst] = values[src]
    return out


def translate_multiply(f: GridFunction, h) -> GridFunction:
    """g(x) = f(x + h*spacing) * conj(f(x)) for a lattice offset h."""
    h = tuple(int(x) for x in np.atleast_1d(h))
    if len(h) != f.n:
        raise ShapeError("offset dimension mismatch")
    return f.with_values(shift(f.values, h) * np.conj(f.values))


# --------------------------------------------------------------------------
# GHK1 files

def write_ghk1(f: GridFunction, path) -> None:
    header = "\n".join([
        "ghk1",
        f"n={f.n}",
        "shape=" + ",".join(str(m) for m in f.shape),
        "spacing=" + ",".join(repr(s) for s in f.spacing),
        "origin=" + ",".join(repr(o) for o in f.origin),
        f"layout={GHK1_LAYOUT}",
        "",
        "",
    ])
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(f.values, dtype="<c16").tobytes(order="C"))


def read_ghk1(path) -> GridFunction:
    with open(path, "rb") as fh:
        data = fh.read()
    sep = data.find(b"\n\n")
    if sep < 0:
        raise DomainError("GHK1: missing blank line after header")
    lines = data[:sep].decode("ascii").split("\n")
    if lines[0].strip() != "ghk1":
        raise DomainError("GHK1: bad magic")
    kv = dict(line.split("=", 1) for line in lines[1:] if line.strip())
    n = int(kv["n"])
    shape = tuple(int(x) for x in kv["shape"].split(","))
    spacing = tuple(float(x) for x in kv["spacing"].split(","))
    origin = tuple(float(x) for x in kv["origin"].split(","))
    if kv.get("layout", "").strip() != GHK1_LAYOUT:
        raise DomainError(f"GHK1: unsupported layout {kv.get('layout')!r}")
    if not (len(shape) == len(spacing) == len(origin) == n):
        raise ShapeError("GHK1: header dimension mismatch")
    raw = data[sep + 2:]
    count = int(np.prod(shape))
    if len(raw) != 16 * count:
        raise ShapeError(f"GHK1: expected {16 * count} data bytes, got {len(raw)}")
    vals = np.frombuffer(raw, dtype="<c16").reshape(shape).astype(np.complex128)
    return GridFunction(vals, spacing, origin)


def parse_grid_arg(text: str, n: int = 1):
    """Parse 'N,box' (e.g. '1024,8' for [-8, 8]) or 'N,lo,hi'."""
    parts = [p for p in text.split(",") if p]
    N = int(parts[0])
    if len(parts) == 2:
        b = float(parts[1])
        box = (-b, b)
    elif len(parts) == 3:
        box = (float(parts[1]), float(parts[2]))
    else:
        raise DomainError(f"cannot parse grid spec {text!r}")
    return (N,) * n, box


def grid_spec(f: GridFunction) -> dict:
    return {"shape": list(f.shape), "spacing": list(f.spacing), "origin": list(f.origin)}


def lattice_points(shape: Sequence[int]):
    """All lattice offsets h with |h_i| < shape_i, in row-major order."""
    rngs = [range(-(m - 1), m) for m in shape]
    return np.stack(np.meshgrid(*rngs, indexing="ij"), -1).reshape(-1, len(shape))
