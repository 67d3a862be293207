"""Symmetric decreasing rearrangement on grids and distribution-function distances."""
from __future__ import annotations

import numpy as np

from .errors import DomainError
from .grid import GridFunction, lp_norm, require_same_grid


def cell_order(f: GridFunction) -> np.ndarray:
    """Flat cell indices sorted by distance to the box centre, ties by index."""
    X = f.coords().reshape(-1, f.n)
    d2 = np.sum((X - f.center()) ** 2, axis=1)
    # lexsort is stable: primary key distance, secondary the flat index
    return np.lexsort((np.arange(d2.size), d2))


def symmetric_rearrangement(f: GridFunction) -> GridFunction:
    """|f| values sorted decreasingly and placed on cells ordered outward from the centre."""
    a = np.abs(f.values).ravel()
    vals = np.sort(a)[::-1]
    out = np.empty_like(a)
    out[cell_order(f)] = vals
    return f.with_values(out.reshape(f.shape))


def distribution_distance(f: GridFunction, g: GridFunction, eta: float) -> float:
    """sup over s in [eta, max|g| - eta] of |meas{|f| > s} - meas{|g| > s}|.

    Both measures are step functions of s that only jump at cell values, so
    the sup is attained at a cell value in the range or at an endpoint.
    """
    require_same_grid(f, g)
    af = np.sort(np.abs(f.values).ravel())
    ag = np.sort(np.abs(g.values).ravel())
    lo, hi = eta, ag[-1] - eta
    if not (eta > 0) or hi < lo:
        raise DomainError(f"empty s-range [{lo}, {hi}]")
    cand = np.concatenate([af, ag])
    s = np.unique(np.concatenate([cand[(cand >= lo) & (cand <= hi)], [lo, hi]]))
    mf = af.size - np.searchsorted(af, s, side="right")
    mg = ag.size - np.searchsorted(ag, s, side="right")
    return float(np.max(np.abs(mf - mg))) * f.cellvol


def truncation_norm(f: GridFunction, eta: float, p: float) -> float:
    """||min(|f|, eta)||_p."""
    return lp_norm(f.with_values(np.minimum(np.abs(f.values), eta)), p)
