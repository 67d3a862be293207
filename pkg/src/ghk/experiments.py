"""Experiment drivers behind the CLI: stability sweeps, scale localization,
level-set alignment, the nonnegative inequality chain and the self-test."""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import spearmanr

from .errors import ConfigError, DomainError
from .extremizer import ExtremizerParams, fit, normalize, synthesize
from .gowers import (deficit, gowers_inner, holder_exponent, sharp_constant,
                     sharp_constant_from_young, sharp_young_B, u2_norm, uk_norm,
                     young_sharp_constant)
from .grid import (GridFunction, _overlap_slices, grid_spec, indicator, layer_cake,
                   lp_norm, make_grid, super_level_mask)
from .rearrange import symmetric_rearrangement

SCHEMA = 1
FAMILIES = ("bump", "noise", "twist")


# --------------------------------------------------------------------------
# stability sweep

@dataclass
class DeficitReport:
    k: int
    n: int
    norm_pk: float
    norm_uk: float
    delta: float
    fitted: ExtremizerParams
    epsilon: float
    runtime_ms: float
    seed: int
    grid: dict
    amplitude: float = 0.0
    family: str = ""
    converged: bool = True

    def recomputed_delta(self) -> float:
        return 1.0 - self.norm_uk / (sharp_constant(self.k, self.n) * self.norm_pk)

    def row(self, timing: bool = False) -> Dict[str, object]:
        r = {"schema": SCHEMA, "family": self.family, "amplitude": self.amplitude,
             "seed": self.seed, "k": self.k, "n": self.n, "norm_pk": self.norm_pk,
             "norm_uk": self.norm_uk, "delta": self.delta, "epsilon": self.epsilon,
             "converged": int(self.converged),
             "fitted": json.dumps(self.fitted.to_json(), sort_keys=True)}
        if timing:
            r["runtime_ms"] = self.runtime_ms
        return r


@dataclass
class SweepConfig:
    k: int = 2
    n: int = 1
    N: int = 512
    box: float = 8.0
    base: Optional[dict] = None
    family: str = "bump"
    amplitudes: List[float] = field(default_factory=lambda: list(np.linspace(0.0, 0.55, 12)))
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    restarts: int = 2
    workers: int = 1
    budget: Optional[float] = None

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = set(cls.__dataclass_fields__)
        for key in d:
            if key not in known:
                raise ConfigError(f"config.{key}: unknown field")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        def need(cond, path, msg):
            if not cond:
                raise ConfigError(f"config.{path}: {msg}")
        need(isinstance(self.k, int) and self.k >= 2, "k", "integer >= 2 required")
        need(isinstance(self.n, int) and self.n >= 1, "n", "integer >= 1 required")
        need(isinstance(self.N, int) and self.N >= 8, "N", "integer >= 8 required")
        need(self.box > 0, "box", "must be positive")
        need(self.family in FAMILIES, "family", f"one of {FAMILIES}")
        need(len(self.amplitudes) >= 1, "amplitudes", "at least one amplitude")
        for i, a in enumerate(self.amplitudes):
            need(float(a) >= 0, f"amplitudes[{i}]", "must be nonnegative")
        need(len(self.seeds) >= 1, "seeds", "at least one seed")
        need(self.restarts >= 0, "restarts", "must be >= 0")
        need(self.workers >= 1, "workers", "must be >= 1")
        if self.base is not None:
            try:
                b = ExtremizerParams.from_json(self.base)
            except Exception as e:  # noqa: BLE001
                raise ConfigError(f"config.base: {e}") from None
            need(b.k == self.k and b.n == self.n, "base", "k/n must match the sweep")

    def base_params(self) -> ExtremizerParams:
        if self.base is None:
            return ExtremizerParams.standard(self.k, self.n)
        return ExtremizerParams.from_json(self.base)


def bump(shape, box, n, rng, center) -> GridFunction:
    """Unit-norm C^2 bump (1 - |x-x0|^2/r^2)^3_+ placed 1..2.5 units from ``center``."""
    d = rng.normal(size=n)
    d /= np.linalg.norm(d)
    x0 = center + d * rng.uniform(1.0, 2.5)
    r = rng.uniform(0.5, 1.0)
    from .grid import sample

    def f(x):
        u = 1.0 - np.sum((x - x0) ** 2, axis=-1) / r ** 2
        return np.where(u > 0, u, 0.0) ** 3
    return sample(f, shape, box)


def band_noise(shape, box, n, rng, center, modes=8, fmax=1.0) -> GridFunction:
    """Random band-limited complex noise under a Gaussian window."""
    from .grid import sample
    xi = rng.uniform(-fmax, fmax, size=(modes, n))
    amp = rng.normal(size=modes) + 1j * rng.normal(size=modes)

    def f(x):
        s = np.zeros(x.shape[:-1], complex)
        for a, q in zip(amp, xi):
            s += a * np.exp(2j * math.pi * (x @ q))
        return s * np.exp(-np.sum((x - center) ** 2, axis=-1) / 4.0)
    return sample(f, shape, box)


def perturbed(cfg: SweepConfig, amplitude: float, seed: int) -> GridFunction:
    shape = (cfg.N,) * cfg.n
    box = (-cfg.box, cfg.box)
    base = cfg.base_params()
    g = synthesize(base, shape, box, warn=False)
    p = holder_exponent(cfg.k)
    rng = np.random.default_rng([seed, cfg.k, cfg.n])
    if cfg.family == "twist":
        X = g.coords()
        tw = np.sum((X - base.c) ** cfg.k, axis=-1)
        return normalize(g.with_values(g.values * np.exp(2j * math.pi * amplitude * tw)), p)
    if cfg.family == "bump":
        pert = bump(shape, box, cfg.n, rng, base.c)
    else:
        pert = band_noise(shape, box, cfg.n, rng, base.c)
    pert = normalize(pert, p)
    return normalize(normalize(g, p) + amplitude * pert, p)


def _sweep_row(args):
    cfg, amplitude, seed = args
    t0 = time.perf_counter()
    f = perturbed(cfg, amplitude, seed)
    p = holder_exponent(cfg.k)
    npk = lp_norm(f, p)
    nuk = uk_norm(f, cfg.k, cfg.budget)
    delta = 1.0 - nuk / (sharp_constant(cfg.k, cfg.n) * npk)
    res = fit(f, cfg.k, restarts=cfg.restarts, seed=seed)
    return DeficitReport(cfg.k, cfg.n, npk, nuk, delta, res.params, res.epsilon,
                         1000 * (time.perf_counter() - t0), seed, grid_spec(f),
                         float(amplitude), cfg.family, res.converged)


def stability_sweep(cfg: SweepConfig) -> List[DeficitReport]:
    """One DeficitReport per (amplitude, seed), ordered by amplitude then seed."""
    jobs = [(cfg, float(a), int(s)) for a in sorted(cfg.amplitudes) for s in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            return list(ex.map(_sweep_row, jobs))
    return [_sweep_row(j) for j in jobs]


def sweep_summary(rows: Sequence[DeficitReport]) -> dict:
    amp = np.array([r.amplitude for r in rows])
    dl = np.array([r.delta for r in rows])
    ep = np.array([r.epsilon for r in rows])
    rho = float(spearmanr(amp, dl).statistic) if np.ptp(amp) > 0 else float("nan")
    per_seed = {}
    for sd in sorted({r.seed for r in rows}):
        idx = [i for i, r in enumerate(rows) if r.seed == sd]
        if len(idx) > 2 and np.ptp(amp[idx]) > 0:
            per_seed[sd] = float(spearmanr(amp[idx], dl[idx]).statistic)
    order = np.argsort(dl, kind="stable")
    three = np.sort(ep[order[:3]])
    smallest = np.sort(ep)[:3]
    return {"spearman_amplitude_delta": rho,
            "spearman_per_seed": per_seed,
            "spearman_min_per_seed": min(per_seed.values()) if per_seed else float("nan"),
            "smallest_delta_rows_have_smallest_epsilon": bool(np.all(three <= smallest)),
            "epsilon_of_three_smallest_delta": three.tolist(),
            "three_smallest_epsilon": smallest.tolist()}


# --------------------------------------------------------------------------
# scale localization

@dataclass
class ScaleReport:
    levels: List[tuple]
    l_star: int
    c0_realized: float
    tail: List[tuple]
    lambda_suggested: float

    def to_json(self) -> dict:
        return {"schema": SCHEMA, "levels": [list(x) for x in self.levels], "l_star": self.l_star,
                "c0_realized": self.c0_realized, "tail": [list(x) for x in self.tail],
                "lambda_suggested": self.lambda_suggested}


def scale_localization(f: GridFunction, k: int) -> ScaleReport:
    """Dyadic level weights 2^j meas_j^(1/p_k), their maximizer and the tails
    sum_{|j - l*| >= m} 2^(j p_k) meas_j."""
    p = holder_exponent(k)
    nrm = lp_norm(f, p)
    if nrm == 0:
        raise DomainError("scale localization of the zero function")
    meas = layer_cake(f).measures()
    levels = [(j, m, 2.0 ** j * m ** (1.0 / p)) for j, m in meas.items()]
    l_star = max(levels, key=lambda r: (r[2], -r[0]))[0]
    c0 = max(r[2] for r in levels) / nrm
    span = max(abs(j - l_star) for j in meas)
    tail = []
    for m in range(0, span + 2):
        terms = [2.0 ** (j * p) * mj for j, mj in meas.items() if abs(j - l_star) >= m]
        tail.append((m, math.fsum(terms)))
    lam = 2.0 ** round(math.log2(meas[l_star]) / f.n)
    return ScaleReport(levels, l_star, c0, tail, lam)


# --------------------------------------------------------------------------
# level-set alignment

def levelset_alignment(f: GridFunction, k: int, eta: float, points: int = 16,
                       budget: Optional[float] = None) -> List[dict]:
    """r(s) = ||1_{F_s}||_{U^k}^{2^k} / ||1_{F_s^*}||_{U^k}^{2^k} on an s-grid."""
    top = float(np.abs(f.values).max())
    if not (eta > 0) or top - eta < eta:
        raise DomainError(f"empty s-range [{eta}, {top - eta}]")
    out = []
    for s in np.linspace(eta, top - eta, points):
        mask, meas = super_level_mask(f, float(s))
        ind = f.with_values(mask.astype(float))
        star = symmetric_rearrangement(ind)
        num = uk_norm(ind, k, budget) ** (2 ** k)
        den = uk_norm(star, k, budget) ** (2 ** k)
        out.append({"s": float(s), "measure": meas, "uk_pow": num, "uk_pow_star": den,
                    "r": num / den if den > 0 else float("nan")})
    return out


# --------------------------------------------------------------------------
# inequality chain

def chain_scalar(k: int, n: int = 1) -> dict:
    """A(k)^(2^k) B(k+1)^(k+1) versus A(k+1)^(2^(k+1)), B from sharp Young constants."""
    q = holder_exponent(k + 1) / holder_exponent(k)
    B = young_sharp_constant(q, q, k + 1, n)
    lhs = sharp_constant(k, n) ** (2 ** k) * B ** (k + 1)
    rhs = sharp_constant(k + 1, n) ** (2 ** (k + 1))
    return {"k": k, "B_young": B, "B_identity": sharp_young_B(k, n), "lhs": lhs, "rhs": rhs,
            "rel_err": abs(lhs / rhs - 1.0)}


def verify_chain(fs: Sequence[GridFunction], k: int, rtol: float = 1e-6,
                 budget: Optional[float] = None) -> dict:
    """Evaluate T_{k+1} <= Q1 <= Q2 <= Q3 <= A(k+1)^(2^(k+1)) prod ||f_b||_{p_{k+1}}.

    Q1 = int prod_a ||T^h f_(a,0) f_(a,1)||_{U^k} dh          (Gowers-Cauchy-Schwarz)
    Q2 = A(k)^(2^k) int prod_a ||T^h f_(a,0) f_(a,1)||_{p_k} dh (norm inequality)
    Q3 = A(k)^(2^k) prod_a (int ||T^h f_(a,0) f_(a,1)||_{p_k}^(2^k) dh)^(2^-k)  (Hoelder)
    final via sharp Young for each inner integral.
    """
    fs = list(fs)
    if len(fs) != 2 ** (k + 1):
        raise DomainError(f"need {2 ** (k + 1)} functions")
    for i, f in enumerate(fs):
        if np.any(np.abs(f.values.imag) > 0) or np.any(f.values.real < 0):
            raise DomainError(f"function {i} is not nonnegative")
    n = fs[0].n
    cv = fs[0].cellvol
    pk = holder_exponent(k)
    half = 2 ** k
    A = sharp_constant(k, n) ** (2 ** k)
    T = gowers_inner(fs, k + 1, budget).real
    shape = fs[0].shape
    rngs = [range(-(m - 1), m) for m in shape]
    q1 = q2 = 0.0
    young = np.zeros(half)
    for h in np.stack(np.meshgrid(*rngs, indexing="ij"), -1).reshape(-1, n):
        src, dst = _overlap_slices(shape, h)
        gs = []
        for a in range(half):
            g = np.zeros(shape)
            g[dst] = fs[a].values.real[src] * fs[a + half].values.real[dst]
            gs.append(GridFunction(g, fs[0].spacing, fs[0].origin))
        pn = np.array([lp_norm(g, pk) for g in gs])
        if not np.any(pn):
            continue
        un = np.array([uk_norm(g, k, budget) for g in gs])
        q1 += np.prod(un)
        q2 += np.prod(pn)
        young += pn ** (2 ** k)
    q1 *= cv
    q2 *= cv * A
    young *= cv
    q3 = A * float(np.prod(young ** (1.0 / 2 ** k)))
    pk1 = holder_exponent(k + 1)
    final = sharp_constant(k + 1, n) ** (2 ** (k + 1)) * float(np.prod([lp_norm(f, pk1) for f in fs]))
    chain = [("T", T), ("Q1", q1), ("Q2", q2), ("Q3", q3), ("final", final)]
    steps = []
    for (na, va), (nb, vb) in zip(chain[:-1], chain[1:]):
        steps.append({"lhs": na, "rhs": nb, "lhs_value": va, "rhs_value": vb,
                      "slack": vb - va, "ok": bool(va <= vb * (1 + rtol) + 1e-300)})
    return {"k": k, "values": dict(chain), "steps": steps, "ok": all(s["ok"] for s in steps),
            "scalar": chain_scalar(k, n)}


# --------------------------------------------------------------------------
# self-test

def constant_table(kmax: int = 7, perturb: float = 0.0) -> Dict[int, float]:
    return {k: sharp_constant(k, 1) * (1.0 + perturb) for k in range(1, kmax + 1)}


def run_selftest(perturb: float = 0.0, size: str = "small") -> List[dict]:
    """Constant identities, FFT/recursion agreement, the indicator benchmark and
    the rearrangement inequality at reduced sizes.  ``perturb`` scales the
    constant table (mutation hook) and must make a named check fail."""
    table = constant_table(8, perturb)
    checks = []

    def add(name, ok, **detail):
        checks.append({"check": name, "ok": bool(ok), **detail})

    t0 = time.perf_counter()
    errs = [abs(sharp_constant_from_young(k) / table[k] - 1) for k in range(2, 7)]
    add("constants.young_identity", max(errs) <= 1e-12, max_rel_err=max(errs))
    errs = []
    for k in range(1, 7):
        q = holder_exponent(k + 1) / holder_exponent(k)
        B = young_sharp_constant(q, q, k + 1)
        errs.append(abs(table[k] ** (2 ** k) * B ** (k + 1) / table[k + 1] ** (2 ** (k + 1)) - 1))
    add("constants.chain_identity", max(errs) <= 1e-12, max_rel_err=max(errs))

    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        N = int(rng.integers(16, 64))
        v = rng.normal(size=N) + 1j * rng.normal(size=N)
        f = GridFunction(v, (0.1,), (0.0,))
        worst = max(worst, abs(uk_norm(f, 2, base=1) / u2_norm(f) - 1))
    add("norms.fft_vs_recursion", worst <= 1e-8, max_rel_err=worst)

    I = indicator(512, (-2.0, 2.0), 0.0, 1.0)
    u2 = u2_norm(I)
    add("indicator.u2", abs(u2 - (2 / 3) ** 0.25) <= 1e-3, value=u2)
    d = 1.0 - u2 / (table[2] * lp_norm(I, holder_exponent(2)))
    add("indicator.deficit", abs(d - (1 - (2 / 3) ** 0.25 / sharp_constant(2))) <= 2e-3
        and abs(d - 0.0353) <= 2e-3, value=d)

    worst = float("inf")
    exact = True
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        N = int(rng.integers(8, 32))
        f = GridFunction(rng.random(N) * (rng.random(N) < 0.7), (0.1,), (0.0,))
        fs = symmetric_rearrangement(f)
        for p in (1.0, 4 / 3, 2.0, 3.5):
            exact &= lp_norm(fs, p) == lp_norm(f, p)
        for k in (2, 3):
            worst = min(worst, uk_norm(fs, k) - uk_norm(f, k))
    add("rearrangement.inequality", worst >= -1e-9, min_gap=worst)
    add("rearrangement.norms_exact", exact)
    add("runtime", True, seconds=time.perf_counter() - t0)
    return checks
