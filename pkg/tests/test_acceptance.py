"""Acceptance suite: one test per criterion, each prints a PASS/FAIL line."""
import math
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import corrupted_phase
from ghk.experiments import SweepConfig, perturbed, stability_sweep, sweep_summary
from ghk.extremizer import ExtremizerParams, synthesize
from ghk.geometry import (burchard_check, gowers_tuple, gowers_witnesses, h_profile, h_support,
                          is_admissible, phi_profile, validate_witness)
from ghk.gowers import (GaussianTuple, deficit, gaussian_tuple_inner, gowers_inner, sharp_constant,
                        holder_exponent, u2_norm, uk_norm, young_c,
                        young_sharp_constant)
from ghk.grid import GridFunction, indicator, lp_norm, make_grid
from ghk.phase import PhaseSamples, RealPolynomial, poly_phase_recover
from ghk.rearrange import symmetric_rearrangement


def _A(k):
    return 1.0 if k == 0 else sharp_constant(k, 1)


def _young_form(k, lower):
    return (young_c(2 * k / (k + 1)) ** 2 / young_c(k)) ** (k / 2 ** k) * lower ** 0.5


def _B_young(k1):
    # sharp Young constant for L^q * L^q -> L^{k+1}, q = p_{k+1} / p_k
    q = holder_exponent(k1) / holder_exponent(k1 - 1)
    return young_sharp_constant(q, q, k1)


def test_c1_constant_identities(criterion):
    t0 = time.perf_counter()
    e1 = max(abs(_young_form(k, _A(k - 1)) / _A(k) - 1) for k in range(2, 7))
    e2 = max(abs(_A(k) ** (2 ** k) * _B_young(k + 1) ** (k + 1) / _A(k + 1) ** (2 ** (k + 1)) - 1)
             for k in range(1, 7))
    dt = time.perf_counter() - t0
    criterion("C1 constant identities", e1 <= 1e-12 and e2 <= 1e-12 and dt < 1,
              f"young-form err {e1:.2e}, chain err {e2:.2e}, {dt:.3f}s")


@pytest.mark.xfail(strict=True, reason="the C_{k-1}^{1/2} factor as literally written does not "
                                       "reproduce A(k) for k >= 3; A(k-1)^{1/2} does")
@pytest.mark.parametrize("k", [3, 4, 5, 6])
def test_c1_literal_lower_factor(k):
    assert abs(_young_form(k, young_c(k - 1)) / _A(k) - 1) <= 1e-12


def test_c1_literal_lower_factor_k2():
    # C_1 = 1 = A(1), so both readings agree at k = 2
    assert abs(_young_form(2, 1.0) / _A(2) - 1) <= 1e-12


def test_c2_extremizer_attainment(criterion):
    t0 = time.perf_counter()
    f2 = synthesize(ExtremizerParams.standard(2, 1), (1024,), (-8.0, 8.0))
    f3 = synthesize(ExtremizerParams.standard(3, 1), (512,), (-8.0, 8.0))
    u2 = u2_norm(f2) / lp_norm(f2, 4 / 3)
    u3 = uk_norm(f3, 3) / lp_norm(f3, 2.0)
    dt = time.perf_counter() - t0
    ok = abs(u2 - 0.936687) <= 1e-3 and abs(u3 - 0.91700) <= 2e-3 and dt < 10
    criterion("C2 extremizer attainment", ok, f"U2 {u2:.7f}, U3 {u3:.7f}, {dt:.2f}s")


def _random_compact(rng, N=48):
    v = np.zeros(N, complex)
    lo = N // 4
    v[lo:N - lo] = rng.normal(size=N - 2 * lo) + 1j * rng.normal(size=N - 2 * lo)
    sp, org = make_grid((N,), (-3.0, 3.0))
    return GridFunction(v, sp, org)


def test_c3_fft_vs_recursion(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        f = _random_compact(np.random.default_rng(seed))
        a, b = uk_norm(f, 2, base=1), u2_norm(f)
        worst = max(worst, abs(a - b) / b)
    dt = time.perf_counter() - t0
    criterion("C3 FFT/recursion", worst <= 1e-8 and dt < 10, f"max rel diff {worst:.2e}, {dt:.2f}s")


def test_c4_gaussian_closed_form(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        t = GaussianTuple.scalar(2, rng.uniform(0.5, 2, 4), rng.uniform(0.5, 2, 4), rng.uniform(-1, 1, 4))
        fs = t.sample((512,), (-8.0, 8.0))
        a = gaussian_tuple_inner(t)
        b = gowers_inner(fs, 2)
        worst = max(worst, abs(b - a) / a)
    dt = time.perf_counter() - t0
    criterion("C4 Gaussian closed form", worst <= 1e-4 and dt < 60, f"max rel diff {worst:.2e}, {dt:.2f}s")


def test_c5_indicator(criterion):
    t0 = time.perf_counter()
    # analytic route: ||1_[0,1]||_{U^2}^4 = int sinc^4
    s4 = 2 * quad(lambda x: np.sinc(x) ** 4, 0, np.inf, limit=2000)[0]
    f = indicator((1024,), (-2.0, 2.0), 0.0, 1.0)
    u = u2_norm(f)
    d = deficit(f, 2)
    target = (2 / 3) ** 0.25
    dt = time.perf_counter() - t0
    ok = abs(u - target) <= 1e-3 and abs(s4 ** 0.25 - target) <= 1e-3 and abs(d - 0.0353) <= 2e-3 and dt < 5
    criterion("C5 indicator", ok, f"U2 {u:.6f} (target {target:.6f}, sinc^4 {s4 ** .25:.6f}), "
                                  f"deficit {d:.5f}, {dt:.2f}s")


def test_c6_rearrangement(criterion):
    t0 = time.perf_counter()
    gap, exact = np.inf, True
    for seed in range(100):
        rng = np.random.default_rng(seed)
        k = 2 + seed % 2
        N = int(rng.integers(16, 49))
        v = np.zeros(N)
        m = int(rng.integers(4, N // 2 + 1))
        v[:m] = rng.exponential(size=m) * (rng.random(m) < 0.8)
        v = rng.permutation(v)
        sp, org = make_grid((N,), (-2.0, 2.0))
        f = GridFunction(v, sp, org)
        fs = symmetric_rearrangement(f)
        gap = min(gap, uk_norm(fs, k) - uk_norm(f, k))
        for p in (1.0, 4 / 3, 2.0, 3.5):
            exact &= lp_norm(fs, p) == lp_norm(f, p)
    dt = time.perf_counter() - t0
    criterion("C6 rearrangement", gap >= -1e-9 and exact and dt < 120,
              f"min gap {gap:.3e}, Lp exact {exact}, {dt:.2f}s")


def test_c7_gowers_cauchy_schwarz(criterion):
    t0 = time.perf_counter()
    slack = np.inf
    for seed in range(100):
        rng = np.random.default_rng(seed)
        N = int(rng.integers(8, 40))
        sp, org = make_grid((N,), (-3.0, 3.0))
        fs = [GridFunction(rng.normal(size=N) + 1j * rng.normal(size=N), sp, org) for _ in range(4)]
        lhs = abs(gowers_inner(fs, 2))
        rhs = math.prod(u2_norm(f) for f in fs)
        slack = min(slack, rhs + 1e-9 - lhs)
    dt = time.perf_counter() - t0
    criterion("C7 Gowers-Cauchy-Schwarz", slack >= 0 and dt < 120, f"min slack {slack:.3e}, {dt:.2f}s")


def _support_edge(k, step):
    """Largest x on a grid of the given step with H(x) > 0 (Monte Carlo)."""
    xs = np.arange(0.0, h_support(k) + 1.0, step)
    pos = [x for x in xs if h_profile(x, k, method="mc", samples=4000).value > 0]
    neg = [x for x in xs if h_profile(-x, k, method="mc", samples=4000).value > 0]
    return max(pos), max(neg)


def test_c8_geometry(criterion):
    t0 = time.perf_counter()
    notes, ok = [], True
    step = 0.05
    for k in (2, 3):
        s = h_support(k)
        ep, en = _support_edge(k, step)
        good = abs(ep - s) <= step and abs(en - s) <= step
        ok &= good
        notes.append(f"k={k} edges +{ep:.2f}/-{en:.2f} vs {s:.3f}")
    h0 = h_profile(0.0, 2).exact
    ok &= h0 == Fraction(3)
    notes.append(f"H(0)={h0}")
    ts = np.linspace(0.0, 0.9, 7)
    vals = [phi_profile(t, 2, 0.5) for t in ts]
    margins = [(a.value - b.value) / (3 * max(a.error + b.error, 1e-300)) for a, b in zip(vals, vals[1:])]
    ok &= min(margins) > 1
    notes.append(f"phi min margin/3sigma {min(margins):.2e}")
    agree = 0
    for l1 in range(1, 6):
        for l2 in range(1, 6):
            for l3 in range(1, 9):
                lp, tri = burchard_check(l1, l2, l3)
                agree += lp == tri
    ok &= agree == 200
    notes.append(f"Burchard {agree}/200")
    for k in (2, 3, 4):
        t = gowers_tuple(k)
        res = is_admissible(t)
        wit = all(validate_witness(t, m, w) for m, w in enumerate(gowers_witnesses(k)))
        ok &= res.admissible and wit
        notes.append(f"k={k} admissible {res.admissible} witnesses {wit}")
    dt = time.perf_counter() - t0
    criterion("C8 geometry", ok and dt < 120, "; ".join(notes) + f", {dt:.2f}s")


PHASE_CORPUS = [(2, 2, 0.05, 1), (3, 2, 0.05, 1), (3, 1, 0.02, 5)]


def test_c9_phase_recovery(criterion):
    t0 = time.perf_counter()
    clean = 0.0
    for k in (2, 3, 4):
        for n in (1, 2):
            for seed in range(3):
                rng = np.random.default_rng(100 + seed)
                P0 = RealPolynomial.random(n, k - 1, rng)
                s = PhaseSamples.on_grid(P0, np.zeros(n), 1.0, 0.05 if n == 2 else 0.02)
                r = poly_phase_recover(s, k)
                clean = max(clean, r.poly.max_coef_diff(P0))
    noisy, frac = 0.0, 1.0
    for k, n, sp, stride in PHASE_CORPUS:
        for seed in range(20):
            P0, s = corrupted_phase(k, n, seed, sp)
            r = poly_phase_recover(s, k, tau=0.05, stride=stride)
            noisy = max(noisy, r.poly.max_coef_diff(P0, skip_constant=True))
            frac = min(frac, r.inlier_fraction)
    dt = time.perf_counter() - t0
    ok = clean <= 1e-8 and noisy <= 1e-2 and frac >= 0.9 and dt < 120
    criterion("C9 phase recovery", ok, f"noiseless err {clean:.2e}, corrupted err {noisy:.2e}, "
                                       f"min inlier fraction {frac:.3f}, {dt:.2f}s")


@pytest.mark.slow
def test_c10_stability_sweep(criterion):
    t0 = time.perf_counter()
    cfg = SweepConfig()
    rows = stability_sweep(cfg)
    summ = sweep_summary(rows)
    base = [r for r in rows if r.amplitude == 0]
    d0 = max(r.delta for r in base)
    tw = SweepConfig(family="twist")
    a = 0.1
    ftw = perturbed(tw, a, 0)
    dtw = deficit(ftw, 2)
    analytic = 1 - (1 + 4 * math.pi ** 2 * a ** 2) ** (-1 / 8)
    dt = time.perf_counter() - t0
    ok = (len(rows) == 60 and summ["spearman_min_per_seed"] >= 0.9
          and summ["smallest_delta_rows_have_smallest_epsilon"]
          and dtw >= 10 * max(d0, 0.0) and dtw > 0 and abs(dtw - analytic) <= 1e-6 and dt < 600)
    criterion("C10 stability sweep", ok,
              f"per-seed Spearman min {summ['spearman_min_per_seed']:.3f} "
              f"(pooled {summ['spearman_amplitude_delta']:.3f}), three smallest ok "
              f"{summ['smallest_delta_rows_have_smallest_epsilon']}, twist delta {dtw:.5f} "
              f"(analytic {analytic:.5f}) vs base {d0:.2e}, {dt:.1f}s")


def test_c11_selftest(criterion):
    t0 = time.perf_counter()
    p = subprocess.run([sys.executable, "-m", "ghk", "selftest"], capture_output=True, text=True)
    dt = time.perf_counter() - t0
    names = {line.split()[1] for line in p.stdout.splitlines() if line.split()[:1] in (["PASS"], ["FAIL"])}
    covered = {"constants.young_identity", "norms.fft_vs_recursion", "indicator.u2",
               "rearrangement.inequality"} <= names
    criterion("C11 selftest", p.returncode == 0 and covered and dt < 300,
              f"exit {p.returncode}, covers 1/3/5/6 {covered}, {dt:.2f}s")
