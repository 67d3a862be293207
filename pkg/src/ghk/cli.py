"""Command-line interface: ``ghk <command> [options]``.

Functions are read from GHK1 files or built from inline extremizer JSON
(``--extremizer '{"k": 2, "n": 1, ...}'`` or ``--extremizer @params.json``).
Results go to ``--out`` (or stdout) as JSON or CSV; ``--plot`` also writes a
gnuplot script and a PNG rendered with matplotlib next to the output.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from typing import List, Optional

import numpy as np

from . import report
from .errors import ConfigError, GHKError
from .experiments import (DeficitReport, SweepConfig, chain_scalar, levelset_alignment,
                          run_selftest, scale_localization, stability_sweep, sweep_summary,
                          verify_chain)
from .extremizer import ExtremizerParams, fit, synthesize
from .geometry import (AdmissibleTuple, gowers_tuple, is_admissible, is_strictly_admissible,
                       riesz_sobolev_tuple, strict_margin)
from .gowers import (gowers_inner, holder_exponent, sharp_constant, uk_norm)
from .grid import GridFunction, grid_spec, lp_norm, parse_grid_arg, read_ghk1, write_ghk1
from .phase import PhaseSamples, poly_phase_recover
from .rearrange import distribution_distance, symmetric_rearrangement

DEFAULTS = {"k": 2, "grid": "512,8", "seed": 0, "restarts": 8, "eta": 0.05, "tau": 0.05,
            "points": 16, "stride": 1}


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be a JSON object")
    return cfg


def _opt(args, name):
    v = getattr(args, name, None)
    if v is None:
        v = args.config_data.get(name, DEFAULTS.get(name))
    return v


def _extremizer_arg(text: str) -> ExtremizerParams:
    if text.startswith("@"):
        with open(text[1:]) as fh:
            text = fh.read()
    return ExtremizerParams.from_json(json.loads(text))


def _function(args, path: Optional[str] = None) -> GridFunction:
    if path:
        return read_ghk1(path)
    if getattr(args, "extremizer", None):
        prm = _extremizer_arg(args.extremizer)
        shape, box = parse_grid_arg(_opt(args, "grid"), prm.n)
        return synthesize(prm, shape, box)
    raise ConfigError("input: give a GHK1 file or --extremizer")


def _write(args, text: str):
    report.emit(text, args.out)


# --------------------------------------------------------------------------
# commands

def cmd_norm(args):
    k = int(_opt(args, "k"))
    f = _function(args, args.input[0] if args.input else None)
    out = {"k": k, "n": f.n, "grid": grid_spec(f), "p_k": holder_exponent(k),
           "norm_pk": lp_norm(f, holder_exponent(k)), "norm_uk": uk_norm(f, k, args.budget)}
    _write(args, report.to_json(out))
    return 0


def cmd_inner(args):
    k = int(_opt(args, "k"))
    fs = [read_ghk1(p) for p in args.input]
    v = gowers_inner(fs, k, args.budget)
    _write(args, report.to_json({"k": k, "re": v.real, "im": v.imag, "abs": abs(v)}))
    return 0


def cmd_deficit(args):
    k = int(_opt(args, "k"))
    f = _function(args, args.input[0] if args.input else None)
    p = holder_exponent(k)
    npk, nuk = lp_norm(f, p), uk_norm(f, k, args.budget)
    out = {"k": k, "n": f.n, "norm_pk": npk, "norm_uk": nuk, "A": sharp_constant(k, f.n),
           "delta": 1.0 - nuk / (sharp_constant(k, f.n) * npk)}
    _write(args, report.to_json(out))
    return 0


def cmd_fit(args):
    k = int(_opt(args, "k"))
    f = _function(args, args.input[0] if args.input else None)
    t0 = time.perf_counter()
    p = holder_exponent(k)
    npk, nuk = lp_norm(f, p), uk_norm(f, k, args.budget)
    res = fit(f, k, restarts=int(_opt(args, "restarts")), seed=int(_opt(args, "seed")))
    rep = DeficitReport(k, f.n, npk, nuk, 1.0 - nuk / (sharp_constant(k, f.n) * npk), res.params,
                        res.epsilon, 1000 * (time.perf_counter() - t0), int(_opt(args, "seed")),
                        grid_spec(f), converged=res.converged)
    out = {"schema": 1, "k": k, "n": f.n, "norm_pk": npk, "norm_uk": nuk, "delta": rep.delta,
           "epsilon": rep.epsilon, "epsilon_init": res.epsilon_init, "converged": res.converged,
           "fitted": res.params.to_json(), "seed": rep.seed, "grid": rep.grid}
    if args.timing:
        out["runtime_ms"] = rep.runtime_ms
    _write(args, report.to_json(out))
    return 0


def cmd_rearrange(args):
    f = _function(args, args.input[0] if args.input else None)
    fs = symmetric_rearrangement(f)
    k = int(_opt(args, "k"))
    out = {"k": k, "norm_uk": uk_norm(f, k, args.budget), "norm_uk_star": uk_norm(fs, k, args.budget),
           "norm_pk": lp_norm(f, holder_exponent(k)), "norm_pk_star": lp_norm(fs, holder_exponent(k))}
    if args.against:
        g = read_ghk1(args.against)
        out["distribution_distance"] = distribution_distance(f, g, float(_opt(args, "eta")))
    if args.write:
        write_ghk1(fs, args.write)
        out["written"] = args.write
    _write(args, report.to_json(out))
    return 0


def cmd_admissible(args):
    if args.tuple:
        with open(args.tuple) as fh:
            t = AdmissibleTuple.from_json(json.load(fh))
    elif args.gowers:
        t = gowers_tuple(args.gowers)
    elif args.riesz:
        t = riesz_sobolev_tuple(*[float(x) for x in args.riesz.split(",")])
    else:
        raise ConfigError("admissible: give --tuple, --gowers or --riesz")
    res = is_admissible(t)
    out = {"tuple": t.to_json(), "admissible": res.admissible, "exact": res.exact,
           "optima": res.optima, "witnesses": [w.tolist() for w in res.witnesses]}
    if t.N <= 4 and np.linalg.matrix_rank(t.functionals) == t.N:
        out["strict_margins"] = [float(strict_margin(t, m)) for m in range(t.M)]
        out["strictly_admissible"] = is_strictly_admissible(t)
    _write(args, report.to_json(out))
    return 0


def cmd_phase(args):
    k = int(_opt(args, "k"))
    s = PhaseSamples.load(args.input[0])
    res = poly_phase_recover(s, k, tau=float(_opt(args, "tau")), stride=int(_opt(args, "stride")),
                             seed=int(_opt(args, "seed")))
    out = {"k": k, "polynomial": res.poly.to_json(), "inlier_fraction": res.inlier_fraction,
           "rho": res.rho}
    _write(args, report.to_json(out))
    return 0


def cmd_stability(args):
    cfg_d = dict(args.config_data)
    if args.seed is not None and "seeds" not in cfg_d:
        cfg_d["seeds"] = [args.seed]
    if args.budget is not None:
        cfg_d["budget"] = args.budget
    if args.grid:
        shape, box = parse_grid_arg(args.grid)
        cfg_d["N"], cfg_d["box"] = shape[0], box[1]
    cfg = SweepConfig.from_dict(cfg_d)
    rows = stability_sweep(cfg)
    table = [r.row(timing=args.timing) for r in rows]
    text = report.to_csv(table)
    _write(args, text)
    summary = sweep_summary(rows)
    print(report.to_json(summary), end="", file=sys.stderr)
    if args.plot:
        data = args.out or "stability.csv"
        if args.out is None:
            report.emit(text, data)
        png = report.companion(data, ".png", "stability")
        report.emit(report.gnuplot_script(data, "amplitude", ["delta", "epsilon"], list(table[0]),
                                          "deficit and distance", image=png.replace(".png", "_gp.png")),
                    report.companion(data, ".gp", "stability"))
        report.plot_stability(table, png)
    return 0


def cmd_scale(args):
    k = int(_opt(args, "k"))
    f = _function(args, args.input[0] if args.input else None)
    rep = scale_localization(f, k).to_json()
    _write(args, report.to_json(rep))
    if args.plot:
        csv_path = report.companion(args.out, "_levels.csv", "scale")
        rows = [{"j": j, "measure": m, "weight": w} for j, m, w in rep["levels"]]
        report.emit(report.to_csv(rows), csv_path)
        report.emit(report.gnuplot_script(csv_path, "j", ["weight"], ["j", "measure", "weight"],
                                          "dyadic level weights"),
                    report.companion(args.out, ".gp", "scale"))
        report.plot_scale(rep, report.companion(args.out, ".png", "scale"))
    return 0


def cmd_levelset(args):
    k = int(_opt(args, "k"))
    f = _function(args, args.input[0] if args.input else None)
    table = levelset_alignment(f, k, float(_opt(args, "eta")), int(_opt(args, "points")), args.budget)
    _write(args, report.to_json({"schema": 1, "k": k, "table": table,
                                 "min_r": min(r["r"] for r in table)}))
    if args.plot:
        csv_path = report.companion(args.out, "_r.csv", "levelset")
        report.emit(report.to_csv(table), csv_path)
        report.emit(report.gnuplot_script(csv_path, "s", ["r"], list(table[0]), "level-set alignment"),
                    report.companion(args.out, ".gp", "levelset"))
        report.plot_levelset(table, report.companion(args.out, ".png", "levelset"))
    return 0


def cmd_chain(args):
    k = int(_opt(args, "k"))
    if args.scalar or not args.input:
        kmax = args.kmax
        rows = [chain_scalar(j) for j in range(1, kmax + 1)]
        ok = all(r["rel_err"] <= 1e-12 for r in rows)
        _write(args, report.to_json({"mode": "scalar", "rows": rows, "ok": ok}))
        return 0 if ok else 1
    fs = [read_ghk1(p) for p in args.input]
    res = verify_chain(fs, k, budget=args.budget)
    _write(args, report.to_json(res))
    return 0 if res["ok"] else 1


def cmd_selftest(args):
    checks = run_selftest(perturb=args.perturb_constants)
    for c in checks:
        status = "PASS" if c["ok"] else "FAIL"
        detail = {k: v for k, v in c.items() if k not in ("check", "ok")}
        print(f"{status} {c['check']} {json.dumps(report._clean(detail), sort_keys=True)}")
    failed = [c["check"] for c in checks if not c["ok"]]
    if failed:
        print("selftest failed: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values / sweep configuration")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--grid", default=None, help="N,box (box [-b,b]) or N,lo,hi")
    common.add_argument("--budget", type=float, default=None, help="U^k evaluation budget")
    common.add_argument("--plot", action="store_true", help="also write gnuplot script and PNG")
    common.add_argument("--timing", action="store_true", help="include runtimes (breaks byte-identity)")
    common.add_argument("-k", type=int, default=None)
    common.add_argument("--extremizer", help="inline extremizer JSON or @file")

    p = argparse.ArgumentParser(prog="ghk", description="Gowers-Host-Kra norm laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        return sp

    sp = add("norm", cmd_norm, "L^{p_k} and U^k norms of a function")
    sp.add_argument("input", nargs="*")
    sp = add("inner", cmd_inner, "Gowers inner product of 2^k functions")
    sp.add_argument("input", nargs="+")
    sp = add("deficit", cmd_deficit, "deficit of a function")
    sp.add_argument("input", nargs="*")
    sp = add("fit", cmd_fit, "fit the nearest extremizer")
    sp.add_argument("input", nargs="*")
    sp.add_argument("--restarts", type=int, default=None)
    sp = add("rearrange", cmd_rearrange, "symmetric decreasing rearrangement")
    sp.add_argument("input", nargs="*")
    sp.add_argument("--write", help="write f* as GHK1")
    sp.add_argument("--against", help="GHK1 file g for the distribution distance")
    sp.add_argument("--eta", type=float, default=None)
    sp = add("admissible", cmd_admissible, "admissibility of a functional tuple")
    sp.add_argument("--tuple", help="AdmissibleTuple JSON file")
    sp.add_argument("--gowers", type=int, help="Gowers tuple of degree k")
    sp.add_argument("--riesz", help="l1,l2,l3 for L = (x1, x2, x1+x2)")
    sp = add("phase-recover", cmd_phase, "polynomial phase recovery from samples")
    sp.add_argument("input", nargs=1)
    sp.add_argument("--tau", type=float, default=None)
    sp.add_argument("--stride", type=int, default=None)
    add("stability", cmd_stability, "deficit / distance sweep (CSV)")
    sp = add("scale", cmd_scale, "dyadic scale localization report")
    sp.add_argument("input", nargs="*")
    sp = add("levelset", cmd_levelset, "level-set alignment table")
    sp.add_argument("input", nargs="*")
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--points", type=int, default=None)
    sp = add("chain", cmd_chain, "nonnegative inequality chain")
    sp.add_argument("input", nargs="*")
    sp.add_argument("--scalar", action="store_true", help="constant identity only")
    sp.add_argument("--kmax", type=int, default=5)
    sp = add("selftest", cmd_selftest, "run the reduced invariant suite")
    sp.add_argument("--perturb-constants", type=float, default=0.0,
                    help="scale the constant table by (1 + x); a nonzero x must fail")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.config_data = _load_config(args.config)
        if args.k is None and "k" in args.config_data and args.command != "stability":
            args.k = int(args.config_data["k"])
        return int(args.func(args) or 0)
    except GHKError as e:
        print(f"ghk {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
