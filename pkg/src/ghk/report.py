"""Delimited output (CSV/JSON), gnuplot scripts and optional matplotlib figures."""
from __future__ import annotations

import csv
import io
import json
import os
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def to_csv(rows: Sequence[Dict[str, object]], columns: Optional[List[str]] = None) -> str:
    if not rows:
        return ""
    columns = columns or list(rows[0].keys())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _clean(o):
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    return o


def to_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def emit(text: str, path: Optional[str]):
    if path is None:
        print(text, end="")
    else:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)


def gnuplot_script(data_file: str, x: str, ys: Sequence[str], columns: Sequence[str],
                   title: str = "", logy: bool = False, image: Optional[str] = None) -> str:
    """A gnuplot script plotting named CSV columns of ``data_file``."""
    lines = ["set datafile separator ','", "set key autotitle columnhead"]
    if image:
        lines += ["set terminal pngcairo size 800,500", f"set output '{image}'"]
    if title:
        lines.append(f"set title '{title}'")
    lines.append(f"set xlabel '{x}'")
    if logy:
        lines.append("set logscale y")
    xi = list(columns).index(x) + 1
    parts = [f"'{data_file}' using {xi}:{list(columns).index(y) + 1} with linespoints title '{y}'"
             for y in ys]
    lines.append("plot " + ", \\\n     ".join(parts))
    return "\n".join(lines) + "\n"


def _pyplot():
    try:
        import matplotlib
    except ImportError:
        from .errors import ConfigError
        raise ConfigError("--plot needs matplotlib (pip install 'artifact[plot]'); "
                          "the gnuplot script was still written") from None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_stability(rows: Sequence[Dict[str, object]], path: str):
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    seeds = sorted({int(r["seed"]) for r in rows})
    for s in seeds:
        sub = [r for r in rows if int(r["seed"]) == s]
        a = [float(r["amplitude"]) for r in sub]
        axes[0].plot(a, [float(r["delta"]) for r in sub], "o-", ms=3, label=f"seed {s}")
        axes[1].plot([float(r["delta"]) for r in sub], [float(r["epsilon"]) for r in sub], "o", ms=3)
    axes[0].set_xlabel("amplitude")
    axes[0].set_ylabel("deficit")
    axes[0].legend(fontsize=7)
    axes[1].set_xlabel("deficit")
    axes[1].set_ylabel("distance to extremizers")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_scale(report: dict, path: str):
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    lv = np.array(report["levels"], float)
    axes[0].bar(lv[:, 0], lv[:, 2])
    axes[0].axvline(report["l_star"], color="k", ls="--")
    axes[0].set_xlabel("level j")
    axes[0].set_ylabel("2^j meas^(1/p)")
    tl = np.array(report["tail"], float)
    pos = tl[:, 1] > 0
    axes[1].semilogy(tl[pos, 0], tl[pos, 1], "o-")
    axes[1].set_xlabel("m")
    axes[1].set_ylabel("tail(m)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_levelset(table: Sequence[dict], path: str):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([r["s"] for r in table], [r["r"] for r in table], "o-")
    ax.axhline(1.0, color="k", lw=0.5)
    ax.set_xlabel("s")
    ax.set_ylabel("r(s)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def companion(path: Optional[str], suffix: str, default: str) -> str:
    if path is None:
        return default + suffix
    root, _ = os.path.splitext(path)
    return root + suffix
