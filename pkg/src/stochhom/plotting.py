"""SVG charts of the CSV reports written by the command line tool.

Rendering goes through a bare matplotlib ``Figure`` with a fixed hash salt
and no date metadata, so the same CSV always gives the same SVG bytes.
"""
import csv
from pathlib import Path

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

from .experiments import loglog_slope

# header -> (default kind, x column, y columns)
KNOWN = {
    "epsilon,replica,sup_l2_error,final_l2_error,energy_sup,grad_energy_int,dudt_energy": (
        "loglog", "epsilon", ("sup_l2_error", "final_l2_error")),
    "delta,lhs,stderr": ("loglog", "delta", ("lhs",)),
    "t,gap,bound": ("line", "t", ("gap", "bound")),
    "epsilon,replica,gap": ("loglog", "epsilon", ("gap",)),
    "t,x_index,u,v": ("line", "x_index", ("u", "v")),
    "t,x_index,u": ("line", "x_index", ("u",)),
    "i,j,abar_ij": ("line", "entry", ("abar_ij",)),
}


def read_report(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: no data")
    header = ",".join(rows[0])
    if header not in KNOWN:
        raise ValueError(f"{path}: unknown header {header!r}")
    data = [r for r in rows[1:] if r]
    if not data:
        raise ValueError(f"{path}: no data")
    cols = {name: np.array([float(r[i]) for r in data]) for i, name in enumerate(rows[0])}
    return header, cols


def _series(header, cols):
    """(x, {label: y}) to draw, aggregating where a report has replicas or snapshots."""
    _, xname, ynames = KNOWN[header]
    if xname == "epsilon":
        eps = np.unique(cols["epsilon"])[::-1]
        return xname, eps, {y: np.array([cols[y][cols["epsilon"] == e].mean() for e in eps]) for y in ynames}
    if xname == "x_index":
        last = cols["t"] == cols["t"].max()
        return f"x_index (t = {cols['t'].max()!r})", cols["x_index"][last], {y: cols[y][last] for y in ynames}
    if xname == "entry":
        return "entry (row-major)", np.arange(len(cols["abar_ij"])), {"abar_ij": cols["abar_ij"]}
    return xname, cols[xname], {y: cols[y] for y in ynames}


def emit_plot(csv_path, kind=None, out=None):
    """Write an SVG chart of ``csv_path`` and return its path."""
    csv_path = Path(csv_path)
    header, cols = read_report(csv_path)
    kind = kind or KNOWN[header][0]
    if kind not in ("line", "loglog"):
        raise ValueError(f"unknown plot kind {kind!r}")
    xlabel, x, ys = _series(header, cols)
    out = Path(out) if out is not None else csv_path.with_suffix(".svg")
    with rc_context({"svg.hashsalt": "stochhom", "svg.fonttype": "path"}):
        fig = Figure(figsize=(6.0, 4.0))
        ax = fig.add_subplot()
        for label, y in ys.items():
            if kind == "loglog":
                keep = (x > 0) & (y > 0)
                ax.loglog(x[keep], y[keep], marker="o", label=label)
            else:
                ax.plot(x, y, marker=".", label=label)
        if header == "delta,lhs,stderr" and len(x) > 1 and np.all(ys["lhs"] > 0):
            slope = loglog_slope(x, ys["lhs"])
            ax.annotate(f"fitted slope {slope:.3f}", xy=(0.05, 0.05), xycoords="axes fraction")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(", ".join(ys))
        ax.set_title(csv_path.name)
        ax.legend()
        fig.tight_layout()
        fig.savefig(out, format="svg", metadata={"Date": None})
    return out
