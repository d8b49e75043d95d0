"""Run summaries, CSV tables and minimal SVG plots.

All writers are deterministic: fixed float formatting, sorted JSON keys and
no timestamps, so identical runs give byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ExperimentResult", "write_csv", "write_svg", "emit_report", "trace_rows",
           "eigen_rows", "to_jsonable"]


@dataclass
class ExperimentResult:
    experiment: str
    params: dict
    knobs: dict
    verdict: str
    metrics: dict
    tables: dict = field(default_factory=dict)
    plots: dict = field(default_factory=dict)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else str(float(v))
    return "" if v is None else str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def trace_rows(trace):
    """Rows ``s, norm_hk, a1, a0_1..a0_N`` of an evolution trace."""
    N = trace.a0.shape[1]
    header = ["s", "norm_hk", "a1"] + [f"a0_{i + 1}" for i in range(N)]
    rows = [[float(trace.s[j]), float(trace.norms[j]), float(np.real(trace.a1[j]))]
            + [float(np.real(v)) for v in trace.a0[j]] for j in range(len(trace.s))]
    return header, rows


def eigen_rows(table):
    header = ["re", "im", "residual", "stable_flag", "multiplicity"]
    rows = [[r["re"], r["im"], r["residual"], r["stable_flag"], r["multiplicity"]] for r in table]
    return header, rows


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_svg(path, series, title="", xlabel="", ylabel="", logy=False, width=640, height=420):
    """Line or scatter plot. ``series`` is a list of ``(label, x, y, style)`` with
    ``style`` in ``{"line", "dot"}``."""
    pad = 60
    xs, ys = [], []
    prepared = []
    for label, x, y, style in series:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if logy:
            keep = y > 0
            x, y = x[keep], np.log10(y[keep])
        keep = np.isfinite(x) & np.isfinite(y)
        x, y = x[keep], y[keep]
        prepared.append((label, x, y, style))
        xs.append(x)
        ys.append(y)
    allx = np.concatenate(xs) if xs else np.zeros(1)
    ally = np.concatenate(ys) if ys else np.zeros(1)
    if allx.size == 0:
        allx, ally = np.zeros(1), np.zeros(1)
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x0, x1 = x0 - 1.0, x1 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0

    def X(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def Y(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="15">{title}</text>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="{height - 15}" text-anchor="middle" font-size="12">{xlabel}</text>',
           f'<text x="15" y="{height / 2:.1f}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 15 {height / 2:.1f})">{("log10 " if logy else "") + ylabel}</text>']
    for t in np.linspace(x0, x1, 5):
        out.append(f'<text x="{X(t):.1f}" y="{height - pad + 16}" text-anchor="middle" '
                   f'font-size="10">{t:.3g}</text>')
    for t in np.linspace(y0, y1, 5):
        out.append(f'<text x="{pad - 6}" y="{Y(t) + 3:.1f}" text-anchor="end" '
                   f'font-size="10">{t:.3g}</text>')
    for i, (label, x, y, style) in enumerate(prepared):
        c = colors[i % len(colors)]
        if style == "line" and x.size > 1:
            pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(x, y))
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        else:
            out += [f'<circle cx="{X(a):.2f}" cy="{Y(b):.2f}" r="2.5" fill="{c}"/>'
                    for a, b in zip(x, y)]
        out.append(f'<text x="{width - pad - 4}" y="{pad + 14 * (i + 1)}" text-anchor="end" '
                   f'font-size="11" fill="{c}">{label}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
    return path


def emit_report(results, out_dir, plots=True):
    """Write ``summary.json`` plus every table and plot of ``results``.

    ``results`` is an :class:`ExperimentResult` or ``None`` (an empty summary).
    Returns the list of written file names, relative to ``out_dir``.
    """
    os.makedirs(out_dir, exist_ok=True)
    files = []
    if results is None:
        summary = {"experiment": None, "params": {}, "knobs": {}, "verdict": None,
                   "metrics": {"experiments": 0}, "files": []}
    else:
        for name in sorted(results.tables):
            header, rows = results.tables[name]
            write_csv(os.path.join(out_dir, name), header, rows)
            files.append(name)
        if plots:
            for name in sorted(results.plots):
                spec = results.plots[name]
                write_svg(os.path.join(out_dir, name), **spec)
                files.append(name)
        summary = {"experiment": results.experiment, "params": results.params,
                   "knobs": results.knobs, "verdict": results.verdict,
                   "metrics": results.metrics, "files": files + ["summary.json"]}
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(to_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return files + ["summary.json"]
