"""Report writers: CSV and .dat tables with '#' provenance headers, JSON, and a small SVG emitter."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from typing import Iterable, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from . import __version__


def provenance(config_hash: str, grid_descriptor: str, extra: Sequence[str] = ()) -> list[str]:
    lines = [f"kslab {__version__}", f"config {config_hash}", grid_descriptor]
    lines.extend(extra)
    return lines


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def table_text(header: Sequence[str], columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    """RFC 4180 CSV body preceded by '#' comment lines."""
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def write_csv(path: str, header, columns, rows) -> str:
    rows = list(rows)
    with open(path, "w", newline="") as fh:
        fh.write(table_text(header, columns, rows))
    return path


def write_dat(path: str, header, columns, rows) -> str:
    """Whitespace-separated columns for gnuplot."""
    with open(path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("# " + " ".join(columns) + "\n")
        for row in rows:
            fh.write(" ".join(_fmt(x) for x in row) + "\n")
    return path


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path: str, header, payload: dict) -> str:
    body = {"provenance": list(header), **_clean(payload)}
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# -- SVG --------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class _Axes:
    def __init__(self, xs, ys, width, height, margin, logy=False):
        self.logy = logy
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if logy:
            ys = np.log10(ys[ys > 0]) if np.any(ys > 0) else np.array([0.0])
        ok = np.isfinite(xs)
        self.x0, self.x1 = (float(np.min(xs[ok])), float(np.max(xs[ok]))) if ok.any() else (0.0, 1.0)
        oky = np.isfinite(ys)
        self.y0, self.y1 = (float(np.min(ys[oky])), float(np.max(ys[oky]))) if oky.any() else (0.0, 1.0)
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 1, self.x1 + 1
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 1, self.y1 + 1
        pad = 0.05 * (self.y1 - self.y0)
        self.y0 -= pad
        self.y1 += pad
        self.w, self.h, self.m = width, height, margin

    def px(self, x):
        return self.m + (x - self.x0) / (self.x1 - self.x0) * (self.w - 2 * self.m)

    def py(self, y):
        if self.logy:
            y = math.log10(y) if y > 0 else self.y0
        return self.h - self.m - (y - self.y0) / (self.y1 - self.y0) * (self.h - 2 * self.m)


def _frame(ax: _Axes, title: str, xlabel: str, ylabel: str) -> list[str]:
    w, h, m = ax.w, ax.h, ax.m
    out = [
        f'<rect x="{m}" y="{m}" width="{w - 2 * m}" height="{h - 2 * m}" fill="none" stroke="black"/>',
        f'<text x="{w / 2}" y="{m / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{w / 2}" y="{h - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{h / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {h / 2})">{escape(ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = ax.x0 + frac * (ax.x1 - ax.x0)
        yv = ax.y0 + frac * (ax.y1 - ax.y0)
        ylab = f"1e{yv:.1f}" if ax.logy else f"{yv:.3g}"
        out.append(f'<text x="{ax.px(xv):.1f}" y="{h - m + 14}" text-anchor="middle" font-size="10">{xv:.3g}</text>')
        ypix = h - m - frac * (h - 2 * m)
        out.append(f'<text x="{m - 4}" y="{ypix:.1f}" text-anchor="end" font-size="10">{ylab}</text>')
    return out


def svg_lines(path: str, series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
              logy: bool = False, width: int = 640, height: int = 420,
              guides: Optional[dict] = None) -> str:
    """Line plot of {label: (x, y)} written as SVG 1.1."""
    allx = np.concatenate([np.asarray(x, dtype=float) for x, _ in series.values()]) if series else np.zeros(1)
    ally = np.concatenate([np.asarray(y, dtype=float) for _, y in series.values()]) if series else np.zeros(1)
    ax = _Axes(allx, ally, width, height, 60, logy)
    body = _frame(ax, title, xlabel, ylabel)
    for i, (label, (x, y)) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{ax.px(a):.2f},{ax.py(b):.2f}" for a, b in zip(x, y)
                       if math.isfinite(a) and math.isfinite(b) and (b > 0 or not logy))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        body.append(f'<text x="{width - 70}" y="{70 + 14 * i}" font-size="11" fill="{color}">{escape(label)}</text>')
    _write_svg(path, width, height, body, guides, ax)
    return path


def svg_scatter(path: str, x, y, title: str = "", xlabel: str = "", ylabel: str = "",
                vlines: Sequence[float] = (), width: int = 640, height: int = 420) -> str:
    """Scatter plot with optional vertical guide lines."""
    xs = np.concatenate((np.asarray(x, dtype=float), np.asarray(vlines, dtype=float)))
    ax = _Axes(xs, y, width, height, 60)
    body = _frame(ax, title, xlabel, ylabel)
    for v in vlines:
        body.append(f'<line x1="{ax.px(v):.2f}" y1="{ax.m}" x2="{ax.px(v):.2f}" y2="{height - ax.m}" '
                    f'stroke="gray" stroke-dasharray="4,3"/>')
    for a, b in zip(x, y):
        body.append(f'<circle cx="{ax.px(a):.2f}" cy="{ax.py(b):.2f}" r="2.5" fill="{_COLORS[0]}"/>')
    _write_svg(path, width, height, body)
    return path


def _write_svg(path, width, height, body, guides=None, ax=None):
    if guides and ax is not None:
        for label, yv in guides.items():
            yy = ax.py(yv)
            body.append(f'<line x1="{ax.m}" y1="{yy:.2f}" x2="{width - ax.m}" y2="{yy:.2f}" stroke="gray" '
                        f'stroke-dasharray="4,3"/>')
            body.append(f'<text x="{ax.m + 4}" y="{yy - 3:.2f}" font-size="10">{escape(label)}</text>')
    with open(path, "w") as fh:
        fh.write('<?xml version="1.0" encoding="UTF-8"?>\n')
        fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}">\n')
        fh.write('<rect width="100%" height="100%" fill="white"/>\n')
        for el in body:
            fh.write(el + "\n")
        fh.write("</svg>\n")


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
