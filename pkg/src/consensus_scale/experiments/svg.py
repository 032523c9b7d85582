"""Minimal deterministic SVG line charts.

Output depends only on the input data: fixed canvas, fixed palette, fixed
number formatting, no timestamps or random ids.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 500
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


@dataclass(frozen=True)
class Series:
    label: str | None
    x: Sequence[float]
    y: Sequence[float]
    dashed: bool = False


@dataclass(frozen=True)
class Axes:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xscale: str = "linear"
    yscale: str = "linear"


def _f(v: float) -> str:
    return f"{v:.2f}"


def _transform(vals, scale):
    vals = np.asarray(vals, dtype=float)
    if scale == "log":
        if np.any(vals <= 0):
            raise ValueError("log axis needs strictly positive data")
        return np.log10(vals)
    if scale != "linear":
        raise ValueError(f"unknown axis scale {scale!r}")
    return vals


def _range(lo, hi):
    if hi - lo < 1e-12 * max(1.0, abs(lo), abs(hi)):
        pad = 0.5 if lo == 0 else 0.05 * abs(lo)
        return lo - pad, hi + pad
    return lo, hi


def _ticks(lo, hi, scale):
    if scale == "log":
        first, last = math.floor(lo), math.ceil(hi)
        return [(float(k), f"1e{k}") for k in range(first, last + 1) if lo - 1e-9 <= k <= hi + 1e-9]
    step = 10 ** math.floor(math.log10((hi - lo) / 5))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append((v, f"{v:g}"))
        v = start + len(out) * step
    return out


def render_panel(series: Sequence[Series], axes: Axes, x0: float, y0: float,
                 w: float, h: float) -> list[str]:
    """SVG elements for one chart inside the box ``(x0, y0, w, h)``."""
    if not series:
        raise ValueError("nothing to plot: empty series list")
    for s in series:
        if len(s.x) != len(s.y) or len(s.x) == 0:
            raise ValueError(f"series {s.label!r} is empty or has mismatched lengths")
    tx = [_transform(s.x, axes.xscale) for s in series]
    ty = [_transform(s.y, axes.yscale) for s in series]
    xlo, xhi = _range(min(a.min() for a in tx), max(a.max() for a in tx))
    ylo, yhi = _range(min(a.min() for a in ty), max(a.max() for a in ty))
    left, right, top, bottom = 60, 15, 30, 40
    pw, ph = w - left - right, h - top - bottom
    px0, py0 = x0 + left, y0 + top

    def sx(v):
        return px0 + (v - xlo) / (xhi - xlo) * pw

    def sy(v):
        return py0 + ph - (v - ylo) / (yhi - ylo) * ph

    out = [f'<rect x="{_f(px0)}" y="{_f(py0)}" width="{_f(pw)}" height="{_f(ph)}" '
           'fill="none" stroke="#000" stroke-width="1"/>']
    for v, lab in _ticks(xlo, xhi, axes.xscale):
        out.append(f'<line x1="{_f(sx(v))}" y1="{_f(py0 + ph)}" x2="{_f(sx(v))}" '
                   f'y2="{_f(py0 + ph + 4)}" stroke="#000"/>')
        out.append(f'<text x="{_f(sx(v))}" y="{_f(py0 + ph + 16)}" font-size="10" '
                   f'text-anchor="middle">{escape(lab)}</text>')
    for v, lab in _ticks(ylo, yhi, axes.yscale):
        out.append(f'<line x1="{_f(px0 - 4)}" y1="{_f(sy(v))}" x2="{_f(px0)}" '
                   f'y2="{_f(sy(v))}" stroke="#000"/>')
        out.append(f'<text x="{_f(px0 - 6)}" y="{_f(sy(v) + 3)}" font-size="10" '
                   f'text-anchor="end">{escape(lab)}</text>')
    if axes.title:
        out.append(f'<text x="{_f(px0 + pw / 2)}" y="{_f(y0 + 18)}" font-size="13" '
                   f'text-anchor="middle">{escape(axes.title)}</text>')
    if axes.xlabel:
        out.append(f'<text x="{_f(px0 + pw / 2)}" y="{_f(y0 + h - 6)}" font-size="11" '
                   f'text-anchor="middle">{escape(axes.xlabel)}</text>')
    if axes.ylabel:
        cx, cy = x0 + 14, py0 + ph / 2
        out.append(f'<text x="{_f(cx)}" y="{_f(cy)}" font-size="11" text-anchor="middle" '
                   f'transform="rotate(-90 {_f(cx)} {_f(cy)})">{escape(axes.ylabel)}</text>')
    legend_y = py0 + 12
    for k, (s, xs, ys) in enumerate(zip(series, tx, ty)):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_f(sx(a))},{_f(sy(b))}" for a, b in zip(xs, ys))
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"{dash}/>')
        if s.label:
            lx = px0 + pw - 150
            out.append(f'<line x1="{_f(lx)}" y1="{_f(legend_y - 4)}" x2="{_f(lx + 18)}" '
                       f'y2="{_f(legend_y - 4)}" stroke="{color}" stroke-width="2"{dash}/>')
            out.append(f'<text x="{_f(lx + 24)}" y="{_f(legend_y)}" font-size="10">'
                       f'{escape(s.label)}</text>')
            legend_y += 14
    return out


def _document(body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">')
    return "\n".join([head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>',
                      *body, "</svg>"]) + "\n"


def emit_svg(series: Sequence[Series], axes: Axes, out: str | os.PathLike) -> str:
    """Write a single-panel chart and return the SVG text."""
    text = _document(render_panel(series, axes, 0, 0, WIDTH, HEIGHT))
    with open(out, "w", newline="\n") as fh:
        fh.write(text)
    return text


def emit_svg_grid(panels: Sequence[tuple[Sequence[Series], Axes]], rows: int, cols: int,
                  out: str | os.PathLike) -> str:
    """Write ``rows x cols`` panels, filled row by row, on the same canvas."""
    if len(panels) != rows * cols:
        raise ValueError(f"expected {rows * cols} panels, got {len(panels)}")
    w, h = WIDTH / cols, HEIGHT / rows
    body = []
    for k, (series, axes) in enumerate(panels):
        r, c = divmod(k, cols)
        body += render_panel(series, axes, c * w, r * h, w, h)
    text = _document(body)
    with open(out, "w", newline="\n") as fh:
        fh.write(text)
    return text


def write_series_csv(panels: Sequence[tuple[str, Sequence[Series]]], out: str | os.PathLike):
    """Plotted data behind an SVG: ``panel,series,x,y``."""
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["panel", "series", "x", "y"])
        for name, series in panels:
            for k, s in enumerate(series):
                label = s.label if s.label else f"series{k}"
                for x, y in zip(s.x, s.y):
                    w.writerow([name, label, repr(float(x)), repr(float(y))])
