"""Minimal static SVG line plots.

Output depends only on the input numbers (fixed formatting, no timestamps),
so identical data gives byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .errors import ValidationError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


@dataclass(frozen=True)
class PlotStyle:
    width: int = 720
    height: int = 480
    xlog: bool = False
    ylog: bool = False
    markers: bool = False
    line_width: float = 1.5


def _nice_ticks(lo, hi, n=6):
    if hi <= lo:
        hi = lo + (abs(lo) if lo else 1.0)
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _log_ticks(lo, hi):
    return [10.0 ** k for k in range(math.floor(lo), math.ceil(hi) + 1)
            if lo - 1e-9 <= k <= hi + 1e-9]


def _fmt(v):
    return f"{v:.6g}"


def _series_arrays(series):
    if not series:
        raise ValidationError("at least one series is required")
    out = []
    for item in series:
        label, x, y = item
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if x.size == 0 or x.size != y.size:
            raise ValidationError(f"series {label!r}: x and y must be non-empty and equally long")
        keep = np.isfinite(x) & np.isfinite(y)
        if not keep.any():
            raise ValidationError(f"series {label!r} has no finite points")
        out.append((str(label), x[keep], y[keep]))
    return out


def render_svg(series, title="", xlabel="", ylabel="", style=None, annotations=()):
    """SVG document text for labelled ``(label, x, y)`` series.

    ``annotations`` is a sequence of ``(x, text)`` vertical markers.
    """
    style = PlotStyle() if style is None else style
    data = _series_arrays(series)
    tx = np.log10 if style.xlog else (lambda a: a)
    ty = np.log10 if style.ylog else (lambda a: a)
    for label, x, y in data:
        if (style.xlog and np.any(x <= 0)) or (style.ylog and np.any(y <= 0)):
            raise ValidationError(f"series {label!r}: log axes need positive values")
    xs = np.concatenate([tx(x) for _, x, _ in data])
    ys = np.concatenate([ty(y) for _, _, y in data])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        pad = abs(y0) * 0.1 or 1.0
        y0, y1 = y0 - pad, y1 + pad
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    W, Hh = style.width, style.height
    left, right, top, bottom = 80, 170, 40, 60
    pw, ph = W - left - right, Hh - top - bottom
    px = lambda v: left + (v - x0) / (x1 - x0) * pw
    py = lambda v: top + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{Hh}" '
           f'viewBox="0 0 {W} {Hh}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{W}" height="{Hh}" fill="white"/>']
    if title:
        out.append(f'<text x="{left + pw / 2:.2f}" y="22" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" '
               f'stroke="black"/>')

    xt = _log_ticks(x0, x1) if style.xlog else _nice_ticks(x0, x1)
    for t in xt:
        if not (x0 - 1e-9 <= t <= x1 + 1e-9) and not style.xlog:
            continue
        X = px(math.log10(t) if style.xlog else t)
        out.append(f'<line x1="{X:.2f}" y1="{top + ph}" x2="{X:.2f}" y2="{top + ph + 5}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{top + ph + 18}" text-anchor="middle">'
                   f'{_fmt(t)}</text>')
    yt = _log_ticks(y0, y1) if style.ylog else _nice_ticks(y0, y1)
    for t in yt:
        Y = py(math.log10(t) if style.ylog else t)
        if not (top - 1e-6 <= Y <= top + ph + 1e-6):
            continue
        out.append(f'<line x1="{left - 5}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{Y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2:.2f}" y="{Hh - 15}" text-anchor="middle">'
                   f'{escape(xlabel)}</text>')
    if ylabel:
        cy = top + ph / 2
        out.append(f'<text x="18" y="{cy:.2f}" text-anchor="middle" '
                   f'transform="rotate(-90 18 {cy:.2f})">{escape(ylabel)}</text>')

    for xa, text in annotations:
        X = px(math.log10(xa) if style.xlog else xa)
        if left <= X <= left + pw:
            out.append(f'<line x1="{X:.2f}" y1="{top}" x2="{X:.2f}" y2="{top + ph}" '
                       f'stroke="gray" stroke-dasharray="4 3"/>')
            out.append(f'<text x="{X + 4:.2f}" y="{top + 14}" fill="gray">{escape(text)}</text>')

    for i, (label, x, y) in enumerate(data):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(tx(x), ty(y)))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="{style.line_width}" '
                   f'points="{pts}"/>')
        if style.markers:
            for a, b in zip(tx(x), ty(y)):
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="{color}"/>')
        ly = top + 10 + 18 * i
        lx = left + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{lx + 28}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(path, series, title="", xlabel="", ylabel="", style=None, annotations=()):
    """Write :func:`render_svg` output to ``path`` and return the path."""
    text = render_svg(series, title, xlabel, ylabel, style, annotations)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
