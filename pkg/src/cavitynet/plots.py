"""Minimal SVG rendering for trajectories, schedules and scans.

Output is plain text with fixed number formatting, so identical data give
byte-identical files.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_chart", "phase_wheel"]

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
            "#7f7f7f", "#bcbd22")


def _fmt(v):
    return f"{v:.2f}"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def line_chart(x, series, title="", xlabel="", ylabel="", width=720, height=420, ylim=None):
    """Polyline chart; ``series`` is a list of ``(label, y)`` pairs."""
    x = np.asarray(x, dtype=float)
    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom
    ys = [np.asarray(y, dtype=float) for _, y in series]
    finite = np.concatenate([y[np.isfinite(y)] for y in ys]) if ys else np.array([0.0])
    if ylim is None:
        lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
    else:
        lo, hi = ylim
    x0, x1 = (float(x.min()), float(x.max())) if x.size else (0.0, 1.0)
    if x1 - x0 < 1e-12:
        x1 = x0 + 1.0

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (1 - (v - lo) / (hi - lo)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{_fmt(px(t))}" y1="{top + ph}" x2="{_fmt(px(t))}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px(t))}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(lo, hi):
        out.append(f'<line x1="{left - 5}" y1="{_fmt(py(t))}" x2="{left}" y2="{_fmt(py(t))}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_fmt(py(t) + 4)}" text-anchor="end">{t:.3g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for k, ((label, _), y) in enumerate(zip(series, ys)):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x, y) if np.isfinite(b))
        if pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 + 16 * k
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def phase_wheel(phases, probs, title="", size=420):
    """Unit-circle plot of node phases, arrow length proportional to |A|."""
    c = size / 2
    rad = size / 2 - 50
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<text x="{c:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<circle cx="{c:.1f}" cy="{c:.1f}" r="{rad:.1f}" fill="none" stroke="#999"/>',
    ]
    amps = np.sqrt(np.asarray(probs, dtype=float))
    scale = float(amps.max()) if amps.size and amps.max() > 0 else 1.0
    for k, (th, a) in enumerate(zip(phases, amps)):
        if not np.isfinite(th):
            continue
        length = rad * a / scale
        x, y = c + length * math.cos(th), c - length * math.sin(th)
        color = _PALETTE[k % len(_PALETTE)]
        out.append(f'<line x1="{c:.1f}" y1="{c:.1f}" x2="{_fmt(x)}" y2="{_fmt(y)}" stroke="{color}" stroke-width="2"/>')
        lx, ly = c + (length + 14) * math.cos(th), c - (length + 14) * math.sin(th)
        out.append(f'<text x="{_fmt(lx)}" y="{_fmt(ly + 4)}" text-anchor="middle">{k + 1}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
