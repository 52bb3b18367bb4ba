"""Dependency-free SVG 1.1 line charts of entropy histograms."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [float(t) for t in np.arange(start, hi + step * 1e-9, step)]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def svg_line_chart(
    series,
    x_label: str = "x",
    y_label: str = "y",
    width: int = 640,
    height: int = 400,
) -> str:
    """One polyline per ``(name, xs, ys)`` entry, on shared axes with ticks and a legend."""
    series = [(name, np.asarray(xs, float), np.asarray(ys, float)) for name, xs, ys in series]
    xs_all = np.concatenate([xs for _, xs, _ in series])
    ys_all = np.concatenate([ys for _, _, ys in series])
    if xs_all.size == 0:
        raise ValueError("nothing to plot")
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = float(ys_all.min()), float(ys_all.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    ml, mr, mt, mb = 70, 20, 20, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<g stroke="black" stroke-width="1">'
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}"/>'
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}"/></g>',
        '<g font-family="sans-serif" font-size="11">',
    ]
    for t in _ticks(x0, x1):
        out.append(
            f'<line x1="{px(t):.2f}" y1="{mt + ph}" x2="{px(t):.2f}" y2="{mt + ph + 4}" stroke="black"/>'
            f'<text x="{px(t):.2f}" y="{mt + ph + 16}" text-anchor="middle">{_fmt(t)}</text>'
        )
    for t in _ticks(y0, y1):
        out.append(
            f'<line x1="{ml - 4}" y1="{py(t):.2f}" x2="{ml}" y2="{py(t):.2f}" stroke="black"/>'
            f'<text x="{ml - 6}" y="{py(t) + 4:.2f}" text-anchor="end">{_fmt(t)}</text>'
        )
    out.append(
        f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(x_label)}</text>'
        f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {mt + ph / 2})">{escape(y_label)}</text>'
    )
    for k, (name, xs, ys) in enumerate(series):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(
            f'<text x="{ml + pw - 4}" y="{mt + 14 + 14 * k}" text-anchor="end" fill="{color}">'
            f"{escape(name)}</text>"
        )
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
