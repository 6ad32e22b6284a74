"""Minimal deterministic SVG renderings (fixed canvas, fixed palette).

Output depends only on the inputs, so files can be diffed byte for byte.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 400
MARGIN = 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return out_lo + (np.asarray(values, dtype=float) - lo) / span * (out_hi - out_lo)


def _frame(title: str, body: list[str], legend: list[tuple[str, str]] | None = None) -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
    ]
    parts += body
    for i, (label, color) in enumerate(legend or []):
        y = MARGIN + 14 * i
        parts.append(f'<rect x="{WIDTH - MARGIN - 150}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
        parts.append(
            f'<text x="{WIDTH - MARGIN - 135}" y="{y}" font-family="sans-serif" font-size="11">{escape(label)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _axis_labels(lo: float, hi: float, x_labels: list[str] | None) -> list[str]:
    out = [
        f'<text x="{MARGIN - 5}" y="{HEIGHT - MARGIN}" text-anchor="end" font-family="sans-serif" font-size="10">{lo:.3g}</text>',
        f'<text x="{MARGIN - 5}" y="{MARGIN + 4}" text-anchor="end" font-family="sans-serif" font-size="10">{hi:.3g}</text>',
    ]
    if x_labels:
        out.append(
            f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 15}" font-family="sans-serif" font-size="10">{escape(x_labels[0])}</text>'
        )
        out.append(
            f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 15}" text-anchor="end" font-family="sans-serif" '
            f'font-size="10">{escape(x_labels[-1])}</text>'
        )
    return out


def line_chart(series: dict, title: str = "", x_labels: list[str] | None = None) -> str:
    """Overlay named equal-length series on one axis."""
    arrays = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    allv = np.concatenate([a for a in arrays.values()]) if arrays else np.zeros(1)
    lo, hi = float(np.nanmin(allv)), float(np.nanmax(allv))
    body = _axis_labels(lo, hi, x_labels)
    legend = []
    for i, (name, a) in enumerate(arrays.items()):
        color = PALETTE[i % len(PALETTE)]
        xs = _scale(np.arange(len(a)), 0, max(len(a) - 1, 1), MARGIN, WIDTH - MARGIN)
        ys = _scale(a, lo, hi, HEIGHT - MARGIN, MARGIN)
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        legend.append((name, color))
    return _frame(title, body, legend)


def bar_chart(labels, values, title: str = "") -> str:
    """Horizontal bars around a zero line, one per label."""
    values = np.asarray(values, dtype=float)
    lim = float(np.max(np.abs(values))) if values.size and np.any(values) else 1.0
    n = len(values)
    row = (HEIGHT - 2 * MARGIN) / max(n, 1)
    left = MARGIN + 150
    zero = left + (WIDTH - MARGIN - left) / 2
    half = (WIDTH - MARGIN - left) / 2
    body = [f'<line x1="{_fmt(zero)}" y1="{MARGIN}" x2="{_fmt(zero)}" y2="{HEIGHT - MARGIN}" stroke="gray"/>']
    for i, (label, v) in enumerate(zip(labels, values)):
        y = MARGIN + i * row
        w = abs(v) / lim * half
        x = zero if v >= 0 else zero - w
        color = PALETTE[0] if v >= 0 else PALETTE[1]
        body.append(f'<rect x="{_fmt(x)}" y="{_fmt(y + 2)}" width="{_fmt(w)}" height="{_fmt(max(row - 4, 1))}" fill="{color}"/>')
        body.append(
            f'<text x="{left - 5}" y="{_fmt(y + row / 2 + 4)}" text-anchor="end" font-family="sans-serif" '
            f'font-size="10">{escape(str(label))}</text>'
        )
    return _frame(title, body)


def fan_chart(history, point, lower, upper, title: str = "", x_labels: list[str] | None = None) -> str:
    """History line followed by a forecast median with a shaded band."""
    history = np.asarray(history, dtype=float)
    point, lower, upper = (np.asarray(a, dtype=float) for a in (point, lower, upper))
    n_hist, n_fc = len(history), len(point)
    total = n_hist + n_fc
    allv = np.concatenate([history, lower, upper])
    lo, hi = float(allv.min()), float(allv.max())
    xs = _scale(np.arange(total), 0, max(total - 1, 1), MARGIN, WIDTH - MARGIN)
    to_y = lambda a: _scale(a, lo, hi, HEIGHT - MARGIN, MARGIN)  # noqa: E731
    body = _axis_labels(lo, hi, x_labels)
    fx = xs[n_hist:]
    band = list(zip(fx, to_y(upper))) + list(zip(fx[::-1], to_y(lower)[::-1]))
    body.append(
        '<polygon points="' + " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in band) + f'" fill="{PALETTE[0]}" fill-opacity="0.25"/>'
    )
    hist_pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs[:n_hist], to_y(history)))
    body.append(f'<polyline points="{hist_pts}" fill="none" stroke="black" stroke-width="1.5"/>')
    fc_pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(fx, to_y(point)))
    body.append(f'<polyline points="{fc_pts}" fill="none" stroke="{PALETTE[0]}" stroke-width="2"/>')
    return _frame(title, body, [("history", "black"), ("forecast median", PALETTE[0])])
