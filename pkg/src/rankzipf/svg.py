"""Minimal SVG 1.1 line plot for convergence reports (no plotting dependency)."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN = 56


def _num(x: float) -> str:
    return f"{x:.2f}"


def convergence_svg(
    xs: Sequence[float],
    ratios: Sequence[float],
    title: str,
    x_label: str,
    log_x: bool = False,
) -> str:
    """Ratio-to-prediction against the abscissa, with a rule line at 1."""
    if not xs:
        raise ValueError("nothing to plot")
    tx = [math.log10(x) for x in xs] if log_x else [float(x) for x in xs]
    x0, x1 = min(tx), max(tx)
    if x1 == x0:
        x1 = x0 + 1.0
    y0 = min(min(ratios), 1.0)
    y1 = max(max(ratios), 1.0)
    pad = 0.05 * (y1 - y0 or 1.0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    points = " ".join(f"{_num(sx(x))},{_num(sy(y))}" for x, y in zip(tx, ratios))
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{_num(sy(1.0))}" x2="{WIDTH - MARGIN}" y2="{_num(sy(1.0))}" '
        f'stroke="red" stroke-dasharray="6,4"/>',
        f'<polyline points="{points}" fill="none" stroke="navy" stroke-width="1.2"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        xlab = f"1e{xv:.1f}" if log_x else f"{xv:.3g}"
        lines.append(
            f'<text x="{_num(sx(xv))}" y="{HEIGHT - MARGIN + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{xlab}</text>'
        )
        lines.append(
            f'<text x="{MARGIN - 6}" y="{_num(sy(yv) + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{yv:.3f}</text>'
        )
    lines.append(
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12">{escape(x_label)}</text>'
    )
    lines.append(
        f'<text x="16" y="{HEIGHT / 2}" transform="rotate(-90 16 {HEIGHT / 2})" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">empirical / predicted</text>'
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
