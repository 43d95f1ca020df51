"""Dependency-free SVG barcode rendering.

Bars are horizontal segments over the filtration axis, H0 on top (sorted
by death, shortest first), H1 below in a second color.  Censored bars
(death = +inf) run to the right edge and are drawn dashed.  Output is a
deterministic string for byte-stable artifacts.
"""

from __future__ import annotations

import math

import numpy as np

from .persistence import PersistenceDiagram

_WIDTH = 860
_PLOT_W = 780
_LEFT = 60
_TOP = 20
_MAX_PLOT_H = 420
_COLORS = {0: "#1f77b4", 1: "#d62728"}


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def barcode_svg(diag: PersistenceDiagram, eps_cap: float | None = None) -> str:
    """Render a persistence diagram as an SVG barcode plot."""
    cap = eps_cap
    if cap is None:
        finite = diag.deaths[np.isfinite(diag.deaths)]
        cap = diag.eps_max if math.isfinite(diag.eps_max) else None
        if cap is None:
            cap = float(finite.max()) * 1.05 if finite.size else 1.0
    if cap <= 0:
        cap = 1.0

    groups = []
    for dim in (0, 1):
        bars = diag.bars(dim)
        order = np.lexsort((bars[:, 0], bars[:, 1]))
        groups.append(bars[order])
    n_rows = sum(len(g) for g in groups) + 1

    row_h = max(1.0, min(6.0, _MAX_PLOT_H / max(1, n_rows)))
    plot_h = row_h * n_rows
    height = int(_TOP + plot_h + 45)
    sx = _PLOT_W / cap

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{height}" viewBox="0 0 {_WIDTH} {height}">',
        f'<rect width="{_WIDTH}" height="{height}" fill="white"/>',
    ]
    y = _TOP
    for dim, bars in zip((0, 1), groups):
        color = _COLORS[dim]
        for birth, death in bars:
            x0 = _LEFT + birth * sx
            if math.isfinite(death):
                x1 = _LEFT + min(death, cap) * sx
                dash = ""
            else:
                x1 = _LEFT + _PLOT_W
                dash = ' stroke-dasharray="6,3"'
            parts.append(
                f'<line x1="{_fmt(x0)}" y1="{_fmt(y)}" x2="{_fmt(x1)}" '
                f'y2="{_fmt(y)}" stroke="{color}" stroke-width="{_fmt(max(0.8, row_h * 0.7))}"{dash}/>'
            )
            y += row_h
        y += row_h  # gap between dimension groups

    axis_y = _TOP + plot_h + 10
    parts.append(
        f'<line x1="{_LEFT}" y1="{_fmt(axis_y)}" x2="{_LEFT + _PLOT_W}" '
        f'y2="{_fmt(axis_y)}" stroke="black" stroke-width="1"/>'
    )
    for k in range(6):
        eps = cap * k / 5
        x = _LEFT + eps * sx
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(axis_y)}" x2="{_fmt(x)}" '
            f'y2="{_fmt(axis_y + 5)}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(axis_y + 18)}" font-size="11" '
            f'text-anchor="middle" font-family="sans-serif">{eps:.4g}</text>'
        )
    parts.append(
        f'<text x="{_LEFT + _PLOT_W // 2}" y="{_fmt(axis_y + 34)}" font-size="12" '
        f'text-anchor="middle" font-family="sans-serif">filtration scale</text>'
    )
    legend_y = _TOP - 6
    parts.append(
        f'<text x="{_LEFT}" y="{_fmt(legend_y)}" font-size="11" fill="{_COLORS[0]}" '
        f'font-family="sans-serif">H0: {int(np.count_nonzero(diag.dims == 0))} bars</text>'
    )
    parts.append(
        f'<text x="{_LEFT + 160}" y="{_fmt(legend_y)}" font-size="11" fill="{_COLORS[1]}" '
        f'font-family="sans-serif">H1: {int(np.count_nonzero(diag.dims == 1))} bars</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
