"""Self-contained SVG line plots.

Hand-rolled rather than rasterized so output is deterministic text: fixed
800x500 viewBox, linear (or log-y) axes with labeled ticks, one polyline per
series and a legend taken from the column names.  No external references.
"""

from __future__ import annotations

import math

import numpy as np

from .tables import Table

WIDTH, HEIGHT = 800, 500
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 20, 40, 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class EmptyTableError(ValueError):
    pass


def _nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def emit_plot(table: Table, kind: str = "line", log_y: bool = False,
              title: str | None = None) -> str:
    """Render the table as an SVG document string.

    The first column is the x axis; every further column becomes one series.
    With log_y, nonpositive samples are dropped from the plotted polylines.
    """
    if table.n_rows == 0:
        raise EmptyTableError(f"table {table.name!r} has no rows")
    if len(table.columns) < 2:
        raise EmptyTableError(f"table {table.name!r} has no series columns")

    x = np.asarray(table.columns[0], float)
    series = [(name, np.asarray(col, float))
              for name, col in zip(table.headers[1:], table.columns[1:])]

    x_lo, x_hi = float(np.min(x)), float(np.max(x))
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    ys = np.concatenate([col for _, col in series])
    if log_y:
        positive = ys[ys > 0]
        if positive.size == 0:
            raise EmptyTableError("log-scale plot needs at least one positive sample")
        y_lo = math.floor(math.log10(float(positive.min())))
        y_hi = math.ceil(math.log10(float(positive.max())))
        if y_hi == y_lo:
            y_hi = y_lo + 1
        y_ticks = list(range(int(y_lo), int(y_hi) + 1))
    else:
        y_lo, y_hi = float(np.min(ys)), float(np.max(ys))
        if y_hi == y_lo:
            y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
        pad = 0.05 * (y_hi - y_lo)
        y_lo, y_hi = y_lo - pad, y_hi + pad
        y_ticks = _nice_ticks(y_lo, y_hi)

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(v: float) -> float:
        return MARGIN_L + (v - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: float) -> float:
        if log_y:
            f = (math.log10(v) - y_lo) / (y_hi - y_lo)
        else:
            f = (v - y_lo) / (y_hi - y_lo)
        return MARGIN_T + (1.0 - f) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="black"/>',
    ]
    if title:
        parts.append(f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" '
                     f'font-size="15">{title}</text>')

    for t in _nice_ticks(x_lo, x_hi):
        px = sx(t)
        parts.append(f'<line x1="{px:.2f}" y1="{MARGIN_T + plot_h}" x2="{px:.2f}" '
                     f'y2="{MARGIN_T + plot_h + 5}" stroke="black"/>')
        parts.append(f'<text x="{px:.2f}" y="{MARGIN_T + plot_h + 18}" '
                     f'text-anchor="middle">{_fmt(t)}</text>')
    for t in y_ticks:
        py = sy(10.0**t if log_y else t)
        label = f"1e{t:d}" if log_y else _fmt(t)
        parts.append(f'<line x1="{MARGIN_L - 5}" y1="{py:.2f}" x2="{MARGIN_L}" '
                     f'y2="{py:.2f}" stroke="black"/>')
        parts.append(f'<text x="{MARGIN_L - 8}" y="{py + 4:.2f}" '
                     f'text-anchor="end">{label}</text>')
    parts.append(f'<text x="{MARGIN_L + plot_w / 2:.1f}" y="{HEIGHT - 15}" '
                 f'text-anchor="middle">{table.headers[0]}</text>')

    for i, (name, col) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = []
        for xv, yv in zip(x, col):
            if log_y and yv <= 0:
                continue
            pts.append(f"{sx(xv):.2f},{sy(yv):.2f}")
        if pts:
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                         f'points="{" ".join(pts)}"/>')
        ly = MARGIN_T + 14 + 16 * i
        lx = MARGIN_L + plot_w - 150
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{lx + 30}" y="{ly}">{name}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
