"""Self-contained SVG rendering of fan charts (no plotting library needed)."""

from __future__ import annotations

import math
from typing import List, Sequence
from xml.sax.saxutils import escape

from .fanchart import FanChart

WIDTH, HEIGHT = 720, 440
MARGIN = dict(left=64, right=20, top=36, bottom=48)
COLORS = {
    "std_line": "#d4a017",
    "van_line": "#8c8c8c",
    "std_band": "#7b3f00",
    "van_band": "#e75480",
}


class _Axes:
    def __init__(self, x_lo, x_hi, y_lo, y_hi, log_x=True):
        self.log_x = log_x
        self.x_lo, self.x_hi = self._tx(x_lo), self._tx(x_hi)
        if self.x_hi == self.x_lo:
            self.x_hi = self.x_lo + 1.0
        pad = 0.05 * (y_hi - y_lo or 1.0)
        self.y_lo, self.y_hi = y_lo - pad, y_hi + pad
        self.w = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def _tx(self, x):
        return math.log10(x) if self.log_x else float(x)

    def px(self, x):
        return MARGIN["left"] + (self._tx(x) - self.x_lo) / (self.x_hi - self.x_lo) * self.w

    def py(self, y):
        return MARGIN["top"] + (self.y_hi - y) / (self.y_hi - self.y_lo) * self.h


def _polyline(ax: _Axes, xs, ys, color, width, opacity=1.0) -> str:
    pts = " ".join(f"{ax.px(x):.2f},{ax.py(y):.2f}" for x, y in zip(xs, ys))
    return (f'<polyline fill="none" stroke="{color}" stroke-width="{width}" '
            f'stroke-opacity="{opacity}" points="{pts}"/>')


def _nice_ticks(lo, hi, count=5) -> List[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    step = 10 ** math.floor(math.log10(span / count))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= count:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step) + 1)]


def render_fan_chart_svg(chart: FanChart, title: str = "", max_lines: int = 250) -> str:
    """Overlay of realizations plus the interquantile band edges of both estimators."""
    t = chart.checkpoints
    std, van = chart.trajectories["std"][:max_lines], chart.trajectories["van"][:max_lines]
    y_lo = float(min(std.min(), van.min()))
    y_hi = float(max(std.max(), van.max()))
    ax = _Axes(float(t[0]), float(t[-1]), y_lo, y_hi)
    parts: List[str] = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" '
                     f'font-size="14">{escape(title)}</text>')
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = MARGIN["top"], HEIGHT - MARGIN["bottom"]
    parts.append(f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
                 f'fill="none" stroke="black"/>')
    for yv in _nice_ticks(ax.y_lo, ax.y_hi):
        py = ax.py(yv)
        parts.append(f'<line x1="{x0}" y1="{py:.2f}" x2="{x1}" y2="{py:.2f}" stroke="#eeeeee"/>')
        parts.append(f'<text x="{x0 - 6}" y="{py + 4:.2f}" text-anchor="end">{yv:g}</text>')
    decade = 10 ** math.floor(math.log10(t[0]))
    while decade <= t[-1]:
        if decade >= t[0]:
            px = ax.px(decade)
            parts.append(f'<line x1="{px:.2f}" y1="{y0}" x2="{px:.2f}" y2="{y1}" stroke="#eeeeee"/>')
            parts.append(f'<text x="{px:.2f}" y="{y1 + 16}" text-anchor="middle">{decade:g}</text>')
        decade *= 10
    parts.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 10}" text-anchor="middle">t</text>')

    for rows, color in ((std, COLORS["std_line"]), (van, COLORS["van_line"])):
        for row in rows:
            parts.append(_polyline(ax, t, row, color, 0.5, 0.25))
    for key, color in (("std", COLORS["std_band"]), ("van", COLORS["van_band"])):
        band = chart.bands[key]
        parts.append(_polyline(ax, t, band["lo"], color, 2))
        parts.append(_polyline(ax, t, band["hi"], color, 2))

    legend = [("standard", COLORS["std_line"]), ("vanilla", COLORS["van_line"]),
              (_band_label("standard", chart.quantiles), COLORS["std_band"]),
              (_band_label("vanilla", chart.quantiles), COLORS["van_band"])]
    for i, (label, color) in enumerate(legend):
        ly = y0 + 14 + 16 * i
        parts.append(f'<line x1="{x1 - 170}" y1="{ly - 4}" x2="{x1 - 150}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="3"/>')
        parts.append(f'<text x="{x1 - 144}" y="{ly}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _band_label(name: str, quantiles: Sequence[float]) -> str:
    lo, hi = min(quantiles), max(quantiles)
    if lo == hi:
        return f"{name} q{lo:g}"
    return f"{name} {100 * (hi - lo):g}% band"

