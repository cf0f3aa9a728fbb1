"""Tiny SVG chart writer.

Emits line and scatter charts as standalone SVG documents without any
plotting dependency.  Good enough for diagnostic plots: axes, ticks,
polylines, markers, horizontal reference lines and a title.
"""

from __future__ import annotations

import math

__all__ = ["Figure"]

_COLORS = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
]


def _ticks(lo, hi, target=6):
    """Round tick locations covering [lo, hi]."""
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if span / step <= target:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * span:
        ticks.append(0.0 if abs(t) < step * 1e-9 else t)
        t += step
    return ticks


def _fmt(v):
    if v == int(v) and abs(v) < 1e7:
        return str(int(v))
    return f"{v:.4g}"


class Figure:
    def __init__(self, title="", xlabel="", ylabel="", width=640, height=420,
                 log_x=False):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.width = width
        self.height = height
        self.log_x = log_x
        self._series = []   # (kind, xs, ys, label, color)
        self._hlines = []   # (y, label, color)
        self._ci = 0

    def _color(self, color):
        if color is None:
            color = _COLORS[self._ci % len(_COLORS)]
            self._ci += 1
        return color

    def line(self, xs, ys, label="", color=None):
        self._series.append(("line", list(xs), list(ys), label,
                             self._color(color)))

    def scatter(self, xs, ys, label="", color=None):
        self._series.append(("scatter", list(xs), list(ys), label,
                             self._color(color)))

    def hline(self, y, label="", color="#444444", dashed=True):
        self._hlines.append((y, label, color, dashed))

    def _bounds(self):
        xs, ys = [], []
        for _, sx, sy, _, _ in self._series:
            xs.extend(sx)
            ys.extend(sy)
        ys.extend(y for y, _, _, _ in self._hlines)
        if not xs:
            xs = [0.0, 1.0]
        if not ys:
            ys = [0.0, 1.0]
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = min(ys), max(ys)
        if x_hi == x_lo:
            x_hi = x_lo + 1.0
        if y_hi == y_lo:
            y_hi = y_lo + 1.0
        pad = 0.05 * (y_hi - y_lo)
        return x_lo, x_hi, y_lo - pad, y_hi + pad

    def render(self):
        ml, mr, mt, mb = 62, 16, 34, 46
        pw = self.width - ml - mr
        ph = self.height - mt - mb
        x_lo, x_hi, y_lo, y_hi = self._bounds()
        if self.log_x:
            lx_lo, lx_hi = math.log10(x_lo), math.log10(x_hi)

        def px(x):
            if self.log_x:
                f = (math.log10(x) - lx_lo) / (lx_hi - lx_lo)
            else:
                f = (x - x_lo) / (x_hi - x_lo)
            return ml + f * pw

        def py(y):
            return mt + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" '
            f'width="{self.width}" height="{self.height}" '
            f'font-family="sans-serif" font-size="11">',
            f'<rect width="{self.width}" height="{self.height}" '
            f'fill="white"/>',
            f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" '
            f'fill="none" stroke="#222"/>',
        ]
        if self.title:
            out.append(
                f'<text x="{self.width / 2}" y="20" text-anchor="middle" '
                f'font-size="13">{self.title}</text>'
            )
        if self.log_x:
            kl, kh = math.ceil(lx_lo), math.floor(lx_hi)
            xticks = [10.0 ** k for k in range(kl, kh + 1)]
        else:
            xticks = _ticks(x_lo, x_hi)
        for t in xticks:
            x = px(t)
            out.append(f'<line x1="{x:.1f}" y1="{mt + ph}" x2="{x:.1f}" '
                       f'y2="{mt + ph + 4}" stroke="#222"/>')
            label = f"1e{int(math.log10(t))}" if self.log_x else _fmt(t)
            out.append(f'<text x="{x:.1f}" y="{mt + ph + 16}" '
                       f'text-anchor="middle">{label}</text>')
        for t in _ticks(y_lo, y_hi):
            y = py(t)
            out.append(f'<line x1="{ml - 4}" y1="{y:.1f}" x2="{ml}" '
                       f'y2="{y:.1f}" stroke="#222"/>')
            out.append(f'<text x="{ml - 7}" y="{y + 3.5:.1f}" '
                       f'text-anchor="end">{_fmt(t)}</text>')
        if self.xlabel:
            out.append(f'<text x="{ml + pw / 2}" y="{self.height - 8}" '
                       f'text-anchor="middle">{self.xlabel}</text>')
        if self.ylabel:
            out.append(
                f'<text x="14" y="{mt + ph / 2}" text-anchor="middle" '
                f'transform="rotate(-90 14 {mt + ph / 2})">'
                f'{self.ylabel}</text>'
            )
        for y, label, color, dashed in self._hlines:
            yy = py(y)
            dash = ' stroke-dasharray="6 4"' if dashed else ""
            out.append(f'<line x1="{ml}" y1="{yy:.1f}" x2="{ml + pw}" '
                       f'y2="{yy:.1f}" stroke="{color}"{dash}/>')
            if label:
                out.append(f'<text x="{ml + pw - 4}" y="{yy - 4:.1f}" '
                           f'text-anchor="end" fill="{color}">{label}</text>')
        legend_y = mt + 14
        for kind, sx, sy, label, color in self._series:
            pts = [(px(x), py(y)) for x, y in zip(sx, sy)]
            if kind == "line":
                d = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
                out.append(f'<polyline points="{d}" fill="none" '
                           f'stroke="{color}" stroke-width="1.2"/>')
            else:
                for x, y in pts:
                    out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.2" '
                               f'fill="{color}" fill-opacity="0.7"/>')
            if label:
                out.append(f'<text x="{ml + 8}" y="{legend_y}" '
                           f'fill="{color}">{label}</text>')
                legend_y += 14
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())
