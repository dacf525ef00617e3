"""Minimal static SVG charts: actual-vs-predicted lines and grouped RMSE bars."""
from __future__ import annotations

from datetime import datetime, timezone
from xml.sax.saxutils import escape

PALETTE = ("#222222", "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e")
WIDTH, HEIGHT = 900, 360
MARGIN = dict(left=60, right=20, top=40, bottom=50)


class SVG:
    def __init__(self, width=WIDTH, height=HEIGHT):
        self.width = width
        self.height = height
        self.parts: list[str] = []

    def add(self, element: str) -> None:
        self.parts.append(element)

    def line(self, x1, y1, x2, y2, stroke="#999999", width=1.0, extra=""):
        self.add(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{stroke}" stroke-width="{width:g}"{extra}/>'
        )

    def text(self, x, y, s, anchor="middle", size=12, extra=""):
        self.add(
            f'<text x="{x:.2f}" y="{y:.2f}" font-family="sans-serif" font-size="{size}" '
            f'text-anchor="{anchor}"{extra}>{escape(str(s))}</text>'
        )

    def rect(self, x, y, w, h, fill):
        self.add(f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" fill="{fill}"/>')

    def polyline(self, points, stroke, width=1.2, dash=None):
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(
            f'<polyline points="{coords}" fill="none" stroke="{stroke}" '
            f'stroke-width="{width:g}"{dash_attr}/>'
        )

    def render(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">'
        )
        body = "\n".join(self.parts)
        return f'<?xml version="1.0" encoding="UTF-8"?>\n{head}\n' \
               f'<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n'


def _plot_area():
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    return x0, x1, y0, y1


def _legend(svg: SVG, labels, colors, x, y):
    for k, (label, color) in enumerate(zip(labels, colors)):
        yy = y + 16 * k
        svg.line(x, yy - 4, x + 18, yy - 4, stroke=color, width=2)
        svg.text(x + 24, yy, label, anchor="start", size=11)


def line_chart(timestamps, series: dict[str, list[float]], title: str, y_range=(0.0, 10.0)) -> str:
    """Jam factor against time, one polyline per named series.

    Vertical gridlines mark UTC day boundaries and carry weekday labels.
    """
    svg = SVG()
    x0, x1, y0, y1 = _plot_area()
    t_min, t_max = timestamps[0], timestamps[-1]
    t_span = max(t_max - t_min, 1)
    lo, hi = y_range

    def sx(t):
        return x0 + (x1 - x0) * (t - t_min) / t_span

    def sy(v):
        return y0 - (y0 - y1) * (v - lo) / (hi - lo)

    svg.text(WIDTH / 2, 22, title, size=14)
    for v in range(int(lo), int(hi) + 1, 2):
        svg.line(x0, sy(v), x1, sy(v), stroke="#e5e5e5")
        svg.text(x0 - 6, sy(v) + 4, v, anchor="end", size=10)
    day = t_min - t_min % 86400
    while day <= t_max:
        if day >= t_min:
            svg.line(sx(day), y0, sx(day), y1, stroke="#e5e5e5")
        label_t = max(day, t_min) + 43200
        if label_t <= t_max:
            name = datetime.fromtimestamp(day, tz=timezone.utc).strftime("%a %d %b")
            svg.text(sx(label_t), y0 + 18, name, size=10)
        day += 86400
    svg.line(x0, y0, x1, y0, stroke="#444444")
    svg.line(x0, y0, x0, y1, stroke="#444444")
    svg.text(16, (y0 + y1) / 2, "jam factor", size=11, extra=f' transform="rotate(-90 16 {(y0 + y1) / 2:.2f})"')

    colors = PALETTE[: len(series)]
    for (label, values), color in zip(series.items(), colors):
        dash = None if label == "actual" else "4 2"
        svg.polyline([(sx(t), sy(v)) for t, v in zip(timestamps, values)], color, dash=dash)
    _legend(svg, list(series), colors, x1 - 150, y1 + 14)
    return svg.render()


def grouped_bar_chart(categories, groups: dict[str, list[float]], title: str, y_label="RMSE") -> str:
    svg = SVG()
    x0, x1, y0, y1 = _plot_area()
    top = max([v for vals in groups.values() for v in vals] + [1e-9]) * 1.15
    n_groups = len(groups)
    slot = (x1 - x0) / max(len(categories), 1)
    bar = slot * 0.7 / max(n_groups, 1)

    def sy(v):
        return y0 - (y0 - y1) * v / top

    svg.text(WIDTH / 2, 22, title, size=14)
    for k in range(6):
        v = top * k / 5
        svg.line(x0, sy(v), x1, sy(v), stroke="#e5e5e5")
        svg.text(x0 - 6, sy(v) + 4, f"{v:.2f}", anchor="end", size=10)
    colors = PALETTE[1: 1 + n_groups]
    for c, cat in enumerate(categories):
        left = x0 + c * slot + slot * 0.15
        for g, (label, values) in enumerate(groups.items()):
            v = values[c]
            svg.rect(left + g * bar, sy(v), bar * 0.95, y0 - sy(v), colors[g])
            svg.text(left + g * bar + bar / 2, sy(v) - 4, f"{v:.3f}", size=10)
        svg.text(x0 + c * slot + slot / 2, y0 + 18, cat, size=11)
    svg.line(x0, y0, x1, y0, stroke="#444444")
    svg.line(x0, y0, x0, y1, stroke="#444444")
    svg.text(16, (y0 + y1) / 2, y_label, size=11, extra=f' transform="rotate(-90 16 {(y0 + y1) / 2:.2f})"')
    _legend(svg, list(groups), colors, x1 - 150, y1 + 14)
    return svg.render()
