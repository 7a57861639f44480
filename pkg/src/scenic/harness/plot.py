"""Static SVG line charts of metric series.

Output is plain text with fixed-precision coordinates, so identical
inputs give byte-identical files.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

from ..env import FPS
from ..errors import UsageError
from ..metrics import read_series_csv

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 72, 150, 48, 48
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _num(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    return f"{v:.4g}"


def render_svg(series: list, labels: list[str], title: str = "", metric: str = "value") -> str:
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM
    pts = [p for s in series for p in s.points]
    x_hi = max((f for f, _ in pts), default=1) or 1
    y_lo = min(0.0, min((v for _, v in pts), default=0.0))
    y_hi = max((v for _, v in pts), default=1.0)
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0

    def sx(f):
        return LEFT + pw * f / x_hi

    def sy(v):
        return TOP + ph * (1.0 - (v - y_lo) / (y_hi - y_lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{LEFT}" y="16" font-size="13">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    # bottom axis: gameplay frames; top axis: simulated seconds
    for f in _ticks(0, x_hi):
        x = _num(sx(f))
        out.append(f'<line x1="{x}" y1="{TOP + ph}" x2="{x}" y2="{TOP + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{TOP + ph + 16}" text-anchor="middle">{_label(round(f))}</text>')
        out.append(f'<line x1="{x}" y1="{TOP}" x2="{x}" y2="{TOP - 4}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{TOP - 8}" text-anchor="middle">{_label(f / FPS)}</text>')
    for v in _ticks(y_lo, y_hi):
        y = _num(sy(v))
        out.append(f'<line x1="{LEFT - 4}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">{_label(v)}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle">gameplay frames</text>')
    out.append(f'<text x="{LEFT + pw:.2f}" y="{TOP - 22}" text-anchor="end">simulated seconds</text>')
    out.append(f'<text x="14" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {TOP + ph / 2:.2f})">{escape(metric)}</text>')
    for i, (s, label) in enumerate(zip(series, labels)):
        color = COLORS[i % len(COLORS)]
        coords = " ".join(f"{_num(sx(f))},{_num(sy(v))}" for f, v in s.points)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = TOP + 10 + 16 * i
        out.append(f'<line x1="{LEFT + pw + 10}" y1="{ly}" x2="{LEFT + pw + 28}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + pw + 32}" y="{ly}" dominant-baseline="middle">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_series(series_files: list, out, labels: list[str], title: str = "", metric: str = "value") -> None:
    if not series_files:
        raise UsageError("plot needs at least one series file")
    if len(labels) != len(series_files):
        raise UsageError(f"got {len(labels)} labels for {len(series_files)} series files")
    series = [read_series_csv(p) for p in series_files]
    Path(out).write_text(render_svg(series, list(labels), title, metric), encoding="utf-8", newline="\n")
