"""Dependency-free SVG line plots and matching gnuplot scripts."""
import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=70, right=150, top=40, bottom=55)
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


def _ticks(lo, hi, count=6):
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * step:
        out.append(round(t, 12))
        t += step
    return out


def _fmt(v):
    return f"{v:.4g}"


def line_plot_svg(series, xlabel, ylabel, title="", vlines=(), yticks_extra=(),
                  markers=()):
    """series: list of (label, xs, ys, dashed). vlines: (x, label) drawn
    dashed; yticks_extra: (y, label) marked on the vertical axis; markers:
    (x, y, label) points."""
    xs_all = [x for _, xs, _, _ in series for x in xs if np.isfinite(x)]
    ys_all = [y for _, _, ys, _ in series for y in ys if np.isfinite(y)]
    xs_all += [v for v, _ in vlines]
    ys_all += [v for v, _ in yticks_extra]
    xs_all += [m[0] for m in markers]
    ys_all += [m[1] for m in markers]
    if not xs_all:
        xs_all = [0.0, 1.0]
    if not ys_all:
        ys_all = [0.0, 1.0]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(min(ys_all), 0.0), max(ys_all)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    y1 += 0.05 * (y1 - y0)
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def X(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def Y(y):
        return MARGIN["top"] + (1 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    bx, by = MARGIN["left"], MARGIN["top"]
    out.append(f'<rect x="{bx}" y="{by}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{X(t):.2f}" y1="{by + ph}" x2="{X(t):.2f}" y2="{by + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X(t):.2f}" y="{by + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{bx - 5}" y1="{Y(t):.2f}" x2="{bx}" y2="{Y(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{bx - 8}" y="{Y(t) + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    for v, lab in yticks_extra:
        out.append(f'<line x1="{bx - 9}" y1="{Y(v):.2f}" x2="{bx + 9}" y2="{Y(v):.2f}" '
                   f'stroke="black" stroke-width="2"/>')
        out.append(f'<text x="{bx + 12}" y="{Y(v) - 4:.2f}">{escape(lab)}</text>')
    for v, lab in vlines:
        out.append(f'<line x1="{X(v):.2f}" y1="{by}" x2="{X(v):.2f}" y2="{by + ph}" '
                   f'stroke="gray" stroke-dasharray="6,4"/>')
        out.append(f'<text x="{X(v) + 4:.2f}" y="{by + 14}">{escape(lab)}</text>')
    ly = by + 10
    for i, (lab, xs, ys, dashed) in enumerate(series):
        col = COLORS[i % len(COLORS)]
        pts = [(X(x), Y(y)) for x, y in zip(xs, ys) if np.isfinite(x) and np.isfinite(y)]
        dash = ' stroke-dasharray="5,3"' if dashed else ""
        if len(pts) > 1:
            d = " ".join(f"{px:.2f},{py:.2f}" for px, py in pts)
            out.append(f'<polyline points="{d}" fill="none" stroke="{col}" stroke-width="2"{dash}/>')
        for px, py in pts:
            out.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2.5" fill="{col}"/>')
        lx = WIDTH - MARGIN["right"] + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{col}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 28}" y="{ly + 4}">{escape(lab)}</text>')
        ly += 18
    for x, y, lab in markers:
        out.append(f'<circle cx="{X(x):.2f}" cy="{Y(y):.2f}" r="5" fill="none" stroke="black"/>')
        out.append(f'<text x="{X(x) + 7:.2f}" y="{Y(y) - 7:.2f}">{escape(lab)}</text>')
    out.append(f'<text x="{bx + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{by + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {by + ph / 2:.1f})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def gnuplot_script(csv_name, columns, xlabel, ylabel, svg_name, vlines=()):
    """columns: list of (x_col, y_col, title) 1-based indices into the CSV."""
    lines = ["set datafile separator ','",
             "set datafile commentschars '#'",
             "set key outside right",
             f"set xlabel '{xlabel}'",
             f"set ylabel '{ylabel}'",
             "set terminal svg size 640,440",
             f"set output '{svg_name}'"]
    for i, (v, lab) in enumerate(vlines, start=1):
        lines.append(f"set arrow {i} from {v!r}, graph 0 to {v!r}, graph 1 nohead dashtype 2")
        lines.append(f"set label {i} '{lab}' at {v!r}, graph 0.95 offset 0.5,0")
    plots = [f"'{csv_name}' every ::1 using {x}:{y} with linespoints title '{t}'"
             for x, y, t in columns]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"
