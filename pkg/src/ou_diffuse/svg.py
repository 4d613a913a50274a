"""Minimal SVG figure emission (line plots, scatter panels, axes).

Output is a standalone SVG 1.1 document; coordinates are written with a
fixed number of decimals so identical inputs give identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _f(v: float) -> str:
    return f"{v:.2f}"


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick positions covering [lo, hi]."""
    if not hi > lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(target, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _tick_label(v: float) -> str:
    if v == int(v) and abs(v) < 1e6:
        return str(int(v))
    return f"{v:.3g}"


def padded_range(values, pad: float = 0.05) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    span = hi - lo
    return lo - pad * span, hi + pad * span


@dataclass
class Panel:
    """A rectangular plotting area mapping data coordinates to pixels."""

    x: float
    y: float
    width: float
    height: float
    xlim: tuple[float, float]
    ylim: tuple[float, float]
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    parts: list[str] = field(default_factory=list)

    def px(self, xs, ys):
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        px = self.x + (xs - x0) / (x1 - x0) * self.width
        py = self.y + self.height - (ys - y0) / (y1 - y0) * self.height
        return px, py

    def polyline(self, xs, ys, color="#1f77b4", width=1.0, opacity=1.0):
        px, py = self.px(xs, ys)
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(px, py))
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="{width}" stroke-opacity="{opacity}"/>')

    def scatter(self, xs, ys, color="#1f77b4", radius=1.2, opacity=0.6):
        px, py = self.px(xs, ys)
        inside = ((px >= self.x) & (px <= self.x + self.width)
                  & (py >= self.y) & (py <= self.y + self.height))
        dots = "".join(f'<circle cx="{_f(a)}" cy="{_f(b)}" r="{radius}"/>'
                       for a, b in zip(px[inside], py[inside]))
        self.parts.append(f'<g fill="{color}" fill-opacity="{opacity}">{dots}</g>')

    def legend(self, entries):
        for i, (label, color) in enumerate(entries):
            ly = self.y + 14 + 14 * i
            lx = self.x + self.width - 110
            self.parts.append(
                f'<line x1="{_f(lx)}" y1="{_f(ly - 4)}" x2="{_f(lx + 16)}" y2="{_f(ly - 4)}" '
                f'stroke="{color}" stroke-width="2"/>'
                f'<text x="{_f(lx + 20)}" y="{_f(ly)}" font-size="10">{escape(label)}</text>')

    def render(self) -> str:
        out = [f'<rect x="{_f(self.x)}" y="{_f(self.y)}" width="{_f(self.width)}" '
               f'height="{_f(self.height)}" fill="white" stroke="#333"/>']
        clip = f"clip{int(self.x)}_{int(self.y)}"
        out.append(f'<clipPath id="{clip}"><rect x="{_f(self.x)}" y="{_f(self.y)}" '
                   f'width="{_f(self.width)}" height="{_f(self.height)}"/></clipPath>')
        out.append(f'<g clip-path="url(#{clip})">' + "".join(self.parts) + "</g>")
        bottom = self.y + self.height
        for v in nice_ticks(*self.xlim):
            px, _ = self.px([v], [self.ylim[0]])
            out.append(f'<line x1="{_f(px[0])}" y1="{_f(bottom)}" x2="{_f(px[0])}" '
                       f'y2="{_f(bottom + 4)}" stroke="#333"/>'
                       f'<text x="{_f(px[0])}" y="{_f(bottom + 15)}" font-size="10" '
                       f'text-anchor="middle">{_tick_label(v)}</text>')
        for v in nice_ticks(*self.ylim):
            _, py = self.px([self.xlim[0]], [v])
            out.append(f'<line x1="{_f(self.x - 4)}" y1="{_f(py[0])}" x2="{_f(self.x)}" '
                       f'y2="{_f(py[0])}" stroke="#333"/>'
                       f'<text x="{_f(self.x - 6)}" y="{_f(py[0] + 3)}" font-size="10" '
                       f'text-anchor="end">{_tick_label(v)}</text>')
        if self.title:
            out.append(f'<text x="{_f(self.x + self.width / 2)}" y="{_f(self.y - 6)}" '
                       f'font-size="12" text-anchor="middle">{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{_f(self.x + self.width / 2)}" y="{_f(bottom + 30)}" '
                       f'font-size="11" text-anchor="middle">{escape(self.xlabel)}</text>')
        if self.ylabel:
            cx, cy = self.x - 36, self.y + self.height / 2
            out.append(f'<text x="{_f(cx)}" y="{_f(cy)}" font-size="11" text-anchor="middle" '
                       f'transform="rotate(-90 {_f(cx)} {_f(cy)})">{escape(self.ylabel)}</text>')
        return "\n".join(out)


def document(width: float, height: float, panels, title: str = "") -> str:
    head = (f'<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{_f(width)}" height="{_f(height)}" viewBox="0 0 {_f(width)} {_f(height)}" '
            f'font-family="sans-serif">\n'
            f'<rect width="100%" height="100%" fill="white"/>\n')
    body = []
    if title:
        body.append(f'<text x="{_f(width / 2)}" y="18" font-size="14" '
                    f'text-anchor="middle">{escape(title)}</text>')
    body += [p.render() for p in panels]
    return head + "\n".join(body) + "\n</svg>\n"


def trajectory_figure(times, paths, kde_curves=(), reference=None, title="") -> str:
    """Trajectories over time (left) and density estimates at chosen times (right).

    ``paths`` has shape (M, N+1) for a 1-d process. ``kde_curves`` is a
    sequence of ``(label, KdeCurve)``; ``reference`` an optional
    ``(label, grid, density)`` drawn dashed.
    """
    times = np.asarray(times, dtype=np.float64)
    paths = np.atleast_2d(np.asarray(paths, dtype=np.float64))
    with_kde = len(kde_curves) > 0
    width = 900 if with_kde else 480
    left = Panel(60, 40, 380, 300, padded_range(times, 0.0), padded_range(paths),
                 title=f"{paths.shape[0]} forward trajectories", xlabel="time t", ylabel="x")
    for i, p in enumerate(paths):
        left.polyline(times, p, color=PALETTE[i % len(PALETTE)], width=1.0, opacity=0.8)
    panels = [left]
    if with_kde:
        grid_all = np.concatenate([c.grid for _, c in kde_curves])
        dens_all = np.concatenate([c.density for _, c in kde_curves])
        ymax = float(dens_all.max())
        if reference is not None:
            ymax = max(ymax, float(np.max(reference[2])))
        right = Panel(510, 40, 360, 300, (float(grid_all.min()), float(grid_all.max())),
                      (0.0, 1.08 * ymax), title="density estimate", xlabel="x", ylabel="density")
        entries = []
        for i, (label, c) in enumerate(kde_curves):
            color = PALETTE[i % len(PALETTE)]
            right.polyline(c.grid, c.density, color=color, width=1.6)
            entries.append((label, color))
        if reference is not None:
            label, g, d = reference
            right.polyline(g, d, color="#000", width=1.2, opacity=0.7)
            right.parts[-1] = right.parts[-1].replace("/>", ' stroke-dasharray="5,3"/>')
            entries.append((label, "#000"))
        right.legend(entries)
        panels.append(right)
    return document(width, 400, panels, title)


def timeline_figure(top, bottom, lims=None, title="") -> str:
    """Two rows of 2-d scatter panels.

    ``top`` and ``bottom`` are sequences of ``(label, points)``, one per
    column; rows are typically the forward and reverse processes.
    """
    cols = max(len(top), len(bottom))
    if cols == 0:
        raise ValueError("timeline needs at least one snapshot")
    size, gap = 170, 40
    if lims is None:
        allpts = np.concatenate([np.asarray(p) for _, p in list(top) + list(bottom)])
        lo = float(np.min(allpts))
        hi = float(np.max(allpts))
        lims = padded_range([lo, hi])
    panels = []
    for r, row in enumerate((top, bottom)):
        for c, (label, pts) in enumerate(row):
            pts = np.asarray(pts)
            p = Panel(50 + c * (size + gap), 50 + r * (size + 60), size, size, lims, lims,
                      title=label)
            p.scatter(pts[:, 0], pts[:, 1], color=PALETTE[r], radius=1.0, opacity=0.5)
            panels.append(p)
    width = 50 + cols * (size + gap)
    height = 50 + 2 * (size + 60)
    return document(width, height, panels, title)
