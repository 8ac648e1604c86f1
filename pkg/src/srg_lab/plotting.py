"""Deterministic SVG rendering of SRG clouds, regions and margin witnesses.

Output is plain text with fixed float formatting, so identical inputs give
byte-identical files. Both conjugate branches of every cloud are drawn.
The plot uses one scale for both axes, so lengths in plot units equal
complex-plane lengths times :attr:`Canvas.scale`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .errors import DomainError
from .regions import HalfPlane, ImaginaryAxis, Region, Union
from .sampler import SrgCloud

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
REGION_FILL = "#b0b0b0"


def _f(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


@dataclass(frozen=True)
class Canvas:
    width: int
    height: int
    margin: int
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    @property
    def scale(self) -> float:
        """Pixels per unit, equal on both axes."""
        w = self.width - 2 * self.margin
        h = self.height - 2 * self.margin
        return min(w / (self.xmax - self.xmin), h / (self.ymax - self.ymin))

    def xy(self, z: complex) -> tuple[float, float]:
        s = self.scale
        cx = 0.5 * (self.xmin + self.xmax)
        cy = 0.5 * (self.ymin + self.ymax)
        return (self.width / 2 + (z.real - cx) * s, self.height / 2 - (z.imag - cy) * s)

    @property
    def half_length(self) -> float:
        return 2.0 * max(abs(self.xmin), abs(self.xmax), abs(self.ymin), abs(self.ymax))


def _extent(clouds, regions, witnesses):
    pts = [0j]
    for c in clouds:
        z = c.z
        pts.extend(z.tolist())
        pts.extend(np.conj(z).tolist())
    for r in regions:
        for m in (r.members if isinstance(r, Union) else (r,)):
            if m.bounded and not m.extended:
                for b in m.boundary(64):
                    pts.extend(b.tolist())
            elif isinstance(m, HalfPlane):
                pts.append(complex(m.c))
    for z1, z2 in witnesses:
        pts.extend([z1, z2])
    pts = np.asarray(pts)
    pts = pts[np.isfinite(pts)]
    xmin, xmax = float(np.min(pts.real)), float(np.max(pts.real))
    ymax = max(float(np.max(np.abs(pts.imag))), 1e-3)
    span = max(xmax - xmin, 2 * ymax, 1e-3)
    pad = 0.08 * span
    return xmin - pad, xmax + pad, -ymax - pad, ymax + pad


def _path(canvas: Canvas, z, closed: bool) -> str:
    coords = [canvas.xy(complex(p)) for p in z]
    d = "M " + " L ".join(f"{_f(x)} {_f(y)}" for x, y in coords)
    return d + (" Z" if closed else "")


def _region_elements(canvas: Canvas, region: Region, color: str, label: str) -> list[str]:
    out = []
    members = region.members if isinstance(region, Union) else (region,)
    for m in members:
        if isinstance(m, HalfPlane):
            far = canvas.xmax + 1 if m.side == "ge" else canvas.xmin - 1
            edge = max(canvas.xmin - 1, min(canvas.xmax + 1, m.c))
            y0, y1 = canvas.ymin - 1, canvas.ymax + 1
            rect = [complex(edge, y0), complex(far, y0), complex(far, y1), complex(edge, y1)]
            out.append(f'<path class="region" data-label="{escape(label)}" d="{_path(canvas, rect, True)}" '
                       f'fill="{REGION_FILL}" fill-opacity="0.45" stroke="{color}" stroke-width="1.5"/>')
        elif isinstance(m, ImaginaryAxis):
            seg = [complex(0, canvas.ymin - 1), complex(0, canvas.ymax + 1)]
            out.append(f'<path class="region" data-label="{escape(label)}" d="{_path(canvas, seg, False)}" '
                       f'fill="none" stroke="{color}" stroke-width="3"/>')
        elif m.bounded and not m.extended:
            for b in m.boundary(256):
                closed = len(b) > 2
                fill = f'fill="{REGION_FILL}" fill-opacity="0.45"' if closed else 'fill="none"'
                out.append(f'<path class="region" data-label="{escape(label)}" d="{_path(canvas, b, closed)}" '
                           f'{fill} stroke="{color}" stroke-width="1.5"/>')
        else:
            for b in m.boundary(512, canvas.half_length):
                b = b[np.isfinite(b)]
                if len(b) < 2:
                    continue
                out.append(f'<path class="region" data-label="{escape(label)}" d="{_path(canvas, b, False)}" '
                           f'fill="none" stroke="{color}" stroke-width="1.5"/>')
    return out


def render_svg(clouds=(), regions=(), witnesses=(), width: int = 520, height: int = 520,
               title: str = "") -> str:
    """SVG document for labelled clouds, regions and witness segments.

    ``clouds`` and ``regions`` are sequences of ``(item, label)``;
    ``witnesses`` is a sequence of ``(z1, z2)``.
    """
    clouds, regions = list(clouds), list(regions)
    witnesses = [(complex(a), complex(b)) for a, b in witnesses]
    if not clouds and not regions:
        raise DomainError("nothing to plot: give at least one cloud or region")
    for c, _ in clouds:
        if not isinstance(c, SrgCloud):
            raise DomainError("clouds must be SrgCloud instances")
    canvas = Canvas(width, height, 40, *_extent([c for c, _ in clouds], [r for r, _ in regions], witnesses))
    s = canvas.scale
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" data-scale="{s:.6g}">',
    ]
    if title:
        lines.append(f"<title>{escape(title)}</title>")
    lines.append('<defs><clipPath id="plot-area"><rect x="0" y="0" '
                 f'width="{width}" height="{height}"/></clipPath></defs>')
    lines.append('<rect x="0" y="0" width="100%" height="100%" fill="white"/>')
    lines.append('<g clip-path="url(#plot-area)">')
    legend = []
    for i, (r, label) in enumerate(regions):
        color = PALETTE[(i + len(clouds)) % len(PALETTE)]
        lines.extend(_region_elements(canvas, r, color, label))
        legend.append((label, color, "region"))
    # axes
    x0, y0 = canvas.xy(complex(canvas.xmin, 0))
    x1, _ = canvas.xy(complex(canvas.xmax, 0))
    ax, ay0 = canvas.xy(complex(0, canvas.ymin))
    _, ay1 = canvas.xy(complex(0, canvas.ymax))
    lines.append(f'<line class="axis" x1="{_f(x0)}" y1="{_f(y0)}" x2="{_f(x1)}" y2="{_f(y0)}" stroke="black" stroke-width="1"/>')
    lines.append(f'<line class="axis" x1="{_f(ax)}" y1="{_f(ay0)}" x2="{_f(ax)}" y2="{_f(ay1)}" stroke="black" stroke-width="1"/>')
    for i, (c, label) in enumerate(clouds):
        color = PALETTE[i % len(PALETTE)]
        z = c.z
        for branch in (z, np.conj(z)):
            for p in branch:
                x, y = canvas.xy(complex(p))
                lines.append(f'<circle class="pt" cx="{_f(x)}" cy="{_f(y)}" r="1.6" fill="{color}" fill-opacity="0.7"/>')
        legend.append((label, color, "cloud"))
    for z1, z2 in witnesses:
        xa, ya = canvas.xy(z1)
        xb, yb = canvas.xy(z2)
        length = math.hypot(xb - xa, yb - ya)
        lines.append(f'<line class="witness" x1="{_f(xa)}" y1="{_f(ya)}" x2="{_f(xb)}" y2="{_f(yb)}" '
                     f'data-length="{_f(length)}" stroke="black" stroke-width="2" stroke-dasharray="4 2"/>')
    if witnesses:
        legend.append(("margin witness", "black", "witness"))
    lines.append("</g>")
    # axis labels
    lines.append(f'<text x="{_f(width - 34)}" y="{_f(min(max(y0 - 6, 14), height - 6))}" font-size="12">Re</text>')
    lines.append(f'<text x="{_f(min(max(ax + 6, 4), width - 30))}" y="14" font-size="12">Im</text>')
    lines.append('<g class="legend">')
    for k, (label, color, what) in enumerate(legend):
        y = 22 + 16 * k
        lines.append(f'<rect x="12" y="{y - 9}" width="10" height="10" fill="{color}"/>')
        lines.append(f'<text x="28" y="{y}" font-size="11">{escape(label)} ({what})</text>')
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
