"""SVG output of stimuli with perceptual units highlighted.

The stimulus y axis points up; SVG's points down, so y is negated on output.
Each element becomes one ``<line>`` centred on the element and aligned with
its orientation. Members of unit ``k`` are stroked with ``palette[k-1]``
(cycling) and carry ``class="unit-k"``; everything else uses the background
style and ``class="background"``.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Sequence
from xml.sax.saxutils import quoteattr

from .spectral import PerceptualUnit
from .stimuli import Stimulus

DEFAULT_PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


@dataclasses.dataclass(frozen=True)
class RenderSpec:
    segment_length: float = 4.0
    canvas: tuple[int, int] | None = None
    palette: tuple[str, ...] = DEFAULT_PALETTE
    background_color: str = "#9a9a9a"
    background_width: float = 0.6
    unit_width: float = 1.2
    margin: float = 6.0

    def __post_init__(self):
        if not self.segment_length > 0:
            raise ValueError("segment_length must be positive")
        if not self.palette:
            raise ValueError("palette must not be empty")
        if self.canvas is not None and min(self.canvas) <= 0:
            raise ValueError("canvas size must be positive")


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def render_svg(s: Stimulus, units: Sequence[PerceptualUnit] = (), spec: RenderSpec = RenderSpec()) -> str:
    """Return the SVG document as a string; byte-identical for equal inputs."""
    n = len(s.elements)
    style: dict[int, int] = {}
    for u in units:
        for i in u.members:
            if not 0 <= i < n:
                raise ValueError(f"unit {u.rank} refers to element {i}, stimulus has {n}")
            style.setdefault(i, u.rank)

    half = 0.5 * spec.segment_length
    pad = spec.margin + half
    xmin, xmax = min(s.xs) - pad, max(s.xs) + pad
    ymin, ymax = min(s.ys) - pad, max(s.ys) + pad
    vb_w, vb_h = xmax - xmin, ymax - ymin
    width, height = spec.canvas if spec.canvas is not None else (math.ceil(vb_w), math.ceil(vb_h))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="{_fmt(xmin)} {_fmt(-ymax)} {_fmt(vb_w)} {_fmt(vb_h)}">',
        f'<rect x="{_fmt(xmin)}" y="{_fmt(-ymax)}" width="{_fmt(vb_w)}" height="{_fmt(vb_h)}" fill="white"/>',
    ]
    for i, (x, y, th) in enumerate(s.elements):
        c, sn = math.cos(th) * half, math.sin(th) * half
        rank = style.get(i)
        if rank is None:
            color, w, cls = spec.background_color, spec.background_width, "background"
        else:
            color, w, cls = spec.palette[(rank - 1) % len(spec.palette)], spec.unit_width, f"unit-{rank}"
        out.append(
            f'<line x1="{_fmt(x - c)}" y1="{_fmt(-(y - sn))}" x2="{_fmt(x + c)}" y2="{_fmt(-(y + sn))}" '
            f'stroke={quoteattr(color)} stroke-width="{_fmt(w)}" stroke-linecap="round" '
            f'class="{cls}" data-index="{i}"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
