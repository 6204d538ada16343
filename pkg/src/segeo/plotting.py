"""Matplotlib figures written next to the text reports."""
from __future__ import annotations

import math
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402
import numpy as np  # noqa: E402

from .kernels import KernelGrid  # noqa: E402
from .render import DEFAULT_PALETTE  # noqa: E402
from .spectral import PerceptualUnit  # noqa: E402
from .stimuli import Stimulus  # noqa: E402


def _save(fig, path) -> None:
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)


def plot_units(s: Stimulus, units: Sequence[PerceptualUnit], path, segment_length: float = 4.0, title: str | None = None):
    """Stimulus segments, unit members coloured by rank."""
    rank = {}
    for u in units:
        for i in u.members:
            rank.setdefault(i, u.rank)
    h = 0.5 * segment_length
    segs, colors, widths = [], [], []
    for i, (x, y, th) in enumerate(s.elements):
        c, sn = h * math.cos(th), h * math.sin(th)
        segs.append([(x - c, y - sn), (x + c, y + sn)])
        k = rank.get(i)
        colors.append("#9a9a9a" if k is None else DEFAULT_PALETTE[(k - 1) % len(DEFAULT_PALETTE)])
        widths.append(0.8 if k is None else 2.0)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.add_collection(LineCollection(segs, colors=colors, linewidths=widths, capstyle="round"))
    ax.autoscale()
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_kernel(grid: KernelGrid, path, title: str | None = None):
    """Orientation-summed kernel mass on a log scale."""
    m = grid.xy_marginal().T
    floor = m[m > 0].min() if np.any(m > 0) else 1.0
    fig, ax = plt.subplots(figsize=(5, 4.5))
    sh = grid.shape
    im = ax.imshow(np.log10(np.maximum(m, floor)), origin="lower", cmap="magma",
                   extent=(-sh.half_x, sh.half_x, -sh.half_y, sh.half_y))
    fig.colorbar(im, ax=ax, label="log10 mass per bin")
    ax.set_xlabel("dx")
    ax.set_ylabel("dy")
    ax.set_title(title or f"{grid.params.kind.label}, H={grid.params.H}")
    _save(fig, path)


def plot_rows(rows: Sequence[dict], x: str, ys: Sequence[str], path, title: str | None = None):
    """Line plot of numeric columns ``ys`` against ``x``."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    xs = [r[x] for r in rows]
    for y in ys:
        ax.plot(xs, [float(r[y]) for r in rows], marker="o", label=y)
    ax.set_xlabel(x)
    ax.legend()
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_bars(labels: Sequence[str], values: Sequence[float], path, ylabel: str = "", title: str | None = None):
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.bar(range(len(values)), values, color="#1f77b4")
    ax.set_xticks(range(len(values)), labels, rotation=30, ha="right")
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    _save(fig, path)
