"""Comparison machinery: region densities, fit error and facilitation.

A kernel (or any cloud of mass points) is summarised by the mass falling in
each rectangle of a partition, rescaled to unit L2 norm. Two such vectors are
compared by their root-mean-square difference.
"""
from __future__ import annotations

import dataclasses
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import LiftedPoint
from .kernels import KernelGrid, KernelKind, eval_kernel


class DegenerateDensityError(ValueError):
    """No mass falls inside the partition."""


class PartitionParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclasses.dataclass(frozen=True)
class Rect:
    """Half-open rectangle ``[x0, x1) x [y0, y1)``."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        for name in ("x0", "y0", "x1", "y1"):
            object.__setattr__(self, name, float(getattr(self, name)))
        vals = (self.x0, self.y0, self.x1, self.y1)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("rectangle corners must be finite")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"degenerate rectangle {vals}")

    def contains(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        return (x >= self.x0) & (x < self.x1) & (y >= self.y0) & (y < self.y1)

    def overlaps(self, other: "Rect") -> bool:
        return self.x0 < other.x1 and other.x0 < self.x1 and self.y0 < other.y1 and other.y0 < self.y1


@dataclasses.dataclass(frozen=True)
class RegionPartition:
    regions: tuple[Rect, ...]

    def __post_init__(self):
        regs = tuple(r if isinstance(r, Rect) else Rect(*r) for r in self.regions)
        if not regs:
            raise ValueError("a partition needs at least one region")
        for i in range(len(regs)):
            for j in range(i + 1, len(regs)):
                if regs[i].overlaps(regs[j]):
                    raise ValueError(f"regions {i} and {j} overlap")
        object.__setattr__(self, "regions", regs)

    @property
    def M(self) -> int:
        return len(self.regions)

    def __len__(self) -> int:
        return len(self.regions)

    @classmethod
    def grid(cls, x0: float, y0: float, x1: float, y1: float, nx: int, ny: int) -> "RegionPartition":
        """Regular ``nx`` by ``ny`` tiling of a rectangle, row-major in y then x."""
        if nx < 1 or ny < 1:
            raise ValueError("nx and ny must be positive")
        xs = np.linspace(x0, x1, nx + 1)
        ys = np.linspace(y0, y1, ny + 1)
        return cls(tuple(Rect(xs[i], ys[j], xs[i + 1], ys[j + 1]) for j in range(ny) for i in range(nx)))

    def reordered(self, order: Sequence[int]) -> "RegionPartition":
        return RegionPartition(tuple(self.regions[k] for k in order))


def _mass_points(samples):
    """Return (x, y, w) arrays from a KernelGrid or an (n, 2|3) array."""
    if isinstance(samples, KernelGrid):
        m = samples.xy_marginal()
        X, Y = np.meshgrid(samples.shape.x_nodes(), samples.shape.y_nodes(), indexing="ij")
        return X.ravel(), Y.ravel(), m.ravel()
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise ValueError("samples must be an (n, 2) array of points or (n, 3) with weights")
    w = arr[:, 2] if arr.shape[1] == 3 else np.ones(len(arr))
    if np.any(w < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("sample weights must be finite and nonnegative")
    return arr[:, 0], arr[:, 1], w


def region_densities(samples, partition: RegionPartition) -> np.ndarray:
    """Mass per region, L2-normalised.

    ``samples`` is either a :class:`KernelGrid` (its x-y marginal is used,
    each bin's mass sitting at its node) or an array of ``(x, y)`` points,
    optionally with a third weight column. Mass outside every region is
    ignored.
    """
    x, y, w = _mass_points(samples)
    d = np.array([w[r.contains(x, y)].sum() for r in partition.regions], dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise DegenerateDensityError("no mass inside the partition")
    return d / norm


def fit_error(DP, DT) -> float:
    """Root-mean-square difference between two density vectors."""
    DP = np.asarray(DP, dtype=float)
    DT = np.asarray(DT, dtype=float)
    if DP.shape != DT.shape or DP.ndim != 1:
        raise ValueError(f"density vectors differ in length: {DP.shape} vs {DT.shape}")
    return float(np.sqrt(np.mean((DP - DT) ** 2)))


def support_mean(grid: KernelGrid) -> float:
    """Mean kernel value over bins holding any mass."""
    v = grid.values[grid.values > 0]
    return float(v.mean()) if v.size else 0.0


def facilitation_score(center: LiftedPoint, flankers: Iterable[LiftedPoint], grid: KernelGrid) -> float:
    """Summed kernel response to ``flankers`` after removing the mean level.

    The mean over the kernel support is subtracted from every evaluation, so
    flankers the kernel rates below average count as inhibition.
    """
    if grid.params.kind is KernelKind.FOKKER_PLANCK and not grid.symmetrized:
        raise ValueError("facilitation needs a symmetrized Fokker-Planck grid")
    flankers = list(flankers)
    if not flankers:
        return 0.0
    m = support_mean(grid)
    return float(sum(eval_kernel(grid, center, f) - m for f in flankers))


# --------------------------------------------------------------------------
# partition file


def parse_partition(text: str) -> RegionPartition:
    """One rectangle per line, ``x0 y0 x1 y1``; blank and ``#`` lines skipped."""
    rects = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise PartitionParseError(lineno, f"expected 4 numbers, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise PartitionParseError(lineno, str(exc)) from None
        try:
            rects.append(Rect(*vals))
        except ValueError as exc:
            raise PartitionParseError(lineno, str(exc)) from None
    return RegionPartition(tuple(rects))


def serialize_partition(p: RegionPartition) -> str:
    return "".join(f"{r.x0!r} {r.y0!r} {r.x1!r} {r.y1!r}\n" for r in p.regions)


def load_partition(path) -> RegionPartition:
    return parse_partition(Path(path).read_text(encoding="utf-8"))
