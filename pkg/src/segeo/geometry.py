"""SE(2) group structure for lifted points of the plane times the circle.

A stimulus element lifts to ``(x, y, theta)``. Kernels are left-invariant,
so they are stored as functions of the displacement of the target point
seen from the frame of the source point.
"""
from __future__ import annotations

import enum
import math
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi


class Mode(str, enum.Enum):
    """Polarity mode: oriented contrast (period 2*pi) or bare orientation (period pi)."""

    POLARIZED = "polarized"
    UNPOLARIZED = "unpolarized"

    @property
    def period(self) -> float:
        return TWO_PI if self is Mode.POLARIZED else math.pi

    @classmethod
    def parse(cls, value: "Mode | str") -> "Mode":
        if isinstance(value, Mode):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown polarity mode {value!r}") from None


class LiftedPoint(NamedTuple):
    x: float
    y: float
    theta: float


class Displacement(NamedTuple):
    dx: float
    dy: float
    dtheta: float


class VectorField(str, enum.Enum):
    X1 = "X1"
    X2 = "X2"
    X3 = "X3"

    def __call__(self, p: LiftedPoint) -> tuple[float, float, float]:
        c, s = math.cos(p.theta), math.sin(p.theta)
        if self is VectorField.X1:
            return (c, s, 0.0)
        if self is VectorField.X2:
            return (0.0, 0.0, 1.0)
        return (-s, c, 0.0)


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v!r}")


def wrap_angle(theta: float, mode: Mode | str) -> float:
    """Wrap ``theta`` into ``[0, period)`` for the polarity mode."""
    _check_finite(theta)
    period = Mode.parse(mode).period
    out = math.fmod(theta, period)
    if out < 0.0:
        out += period
    # fmod of a tiny negative number can round up to exactly the period
    if out >= period:
        out -= period
    return out


def wrap_centered(theta, mode: Mode | str):
    """Wrap into ``[-period/2, period/2)``; works on scalars and arrays."""
    period = Mode.parse(mode).period
    half = 0.5 * period
    if np.ndim(theta) == 0:
        _check_finite(float(theta))
        return wrap_angle(float(theta) + half, Mode.parse(mode)) - half
    arr = np.asarray(theta, dtype=float)
    out = np.mod(arr + half, period) - half
    return np.where(out >= half, out - period, out)


def _canonical(dx: float, dy: float, dth: float, mode: Mode | str) -> Displacement:
    # Without polarity a frame is only known up to a half turn, which negates
    # the planar offset; pick the representative with dx >= 0.
    if Mode.parse(mode) is Mode.UNPOLARIZED and (dx < 0.0 or (dx == 0.0 and dy < 0.0)):
        dx, dy = -dx, -dy
    return Displacement(dx + 0.0, dy + 0.0, dth)


def _canonical_arrays(dx, dy, dth, mode: Mode | str):
    if Mode.parse(mode) is not Mode.UNPOLARIZED:
        return dx, dy, dth
    flip = (dx < 0.0) | ((dx == 0.0) & (dy < 0.0))
    sign = np.where(flip, -1.0, 1.0)
    return sign * dx, sign * dy, dth


def group_displacement(p: LiftedPoint, q: LiftedPoint, mode: Mode | str) -> Displacement:
    """Displacement of ``q`` expressed in the moving frame of ``p``."""
    _check_finite(*p, *q)
    ex, ey = q.x - p.x, q.y - p.y
    c, s = math.cos(p.theta), math.sin(p.theta)
    return _canonical(c * ex + s * ey, -s * ex + c * ey, wrap_centered(q.theta - p.theta, mode), mode)


def invert_displacement(d: Displacement, mode: Mode | str) -> Displacement:
    """Displacement from ``q`` back to ``p`` given the one from ``p`` to ``q``."""
    c, s = math.cos(d.dtheta), math.sin(d.dtheta)
    return _canonical(-(c * d.dx + s * d.dy), -(-s * d.dx + c * d.dy), wrap_centered(-d.dtheta, mode), mode)


def displacements(xs, ys, thetas, mode: Mode | str):
    """All pairwise displacements of a point cloud, as three ``(n, n)`` arrays.

    Entry ``[i, j]`` is the displacement of point ``j`` seen from point ``i``.
    """
    xs, ys, thetas = (np.asarray(a, dtype=float) for a in (xs, ys, thetas))
    ex = xs[None, :] - xs[:, None]
    ey = ys[None, :] - ys[:, None]
    c = np.cos(thetas)[:, None]
    s = np.sin(thetas)[:, None]
    dx = c * ex + s * ey
    dy = -s * ex + c * ey
    dth = wrap_centered(thetas[None, :] - thetas[:, None], mode)
    return _canonical_arrays(dx, dy, dth, mode)


def invert_displacement_arrays(dx, dy, dth, mode: Mode | str):
    c, s = np.cos(dth), np.sin(dth)
    return _canonical_arrays(-(c * dx + s * dy), -(-s * dx + c * dy), wrap_centered(-np.asarray(dth), mode), mode)


def act(g: LiftedPoint, p: LiftedPoint, mode: Mode | str = Mode.POLARIZED) -> LiftedPoint:
    """Left action of the rigid motion ``g`` (translation + rotation) on ``p``."""
    c, s = math.cos(g.theta), math.sin(g.theta)
    return LiftedPoint(
        g.x + c * p.x - s * p.y,
        g.y + s * p.x + c * p.y,
        wrap_angle(g.theta + p.theta, mode),
    )
