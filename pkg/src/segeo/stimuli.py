"""Oriented-segment stimuli and their plain-text file format.

Every element is a lifted point ``(x, y, theta)`` where ``theta`` is the
tangent direction of the boundary. In polarized mode the direction is chosen
so that the darker side lies on the left, which makes contrast sign part of
the orientation.

Label conventions used by the generators:

``path`` / ``background``
    contour-in-noise stimuli.
``inducer-<k>-a`` / ``inducer-<k>-b``
    the two mouth edges of inducer ``k`` (they induce the illusory contour).
``arc-<k>``, ``end-<k>``
    remaining boundary of inducer ``k``.
``segment-<k>``, ``arm-<k>``, ``curve``, ``line``, ``upper-black``,
``upper-white``, ``semicircle``
    stimulus-specific groups.
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
import re
from typing import Iterable, Sequence

import numpy as np

from .geometry import LiftedPoint, Mode, wrap_angle


class StimulusError(ValueError):
    pass


class CapacityError(StimulusError):
    """Random placement could not satisfy the separation constraint."""


class StimulusParseError(StimulusError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclasses.dataclass(frozen=True)
class Stimulus:
    elements: tuple[LiftedPoint, ...]
    mode: Mode = Mode.POLARIZED
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        object.__setattr__(self, "elements", tuple(LiftedPoint(*map(float, e)) for e in self.elements))
        if not self.elements:
            raise StimulusError("a stimulus needs at least one element")
        period = self.mode.period
        for i, e in enumerate(self.elements):
            if not all(math.isfinite(v) for v in e):
                raise StimulusError(f"element {i} has non-finite coordinates")
            if not 0.0 <= e.theta < period:
                raise StimulusError(
                    f"element {i}: theta={e.theta!r} outside [0, {period:.6g}) for {self.mode.value} mode"
                )
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(lab) for lab in self.labels))
            if len(self.labels) != len(self.elements):
                raise StimulusError("labels must match elements one to one")
            if any(not lab or any(c.isspace() for c in lab) for lab in self.labels):
                raise StimulusError("labels must be non-empty and contain no whitespace")

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def xs(self) -> np.ndarray:
        return np.array([e.x for e in self.elements])

    @property
    def ys(self) -> np.ndarray:
        return np.array([e.y for e in self.elements])

    @property
    def thetas(self) -> np.ndarray:
        return np.array([e.theta for e in self.elements])

    def indices(self, predicate) -> set[int]:
        """Indices whose label satisfies ``predicate`` (a callable or a prefix string)."""
        if self.labels is None:
            return set()
        if isinstance(predicate, str):
            prefix = predicate
            predicate = lambda lab: lab.startswith(prefix)  # noqa: E731
        return {i for i, lab in enumerate(self.labels) if predicate(lab)}

    def with_mode(self, mode: Mode | str) -> "Stimulus":
        """Re-express the same elements under another polarity mode."""
        mode = Mode.parse(mode)
        return Stimulus(tuple(e._replace(theta=wrap_angle(e.theta, mode)) for e in self.elements), mode, self.labels)

    def permuted(self, order: Sequence[int]) -> "Stimulus":
        labels = None if self.labels is None else tuple(self.labels[i] for i in order)
        return Stimulus(tuple(self.elements[i] for i in order), self.mode, labels)

    def digest(self) -> str:
        return hashlib.sha256(serialize_stimulus(self).encode()).hexdigest()[:16]

    def max_inducer_distance(self) -> float:
        """Largest pairwise distance, restricted to inducer elements when the
        labels mark any (background and other parts are then ignored)."""
        idx = sorted(self.indices("inducer-")) or list(range(len(self)))
        pts = np.column_stack([self.xs[idx], self.ys[idx]])
        if len(pts) < 2:
            return 0.0
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())


def _build(points: Iterable[tuple[float, float, float, str]], mode: Mode | str) -> Stimulus:
    mode = Mode.parse(mode)
    pts = list(points)
    return Stimulus(
        tuple(LiftedPoint(x, y, wrap_angle(t, mode)) for x, y, t, _ in pts),
        mode,
        tuple(lab for *_, lab in pts),
    )


def inducer_index(label: str) -> int | None:
    """Index of the inducer a label belongs to, if any."""
    m = re.match(r"(?:inducer|arc|end)-(\d+)", label)
    return int(m.group(1)) if m else None


def is_mouth_edge(label: str) -> bool:
    return re.fullmatch(r"inducer-\d+-[ab]", label) is not None


# --------------------------------------------------------------------------
# contour in noise


def gen_fhh(
    n_path: int = 12,
    angle_step: float = 15.0,
    element_gap: float = 6.0,
    n_background: int = 20,
    field: tuple[float, float] = (100.0, 100.0),
    min_sep: float = 6.0,
    seed: int = 0,
    turn_signs: str = "alternate",
    mode: Mode | str = Mode.POLARIZED,
    max_tries: int = 2000,
):
    """A chain of ``n_path`` elements hidden among randomly oriented ones.

    Successive path elements turn by ``angle_step`` degrees; ``turn_signs``
    is ``alternate`` (default), ``random`` or ``positive``. Each step moves
    ``element_gap`` along the mean of the two orientations, so neighbours are
    co-circular. Returns ``(stimulus, turns)`` with the turn sequence in
    radians.
    """
    if n_path < 2:
        raise StimulusError("n_path must be at least 2")
    rng = np.random.default_rng(seed)
    W, Hf = field
    step = math.radians(angle_step)
    if turn_signs == "random":
        signs = rng.choice([-1.0, 1.0], size=n_path - 1)
    elif turn_signs == "positive":
        signs = np.ones(n_path - 1)
    elif turn_signs == "alternate":
        signs = np.array([1.0 if k % 2 == 0 else -1.0 for k in range(n_path - 1)])
    else:
        raise StimulusError(f"unknown turn_signs {turn_signs!r}")
    turns = signs * step
    heading = rng.uniform(0.0, 2 * math.pi)
    pts = [(0.0, 0.0, heading)]
    for t in turns:
        x, y, th = pts[-1]
        mid = th + 0.5 * t
        pts.append((x + element_gap * math.cos(mid), y + element_gap * math.sin(mid), th + t))
    arr = np.array([(x, y) for x, y, _ in pts])
    lo, hi = arr.min(0), arr.max(0)
    span = hi - lo
    if span[0] > W or span[1] > Hf:
        raise CapacityError("path does not fit in the field")
    offset = np.array([rng.uniform(0, W - span[0]), rng.uniform(0, Hf - span[1])]) - lo
    placed = [(x + offset[0], y + offset[1], th, "path") for x, y, th in pts]
    xy = [np.array(p[:2]) for p in placed]
    for _ in range(n_background):
        for _try in range(max_tries):
            cand = np.array([rng.uniform(0, W), rng.uniform(0, Hf)])
            if min(np.hypot(*(cand - q)) for q in xy) >= min_sep:
                break
        else:
            raise CapacityError(f"could not place background element {len(placed) - n_path} with min_sep={min_sep}")
        xy.append(cand)
        placed.append((cand[0], cand[1], rng.uniform(0.0, 2 * math.pi), "background"))
    return _build(placed, mode), turns


# --------------------------------------------------------------------------
# pacman inducers


def _pacman(k, center, a1, a2, radius, n_edge, n_arc):
    """Boundary elements of one dark disk with the wedge ``[a1, a2]`` removed.

    The boundary is traversed with the dark body on the left: inward along
    ray ``a1`` and outward along ray ``a2``; the arc runs counter-clockwise.
    """
    cx, cy = center
    out = []
    for j in range(n_edge):
        r = (j + 1) * radius / n_edge
        out.append((cx + r * math.cos(a1), cy + r * math.sin(a1), a1 + math.pi, f"inducer-{k}-a"))
    for j in range(n_edge):
        r = (j + 1) * radius / n_edge
        out.append((cx + r * math.cos(a2), cy + r * math.sin(a2), a2, f"inducer-{k}-b"))
    body = (a1 + 2 * math.pi) - a2
    for j in range(n_arc):
        phi = a2 + (j + 0.5) * body / n_arc
        out.append((cx + radius * math.cos(phi), cy + radius * math.sin(phi), phi + math.pi / 2, f"arc-{k}"))
    return out


_JITTER_PATTERN = (1.0, -1.0, 0.5, -0.5)


def _regular_inducers(n_sides, circumradius, inducer_radius, mouth_angle, elements_per_edge,
                      arc_elements, rotation_jitter, mode):
    interior = math.pi * (n_sides - 2) / n_sides
    half = 0.5 * interior - math.radians(mouth_angle)
    if half <= 0:
        raise StimulusError("mouth_angle closes the inducer mouth")
    pts = []
    for k in range(n_sides):
        phi = math.pi / 2 + math.pi / n_sides + 2 * math.pi * k / n_sides if n_sides == 4 else math.pi / 2 + 2 * math.pi * k / n_sides
        center = (circumradius * math.cos(phi), circumradius * math.sin(phi))
        inward = phi + math.pi
        # unequal magnitudes so opposite corners never both land on a diagonal
        jitter = math.radians(rotation_jitter) * _JITTER_PATTERN[k % 4]
        a1 = inward - half + jitter
        a2 = inward + half + jitter
        pts.extend(_pacman(k, center, a1, a2, inducer_radius, elements_per_edge, arc_elements))
    return _build(pts, mode)


def gen_kanizsa_square(
    side: float = 100.0,
    inducer_radius: float = 30.0,
    mouth_angle: float = 0.0,
    elements_per_edge: int = 3,
    rotation_jitter: float = 0.0,
    arc_elements: int = 12,
    mode: Mode | str = Mode.POLARIZED,
) -> Stimulus:
    """Four pacmen at the corners of a square.

    ``mouth_angle`` (degrees) turns every mouth edge toward the square's
    interior, bending the illusory sides; ``rotation_jitter`` rotates whole
    inducers, alternately clockwise and counter-clockwise, the last two by
    half as much.
    """
    if side <= 2 * inducer_radius:
        raise StimulusError("side must exceed twice the inducer radius")
    if elements_per_edge < 1:
        raise StimulusError("elements_per_edge must be >= 1")
    return _regular_inducers(4, side / math.sqrt(2), inducer_radius, mouth_angle, elements_per_edge,
                             arc_elements, rotation_jitter, mode)


def gen_kanizsa_triangle(
    side: float = 100.0,
    inducer_radius: float = 40.0,
    mouth_angle: float = 0.0,
    elements_per_edge: int = 6,
    rotation_jitter: float = 0.0,
    arc_elements: int = 12,
    mode: Mode | str = Mode.POLARIZED,
) -> Stimulus:
    """Three pacmen at the vertices of an equilateral triangle."""
    if side <= 2 * inducer_radius:
        raise StimulusError("side must exceed twice the inducer radius")
    if elements_per_edge < 1:
        raise StimulusError("elements_per_edge must be >= 1")
    return _regular_inducers(3, side / math.sqrt(3), inducer_radius, mouth_angle, elements_per_edge,
                             arc_elements, rotation_jitter, mode)


def gen_kanizsa_bar(
    offset: float = 0.0,
    length: float = 100.0,
    inducer_radius: float = 30.0,
    bar_height: float = 24.0,
    elements_per_edge: int = 3,
    arc_elements: int = 12,
    end_elements: int = 2,
    mode: Mode | str = Mode.POLARIZED,
) -> Stimulus:
    """Two notched disks whose notch edges outline an occluding bar.

    The right disk is shifted vertically by ``offset``; the notch edges of
    the two disks are collinear only when ``offset`` is zero.
    """
    h = 0.5 * bar_height
    if not 0 < h < inducer_radius:
        raise StimulusError("bar_height must be positive and below the inducer diameter")
    if length <= 2 * inducer_radius:
        raise StimulusError("length must exceed twice the inducer radius")
    reach = math.sqrt(inducer_radius**2 - h**2)
    beta = math.asin(h / inducer_radius)
    pts = []
    for k, (cx, cy, facing) in enumerate(((-length / 2, 0.0, 1.0), (length / 2, offset, -1.0))):
        # upper edge has the disk above; lower edge has it below
        for j in range(elements_per_edge):
            t = (j + 0.5) * reach / elements_per_edge
            pts.append((cx + facing * t, cy + h, 0.0, f"inducer-{k}-a"))
        for j in range(elements_per_edge):
            t = (j + 0.5) * reach / elements_per_edge
            pts.append((cx + facing * t, cy - h, math.pi, f"inducer-{k}-b"))
        for j in range(end_elements):
            yy = -h + (j + 0.5) * 2 * h / end_elements
            # notch end: dark body lies away from the facing side
            pts.append((cx, cy + yy, -math.pi / 2 * facing, f"end-{k}"))
        start = beta if facing > 0 else math.pi + beta
        body = 2 * math.pi - 2 * beta
        for j in range(arc_elements):
            phi = start + (j + 0.5) * body / arc_elements
            pts.append((cx + inducer_radius * math.cos(phi), cy + inducer_radius * math.sin(phi),
                        phi + math.pi / 2, f"arc-{k}"))
    return _build(pts, mode)


# --------------------------------------------------------------------------
# polarity cartoon


def gen_contrast_square(
    side: float = 50.0,
    notch_radius: float = 20.0,
    element_gap: float = 8.0,
    semicircle_elements: int = 9,
    mode: Mode | str = Mode.POLARIZED,
) -> Stimulus:
    """Square split into a black left half and a white right half.

    The dividing boundary carries a semicircular black bump protruding into
    the white half. Along the upper edge the black half has dark below and the
    white half has light below, so polarized orientations differ by pi.
    """
    half = side / 2
    n_half = max(1, int(round(half / element_gap)))
    pts = []
    for j in range(n_half):
        x = -half + (j + 0.5) * half / n_half
        pts.append((x, half, math.pi, "upper-black"))
    for j in range(n_half):
        x = (j + 0.5) * half / n_half
        pts.append((x, half, 0.0, "upper-white"))
    for j in range(semicircle_elements):
        phi = -math.pi / 2 + (j + 0.5) * math.pi / semicircle_elements
        pts.append((notch_radius * math.cos(phi), notch_radius * math.sin(phi), phi + math.pi / 2, "semicircle"))
    return _build(pts, mode)


# --------------------------------------------------------------------------
# range and saliency probes


def gen_collinear_segments(
    counts: Sequence[int] = (3, 3, 3),
    spacing: float = 3.0,
    gap: float = 28.0,
    mode: Mode | str = Mode.POLARIZED,
) -> Stimulus:
    """Short collinear segments along the x axis separated by ``gap`` pixels.

    Each segment is a run of ``counts[k]`` elements ``spacing`` apart.
    """
    pts = []
    x = 0.0
    for k, n in enumerate(counts):
        for j in range(n):
            pts.append((x, 0.0, 0.0, f"segment-{k}"))
            if j < n - 1:
                x += spacing
        x += gap
    xs = [p[0] for p in pts]
    shift = 0.5 * (min(xs) + max(xs))
    return _build([(px - shift, py, t, lab) for px, py, t, lab in pts], mode)


def gen_zigzag(
    n: int = 8,
    turn: float = 90.0,
    gap: float = 3.0,
    mode: Mode | str = Mode.POLARIZED,
) -> Stimulus:
    """A tight chain whose orientation turns by +/- ``turn`` degrees at every step.

    Steps are co-circular as in :func:`gen_fhh`; the chain starts at the origin
    heading along +x. Labels are ``chain``.
    """
    if n < 2:
        raise StimulusError("n must be at least 2")
    t = math.radians(turn)
    pts = [(0.0, 0.0, 0.0)]
    for k in range(n - 1):
        x, y, th = pts[-1]
        d = t if k % 2 == 0 else -t
        mid = th + 0.5 * d
        pts.append((x + gap * math.cos(mid), y + gap * math.sin(mid), th + d))
    return _build([(x, y, th, "chain") for x, y, th in pts], mode)


def gen_curve_line(
    n_curve: int = 10,
    curve_gap: float = 5.0,
    curve_turn: float = 8.0,
    n_line: int = 10,
    line_gap: float = 7.0,
    perturb: float = 0.0,
    n_background: int = 15,
    field: tuple[float, float] = (140.0, 140.0),
    min_sep: float = 8.0,
    seed: int = 0,
    mode: Mode | str = Mode.POLARIZED,
    max_tries: int = 2000,
) -> Stimulus:
    """A co-circular curve and a straight line among random elements.

    ``perturb`` (radians) tilts curve elements alternately by +/- the given
    angle, degrading their alignment without moving them.
    """
    rng = np.random.default_rng(seed)
    W, Hf = field
    pts = []
    turn = math.radians(curve_turn)
    x, y, th = 0.2 * W, 0.25 * Hf, 0.0
    for j in range(n_curve):
        tilt = perturb if j % 2 == 0 else -perturb
        pts.append((x, y, th + tilt, "curve"))
        mid = th + 0.5 * turn
        x, y, th = x + curve_gap * math.cos(mid), y + curve_gap * math.sin(mid), th + turn
    for j in range(n_line):
        pts.append((0.15 * W + j * line_gap, 0.85 * Hf, 0.0, "line"))
    xy = [np.array(p[:2]) for p in pts]
    for _ in range(n_background):
        for _try in range(max_tries):
            cand = np.array([rng.uniform(0, W), rng.uniform(0, Hf)])
            if min(np.hypot(*(cand - q)) for q in xy) >= min_sep:
                break
        else:
            raise CapacityError("could not place background elements")
        xy.append(cand)
        pts.append((cand[0], cand[1], rng.uniform(0, 2 * math.pi), "background"))
    return _build(pts, mode)


GENERATORS = {
    "fhh": lambda **kw: gen_fhh(**kw)[0],
    "kanizsa-square": gen_kanizsa_square,
    "kanizsa-triangle": gen_kanizsa_triangle,
    "kanizsa-bar": gen_kanizsa_bar,
    "contrast-square": gen_contrast_square,
    "segments": gen_collinear_segments,
    "zigzag": gen_zigzag,
    "curve-line": gen_curve_line,
}


# --------------------------------------------------------------------------
# text format


def serialize_stimulus(s: Stimulus) -> str:
    lines = [f"mode {s.mode.value}"]
    for i, e in enumerate(s.elements):
        row = f"{e.x!r} {e.y!r} {e.theta!r}"
        if s.labels is not None:
            row += f" {s.labels[i]}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def parse_stimulus(text: str) -> Stimulus:
    """Parse the line-oriented stimulus format.

    A ``mode polarized|unpolarized`` header, optional ``#`` comments, then one
    ``x y theta [label]`` element per line. Angles must already be canonical
    for the mode.
    """
    mode = None
    elements, labels = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if mode is None:
            if len(fields) != 2 or fields[0] != "mode":
                raise StimulusParseError(lineno, "expected header 'mode polarized|unpolarized'")
            try:
                mode = Mode.parse(fields[1])
            except ValueError as exc:
                raise StimulusParseError(lineno, str(exc)) from None
            continue
        if len(fields) not in (3, 4):
            raise StimulusParseError(lineno, f"expected 'x y theta [label]', got {len(fields)} fields")
        try:
            x, y, t = (float(f) for f in fields[:3])
        except ValueError:
            raise StimulusParseError(lineno, "non-numeric coordinate") from None
        if not all(math.isfinite(v) for v in (x, y, t)):
            raise StimulusParseError(lineno, "non-finite coordinate")
        if not 0.0 <= t < mode.period:
            raise StimulusError(f"line {lineno}: theta={t} outside [0, {mode.period:.6g}) for {mode.value} mode")
        elements.append(LiftedPoint(x, y, t))
        labels.append(fields[3] if len(fields) == 4 else None)
    if mode is None:
        raise StimulusParseError(1, "missing mode header")
    if not elements:
        raise StimulusError("stimulus has no elements")
    have = [lab is not None for lab in labels]
    if any(have) and not all(have):
        raise StimulusError("either every element or none must carry a label")
    return Stimulus(tuple(elements), mode, tuple(labels) if all(have) else None)


def load_stimulus(path) -> Stimulus:
    with open(path, encoding="utf-8") as fh:
        return parse_stimulus(fh.read())


def save_stimulus(s: Stimulus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_stimulus(s))
