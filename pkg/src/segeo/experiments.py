"""Grouping pipeline and the named experiment sweeps.

The pipeline is: kernel -> affinity over the stimulus -> leading eigenvectors
-> perceptual units. Experiments run it over parameter grids and report one
row per configuration.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Callable, Sequence

import numpy as np

from .affinity import AffinityMatrix, build_affinity
from .kernels import DEFAULT_SHAPE, GridShape, KernelGrid, KernelKind, KernelParams, connectivity_kernel
from .spectral import Deflation, PerceptualUnit, extract_units, spectrum
from .stimuli import (
    Stimulus,
    gen_collinear_segments,
    gen_contrast_square,
    gen_curve_line,
    gen_fhh,
    gen_kanizsa_square,
    gen_kanizsa_triangle,
    gen_zigzag,
    inducer_index,
    is_mouth_edge,
)


def auto_steps(s: Stimulus, step: float = 1.0) -> int:
    """Path length set to a third of the largest inducer distance."""
    return max(1, int(round(s.max_inducer_distance() / (3.0 * step))))


@dataclasses.dataclass(frozen=True)
class SpectralParams:
    rel_threshold: float = 0.3
    saliency_floor_fraction: float = 0.1
    max_units: int = 10
    deflation: Deflation | str = Deflation.ZERO


@dataclasses.dataclass(frozen=True)
class GroupResult:
    stimulus: Stimulus
    params: KernelParams
    affinity: AffinityMatrix
    units: tuple[PerceptualUnit, ...]
    eigenvalues: np.ndarray

    @property
    def unit1(self) -> frozenset[int]:
        return self.units[0].members if self.units else frozenset()

    def unit_matching(self, targets: set[int]) -> PerceptualUnit | None:
        """The unit with the largest overlap with ``targets`` (earliest on ties)."""
        best, score = None, 0
        for u in self.units:
            k = len(u.members & targets)
            if k > score:
                best, score = u, k
        return best


class KernelSource:
    """Resolve kernels by (kind, mode, H), memoised and optionally disk-cached."""

    def __init__(self, base: KernelParams = KernelParams(), shape: GridShape = DEFAULT_SHAPE, cache_dir=None, workers=None):
        self.base = base
        self.shape = shape
        self.cache_dir = cache_dir
        self.workers = workers
        self._memo: dict[KernelParams, KernelGrid] = {}

    def params(self, kind, mode, H: int | None = None) -> KernelParams:
        return self.base.replace(kind=KernelKind.parse(kind), mode=mode, H=H if H is not None else self.base.H)

    def get(self, kind, mode, H: int | None = None) -> KernelGrid:
        p = self.params(kind, mode, H)
        if p not in self._memo:
            self._memo[p] = connectivity_kernel(p, self.shape, cache_dir=self.cache_dir, workers=self.workers)
        return self._memo[p]


def group(s: Stimulus, grid: KernelGrid, spectral: SpectralParams = SpectralParams()) -> GroupResult:
    A = build_affinity(s, grid)
    units = extract_units(
        A,
        rel_threshold=spectral.rel_threshold,
        saliency_floor_fraction=spectral.saliency_floor_fraction,
        max_units=spectral.max_units,
        deflation=spectral.deflation,
    )
    return GroupResult(s, grid.params, A, tuple(units), spectrum(A).eigenvalues)


def group_with(source: KernelSource, s: Stimulus, kind="fp", H: int | str | None = "auto", spectral=SpectralParams()) -> GroupResult:
    """Group ``s`` with a kernel from ``source``; ``H="auto"`` applies the inducer rule."""
    steps = auto_steps(s, source.base.step) if H == "auto" else H
    return group(s, source.get(kind, s.mode, steps), spectral)


def format_report(r: GroupResult, n_eigenvalues: int = 10) -> str:
    lines = [
        f"unit {u.rank} saliency {u.saliency:.12g} members {','.join(str(i) for i in sorted(u.members))}"
        for u in r.units
    ]
    ev = r.eigenvalues[:n_eigenvalues]
    lines.append("eigenvalues " + " ".join(f"{v:.12g}" for v in ev))
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> list[PerceptualUnit]:
    """Read back the unit lines of a report; the eigenvalue line is ignored."""
    units = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts or parts[0] != "unit":
            continue
        if len(parts) != 6 or parts[2] != "saliency" or parts[4] != "members":
            raise ValueError(f"line {lineno}: malformed unit line")
        members = frozenset(int(t) for t in parts[5].split(",") if t)
        units.append(PerceptualUnit(members, float(parts[3]), int(parts[1])))
    return units


def recall_precision(members, targets) -> tuple[float, float]:
    members, targets = set(members), set(targets)
    hit = len(members & targets)
    recall = hit / len(targets) if targets else 0.0
    precision = hit / len(members) if members else 0.0
    return recall, precision


def inducers_spanned(s: Stimulus, members) -> set[int]:
    return {k for k in (inducer_index(s.labels[i]) for i in members) if k is not None}


def _lam(r: GroupResult, k: int) -> float:
    return float(r.eigenvalues[k]) if len(r.eigenvalues) > k else 0.0


# --------------------------------------------------------------------------
# named experiments; every function returns a list of row dicts


def fhh_sweep(source: KernelSource, angles=(15, 30, 45, 60, 90), seeds=range(5), n_background: int = 20):
    """Path recall of unit 1 versus turning angle, averaged over seeds."""
    rows = []
    for a in angles:
        rec, prec, l1, l2 = [], [], [], []
        for seed in seeds:
            s, _ = gen_fhh(angle_step=a, n_background=n_background, seed=seed)
            r = group_with(source, s, "fp", H=None)
            rc, pc = recall_precision(r.unit1, s.indices("path"))
            rec.append(rc)
            prec.append(pc)
            l1.append(_lam(r, 0))
            l2.append(_lam(r, 1))
        rows.append(
            dict(angle=a, lambda1=float(np.mean(l1)), lambda2=float(np.mean(l2)), recall=float(np.mean(rec)),
                 precision=float(np.mean(prec)), contamination=1.0 - float(np.mean(prec)))
        )
    return rows


def square_sweep(source: KernelSource, angles=(0, 10, 20, 30, 40), kind="fp"):
    """Mouth-angle sweep of the Kanizsa square: how many inducers unit 1 spans."""
    rows = []
    for a in angles:
        s = gen_kanizsa_square(mouth_angle=a)
        r = group_with(source, s, kind)
        span = inducers_spanned(s, r.unit1)
        rows.append(dict(angle=a, H=r.params.H, lambda1=_lam(r, 0), lambda2=_lam(r, 1), n_inducers=len(span),
                         unit1_size=len(r.unit1)))
    return rows


def critical_angle(rows) -> float | None:
    """Midpoint between the last all-four angle and the first single-inducer
    angle, provided the sweep switches exactly once; otherwise None."""
    kinds = [4 if r["n_inducers"] == 4 else 1 if r["n_inducers"] == 1 else 0 for r in rows]
    if 0 in kinds:
        return None
    switches = [i for i in range(1, len(kinds)) if kinds[i] != kinds[i - 1]]
    if len(switches) != 1 or kinds[0] != 4:
        return None
    i = switches[0]
    return 0.5 * (rows[i - 1]["angle"] + rows[i]["angle"])


def swap(source: KernelSource, perturbations=(0.0, math.pi / 18)):
    """Curve versus line saliency as the curve's alignment is perturbed."""
    rows = []
    base = None
    for p in perturbations:
        s = gen_curve_line(perturb=p)
        r = group_with(source, s, "fp", H=None)
        cu = r.unit_matching(s.indices("curve"))
        lu = r.unit_matching(s.indices("line"))
        row = dict(
            perturb=p, lambda1=_lam(r, 0), lambda2=_lam(r, 1),
            curve_rank=cu.rank if cu else 0, curve_saliency=cu.saliency if cu else 0.0,
            line_rank=lu.rank if lu else 0, line_saliency=lu.saliency if lu else 0.0,
            curve_members=sorted(cu.members) if cu else [], line_members=sorted(lu.members) if lu else [],
        )
        curve_first = row["curve_saliency"] > row["line_saliency"]
        base = curve_first if base is None else base
        row["curve_first"] = curve_first
        row["swapped"] = curve_first != base
        rows.append(row)
    return rows


def fp_vs_srl(source: KernelSource):
    """Separated collinear segments and a sharp zigzag under both kernels."""
    rows = []
    for name, s in (("segments", gen_collinear_segments()), ("zigzag", gen_zigzag())):
        for kind in ("fp", "srl"):
            r = group_with(source, s, kind, H=None)
            rows.append(dict(stimulus=name, kind=kind, lambda1=_lam(r, 0), lambda2=_lam(r, 1),
                             unit1_size=len(r.unit1), n=len(s), grouped=len(r.unit1) == len(s)))
    return rows


def isotropic(source: KernelSource):
    """Aligned Kanizsa square under the Fokker-Planck and isotropic kernels."""
    s = gen_kanizsa_square()
    rows = []
    for kind in ("fp", "iso"):
        r = group_with(source, s, kind)
        span = inducers_spanned(s, r.unit1)
        rows.append(dict(kind=kind, H=r.params.H, lambda1=_lam(r, 0), lambda2=_lam(r, 1), n_inducers=len(span),
                         unit1_size=len(r.unit1)))
    return rows


def polarity(source: KernelSource):
    """Contrast square in both polarity modes."""
    rows = []
    for mode in ("unpolarized", "polarized"):
        s = gen_contrast_square(mode=mode)
        r = group_with(source, s, "fp")
        labels = sorted({s.labels[i] for i in r.unit1})
        rows.append(dict(mode=mode, H=r.params.H, lambda1=_lam(r, 0), lambda2=_lam(r, 1), unit1_labels=labels,
                         semicircle_exact=set(r.unit1) == s.indices("semicircle")))
    return rows


def triangle(source: KernelSource):
    """Kanizsa triangle under both anisotropic kernels."""
    s = gen_kanizsa_triangle()
    mouth = s.indices(is_mouth_edge)
    rows = []
    for kind in ("fp", "srl"):
        r = group_with(source, s, kind)
        rows.append(dict(kind=kind, H=r.params.H, lambda1=_lam(r, 0), lambda2=_lam(r, 1), unit1_size=len(r.unit1),
                         mouth_edges=len(mouth), exact=set(r.unit1) == mouth))
    return rows


EXPERIMENTS: dict[str, Callable] = {
    "fhh-sweep": fhh_sweep,
    "square-sweep": square_sweep,
    "swap": swap,
    "fp-vs-srl": fp_vs_srl,
    "isotropic": isotropic,
    "polarity": polarity,
    "triangle": triangle,
}


def format_table(rows: Sequence[dict]) -> str:
    """Tab-separated table with a header row; floats printed with 6 significant digits."""
    if not rows:
        return ""
    cols = list(rows[0])

    def cell(v):
        if isinstance(v, bool):
            return "yes" if v else "no"
        if isinstance(v, float):
            return f"{v:.6g}"
        if isinstance(v, (list, tuple)):
            return ",".join(str(x) for x in v)
        return str(v)

    lines = ["\t".join(cols)]
    lines += ["\t".join(cell(r[c]) for c in cols) for r in rows]
    return "\n".join(lines) + "\n"
