"""Command-line front end: ``segeo kernel|group|experiment|validate|render``.

Kernels are looked up in (and written to) the directory named by
``--cache-dir`` or the ``SEGEO_KERNEL_CACHE`` environment variable.
Reports go to stdout unless ``--out``/``-o`` names a file; ``--figure``
writes a PNG next to the text.
"""
from __future__ import annotations

import argparse
import ast
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (
    EXPERIMENTS,
    KernelSource,
    SpectralParams,
    auto_steps,
    critical_angle,
    format_report,
    format_table,
    group,
    parse_report,
)
from .geometry import LiftedPoint, Mode
from .kernels import (
    CACHE_ENV,
    GridShape,
    KernelError,
    KernelKind,
    KernelParams,
    anisotropy_ratio,
    connectivity_kernel,
    load_kernel,
    save_kernel,
    simulate_kernel,
    symmetrize,
)
from .render import RenderSpec, render_svg
from .spectral import Deflation
from .stimuli import GENERATORS, StimulusError, load_stimulus
from .validation import (
    RegionPartition,
    facilitation_score,
    fit_error,
    load_partition,
    region_densities,
)

log = logging.getLogger("segeo")


class UsageError(Exception):
    """Bad combination of flags; exits with status 2."""


# --------------------------------------------------------------------------
# shared argument groups


def _add_kernel_flags(p: argparse.ArgumentParser, steps_auto: bool = False) -> None:
    d = KernelParams()
    g = p.add_argument_group("kernel")
    g.add_argument("--kind", default="fp", help="fp, srl or iso (default fp)")
    g.add_argument("--sigma", type=float, default=d.sigma, help="FP angular std-dev per unit step")
    g.add_argument("--sigma1", type=float, default=d.sigma1, help="SRL tangential std-dev")
    g.add_argument("--sigma3", type=float, default=d.sigma3, help="SRL angular std-dev")
    g.add_argument("--sigma-iso", type=float, default=d.sigma_iso, help="isotropic planar std-dev")
    g.add_argument("--rho", type=float, default=d.rho, help="isotropic angular std-dev")
    g.add_argument("--paths", type=int, default=d.n_paths)
    if steps_auto:
        g.add_argument("--steps", default="auto", help="H, or 'auto' for a third of the largest inducer distance")
    else:
        g.add_argument("--steps", type=int, default=d.H)
    g.add_argument("--step", type=float, default=d.step, help="arc length per step")
    g.add_argument("--seed", type=int, default=d.seed)
    g.add_argument("--nx", type=int, default=101)
    g.add_argument("--ny", type=int, default=101)
    g.add_argument("--ntheta", type=int, default=64)
    g.add_argument("--half-x", type=float, default=50.0)
    g.add_argument("--half-y", type=float, default=50.0)
    g.add_argument("--workers", type=int, default=None)
    g.add_argument("--cache-dir", default=None, help=f"kernel cache directory (default ${CACHE_ENV})")


def _kernel_params(a, mode, H: int) -> KernelParams:
    return KernelParams(
        kind=KernelKind.parse(a.kind), sigma=a.sigma, sigma1=a.sigma1, sigma3=a.sigma3, sigma_iso=a.sigma_iso,
        rho=a.rho, n_paths=a.paths, H=H, step=a.step, seed=a.seed, mode=Mode.parse(mode),
    )


def _shape(a) -> GridShape:
    return GridShape(a.nx, a.ny, a.ntheta, a.half_x, a.half_y)


def _parse_value(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _add_stimulus_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("stimulus (exactly one source)")
    g.add_argument("--stimulus", help="stimulus text file")
    g.add_argument("--generator", choices=sorted(GENERATORS), help="built-in generator")
    g.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="generator argument (repeatable)")
    g.add_argument("--mode", default=None, help="polarized or unpolarized (generators only)")


def _stimulus(a):
    if (a.stimulus is None) == (a.generator is None):
        raise UsageError("give exactly one of --stimulus or --generator")
    if a.stimulus is not None:
        if a.param or a.mode:
            raise UsageError("--param and --mode apply to --generator only")
        text = Path(a.stimulus).read_text(encoding="utf-8")
        if not any(line.strip() and not line.lstrip().startswith(("#", "mode")) for line in text.splitlines()):
            raise UsageError(f"{a.stimulus}: stimulus has no elements")
        return load_stimulus(a.stimulus)
    kw = {}
    for item in a.param:
        if "=" not in item:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        kw[k.strip().replace("-", "_")] = _parse_value(v.strip())
    if a.mode:
        kw["mode"] = a.mode
    try:
        return GENERATORS[a.generator](**kw)
    except TypeError as exc:
        raise UsageError(f"generator {a.generator}: {exc}") from None


def _spectral(a) -> SpectralParams:
    return SpectralParams(a.threshold, a.floor, a.max_units, Deflation(a.deflation))


def _add_spectral_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("spectral")
    g.add_argument("--threshold", type=float, default=0.3, help="membership threshold relative to the max component")
    g.add_argument("--floor", type=float, default=0.1, help="stop when saliency < floor * first saliency")
    g.add_argument("--max-units", type=int, default=10)
    g.add_argument("--deflation", choices=[d.value for d in Deflation], default=Deflation.ZERO.value)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# subcommands


def cmd_kernel(a) -> int:
    params = _kernel_params(a, a.mode or "polarized", a.steps)
    shape = _shape(a)
    if a.out is None:
        cache = a.cache_dir or os.environ.get(CACHE_ENV)
        if not cache:
            raise UsageError(f"give -o or set --cache-dir / {CACHE_ENV}")
        grid = connectivity_kernel(params, shape, cache_dir=cache, workers=a.workers)
    else:
        grid = simulate_kernel(params, shape, workers=a.workers)
        if params.kind is KernelKind.FOKKER_PLANCK:
            grid = symmetrize(grid)
        save_kernel(grid, a.out)
    print(f"kind {params.kind.label}")
    print(f"mass {grid.total_mass():.12g}")
    print(f"anisotropy {anisotropy_ratio(grid):.6g}")
    if a.figure:
        from .plotting import plot_kernel

        plot_kernel(grid, a.figure)
    return 0


def _grid_for(a, s):
    if a.kernel:
        grid = load_kernel(a.kernel)
        if grid.mode is not s.mode:
            raise UsageError(f"kernel is {grid.mode.value}, stimulus is {s.mode.value}")
        return grid
    H = auto_steps(s, a.step) if a.steps == "auto" else int(a.steps)
    return connectivity_kernel(_kernel_params(a, s.mode, H), _shape(a), cache_dir=a.cache_dir, workers=a.workers)


def cmd_group(a) -> int:
    s = _stimulus(a)
    grid = _grid_for(a, s)
    r = group(s, grid, _spectral(a))
    _emit(format_report(r, a.eigenvalues), a.out)
    if a.svg:
        Path(a.svg).write_text(render_svg(s, r.units, RenderSpec(segment_length=a.segment_length)), encoding="utf-8")
    if a.figure:
        from .plotting import plot_units

        plot_units(s, r.units, a.figure, segment_length=a.segment_length)
    return 0


_PLOT_COLUMNS = {
    "fhh-sweep": ("angle", ("recall", "contamination")),
    "square-sweep": ("angle", ("n_inducers",)),
    "swap": ("perturb", ("curve_saliency", "line_saliency")),
}


def cmd_experiment(a) -> int:
    if a.name not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {a.name!r}; available: {', '.join(sorted(EXPERIMENTS))}")
    base = KernelParams(n_paths=a.paths, seed=a.seed)
    source = KernelSource(base, cache_dir=a.cache_dir, workers=a.workers)
    rows = EXPERIMENTS[a.name](source)
    text = format_table(rows)
    if a.name == "square-sweep":
        theta = critical_angle(rows)
        text += f"critical_angle {'none' if theta is None else f'{theta:.6g}'}\n"
    _emit(text, a.out)
    if a.figure:
        from .plotting import plot_rows

        if a.name in _PLOT_COLUMNS:
            x, ys = _PLOT_COLUMNS[a.name]
            plot_rows(rows, x, ys, a.figure, title=a.name)
        else:
            log.warning("no figure defined for experiment %s", a.name)
    return 0


def _partition_or_default(a, shape: GridShape) -> RegionPartition:
    if a.partition:
        return load_partition(a.partition)
    hx, hy = shape.half_x + 0.5 * shape.wx, shape.half_y + 0.5 * shape.wy
    return RegionPartition.grid(-hx, -hy, hx, hy, 10, 10)


def cmd_validate_self_fit(a) -> int:
    shape = _shape(a)
    P = _partition_or_default(a, shape)
    grids = [
        connectivity_kernel(_kernel_params(a, "polarized", a.steps).replace(seed=sd), shape, cache_dir=a.cache_dir, workers=a.workers)
        for sd in a.seeds
    ]
    E = fit_error(region_densities(grids[0], P), region_densities(grids[1], P))
    print(f"regions {P.M}")
    print(f"seeds {a.seeds[0]} {a.seeds[1]}")
    print(f"E {E:.6g}")
    return 0


def parse_flanker_config(text: str):
    """``center x y theta`` once, then ``set NAME x y theta [; x y theta ...]`` lines."""
    center, sets = None, []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        try:
            if head == "center":
                center = LiftedPoint(*(float(v) for v in rest.split()))
            elif head == "set":
                name, _, pts = rest.strip().partition(" ")
                flankers = [LiftedPoint(*(float(v) for v in chunk.split())) for chunk in pts.split(";") if chunk.strip()]
                sets.append((name, flankers))
            else:
                raise ValueError(f"unknown directive {head!r}")
        except (TypeError, ValueError) as exc:
            raise UsageError(f"flanker config line {lineno}: {exc}") from None
    if center is None:
        raise UsageError("flanker config needs a 'center' line")
    return center, sets


def cmd_validate_facilitation(a) -> int:
    center, sets = parse_flanker_config(Path(a.config).read_text(encoding="utf-8"))
    if a.kernel:
        grid = load_kernel(a.kernel)
    else:
        params = _kernel_params(a, "polarized", a.steps).replace(kind=KernelKind.FOKKER_PLANCK)
        grid = connectivity_kernel(params, _shape(a), cache_dir=a.cache_dir, workers=a.workers)
    rows = [dict(set=name, flankers=len(fl), score=facilitation_score(center, fl, grid)) for name, fl in sets]
    _emit(format_table(rows), a.out)
    if a.figure and rows:
        from .plotting import plot_bars

        plot_bars([r["set"] for r in rows], [r["score"] for r in rows], a.figure, ylabel="facilitation")
    return 0


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def cmd_validate_sweep(a) -> int:
    sigmas = _float_list(a.sigmas)
    paths = [int(v) for v in _float_list(a.paths_list)]
    steps = [int(v) for v in _float_list(a.steps_list)]
    if not (sigmas and paths and steps):
        raise UsageError("sweep grid is empty: give at least one value for --sigmas, --paths-list and --steps-list")
    P = load_partition(a.partition)
    DT = np.array(_float_list(Path(a.density).read_text(encoding="utf-8")))
    if len(DT) != P.M:
        raise UsageError(f"density file has {len(DT)} values, partition has {P.M} regions")
    norm = np.linalg.norm(DT)
    if norm == 0:
        raise UsageError("target density is all zero")
    DT = DT / norm
    rows = []
    for sg in sigmas:
        for n in paths:
            for H in steps:
                params = KernelParams(sigma=sg, n_paths=n, H=H, seed=a.seed)
                grid = connectivity_kernel(params, _shape(a), cache_dir=a.cache_dir, workers=a.workers)
                rows.append(dict(sigma=sg, paths=n, steps=H, E=fit_error(region_densities(grid, P), DT)))
    best = min(rows, key=lambda r: r["E"])
    text = format_table(rows) + f"best sigma {best['sigma']:.6g} paths {best['paths']} steps {best['steps']} E {best['E']:.6g}\n"
    _emit(text, a.out)
    return 0


def cmd_render(a) -> int:
    s = _stimulus(a)
    units = parse_report(Path(a.report).read_text(encoding="utf-8")) if a.report else []
    svg = render_svg(s, units, RenderSpec(segment_length=a.segment_length))
    _emit(svg, a.out)
    if a.figure:
        from .plotting import plot_units

        plot_units(s, units, a.figure, segment_length=a.segment_length)
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="segeo", description="Connectivity kernels and spectral perceptual grouping.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", help="simulate a kernel and save it")
    _add_kernel_flags(p)
    p.add_argument("--mode", default=None, help="polarized (default) or unpolarized")
    p.add_argument("-o", "--out", help="output .sgk file (default: the cache directory)")
    p.add_argument("--figure", help="PNG of the orientation-summed kernel")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("group", help="extract perceptual units from a stimulus")
    _add_stimulus_flags(p)
    _add_kernel_flags(p, steps_auto=True)
    _add_spectral_flags(p)
    p.add_argument("--kernel", help="precomputed .sgk file (overrides kernel flags)")
    p.add_argument("--eigenvalues", type=int, default=10, help="how many eigenvalues to report")
    p.add_argument("-o", "--out", help="report file (default stdout)")
    p.add_argument("--svg", help="write an SVG with units highlighted")
    p.add_argument("--figure", help="write a PNG with units highlighted")
    p.add_argument("--segment-length", type=float, default=4.0)
    p.set_defaults(func=cmd_group)

    p = sub.add_parser("experiment", help="run a named sweep")
    p.add_argument("name", help=f"one of: {', '.join(sorted(EXPERIMENTS))}")
    p.add_argument("--paths", type=int, default=KernelParams().n_paths)
    p.add_argument("--seed", type=int, default=0, help="kernel seed")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("-o", "--out")
    p.add_argument("--figure")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("validate", help="fit error and facilitation checks")
    vsub = p.add_subparsers(dest="check", required=True)
    q = vsub.add_parser("self-fit", help="fit error between two seeds of the same kernel")
    _add_kernel_flags(q)
    q.set_defaults(kind="fp")
    q.add_argument("--seeds", type=int, nargs=2, default=[0, 1])
    q.add_argument("--partition", help="partition file (default: 10x10 over the grid)")
    q.set_defaults(func=cmd_validate_self_fit)
    q = vsub.add_parser("facilitation", help="score flanker sets around a centre element")
    _add_kernel_flags(q)
    q.add_argument("config", help="flanker configuration file")
    q.add_argument("--kernel", help="precomputed symmetrized FP kernel")
    q.add_argument("-o", "--out")
    q.add_argument("--figure")
    q.set_defaults(func=cmd_validate_facilitation)
    q = vsub.add_parser("sweep", help="grid search of (sigma, paths, steps) against a target density")
    q.add_argument("--density", required=True, help="target densities, one value per region")
    q.add_argument("--partition", required=True)
    q.add_argument("--sigmas", default="", help="comma separated")
    q.add_argument("--paths-list", default="", help="comma separated")
    q.add_argument("--steps-list", default="", help="comma separated")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--nx", type=int, default=101)
    q.add_argument("--ny", type=int, default=101)
    q.add_argument("--ntheta", type=int, default=64)
    q.add_argument("--half-x", type=float, default=50.0)
    q.add_argument("--half-y", type=float, default=50.0)
    q.add_argument("--workers", type=int, default=None)
    q.add_argument("--cache-dir", default=None)
    q.add_argument("-o", "--out")
    q.set_defaults(func=cmd_validate_sweep)

    p = sub.add_parser("render", help="SVG of a stimulus, optionally with units from a report")
    _add_stimulus_flags(p)
    p.add_argument("--report", help="unit report written by 'group'")
    p.add_argument("--segment-length", type=float, default=4.0)
    p.add_argument("-o", "--out")
    p.add_argument("--figure")
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return a.func(a)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"segeo: error: {exc}", file=sys.stderr)
        return 2
    except (KernelError, StimulusError, ValueError, ArithmeticError, OSError) as exc:
        print(f"segeo: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
