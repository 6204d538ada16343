"""Monte-Carlo estimation of time-integrated connectivity kernels.

Three stochastic path systems are simulated from the origin of SE(2):

* Fokker-Planck: unit forward drift along the orientation, angular diffusion.
* Sub-Riemannian Laplacian: random signed speed along the orientation,
  angular diffusion.
* Isotropic Laplacian: planar Brownian motion plus angular diffusion.

Every state visited by every path is binned on a regular (x, y, theta) grid
and the histogram is normalised to unit mass, giving a discrete version of
the density integrated over time.
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import logging
import math
import os
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .geometry import (
    Displacement,
    LiftedPoint,
    Mode,
    displacements,
    group_displacement,
    invert_displacement_arrays,
    wrap_centered,
)

log = logging.getLogger(__name__)

#: Paths per random substream. Fixed so that results never depend on the
#: number of workers.
BLOCK_PATHS = 8192

CACHE_ENV = "SEGEO_KERNEL_CACHE"


class KernelError(Exception):
    """Base class for kernel failures."""


class DegenerateKernelError(KernelError):
    pass


class KernelFormatError(KernelError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class KernelKind(enum.IntEnum):
    FOKKER_PLANCK = 0
    SUB_RIEMANNIAN_LAPLACIAN = 1
    ISOTROPIC_LAPLACIAN = 2

    @classmethod
    def parse(cls, value: "KernelKind | str") -> "KernelKind":
        if isinstance(value, KernelKind):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "fp": cls.FOKKER_PLANCK,
            "fokker_planck": cls.FOKKER_PLANCK,
            "fokkerplanck": cls.FOKKER_PLANCK,
            "srl": cls.SUB_RIEMANNIAN_LAPLACIAN,
            "sub_riemannian_laplacian": cls.SUB_RIEMANNIAN_LAPLACIAN,
            "subriemannianlaplacian": cls.SUB_RIEMANNIAN_LAPLACIAN,
            "iso": cls.ISOTROPIC_LAPLACIAN,
            "isotropic": cls.ISOTROPIC_LAPLACIAN,
            "isotropic_laplacian": cls.ISOTROPIC_LAPLACIAN,
            "isotropiclaplacian": cls.ISOTROPIC_LAPLACIAN,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown kernel kind {value!r}") from None

    @property
    def short(self) -> str:
        return ("fp", "srl", "iso")[self.value]

    @property
    def label(self) -> str:
        return ("FokkerPlanck", "SubRiemannianLaplacian", "IsotropicLaplacian")[self.value]


@dataclasses.dataclass(frozen=True)
class KernelParams:
    """Path-system parameters. Fields that do not apply to ``kind`` are ignored."""

    kind: KernelKind = KernelKind.FOKKER_PLANCK
    sigma: float = 0.15
    sigma1: float = 1.2
    sigma3: float = 0.11
    sigma_iso: float = 1.0
    rho: float = 0.15
    n_paths: int = 1_000_000
    H: int = 30
    step: float = 1.0
    seed: int = 0
    mode: Mode = Mode.POLARIZED

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind.parse(self.kind))
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if self.n_paths < 1 or self.H < 1:
            raise ValueError("n_paths and H must be >= 1")
        if not self.step > 0:
            raise ValueError("step must be positive")
        for name in ("sigma", "sigma1", "sigma3", "sigma_iso", "rho"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a finite non-negative number")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def replace(self, **changes) -> "KernelParams":
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class GridShape:
    """Bin layout. Spatial nodes span ``[-half_x, half_x]`` inclusive; the
    angular axis tiles the full period of the polarity mode with node 0 at
    zero angle offset."""

    nx: int = 101
    ny: int = 101
    ntheta: int = 64
    half_x: float = 50.0
    half_y: float = 50.0

    def __post_init__(self):
        if min(self.nx, self.ny) < 2 or self.ntheta < 1:
            raise ValueError("grid needs nx, ny >= 2 and ntheta >= 1")
        if not (self.half_x > 0 and self.half_y > 0):
            raise ValueError("grid extent must be positive")

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.ntheta)

    @property
    def wx(self) -> float:
        return 2.0 * self.half_x / (self.nx - 1)

    @property
    def wy(self) -> float:
        return 2.0 * self.half_y / (self.ny - 1)

    def x_nodes(self) -> np.ndarray:
        return -self.half_x + self.wx * np.arange(self.nx)

    def y_nodes(self) -> np.ndarray:
        return -self.half_y + self.wy * np.arange(self.ny)


DEFAULT_SHAPE = GridShape()


@dataclasses.dataclass(frozen=True, eq=False)
class KernelGrid:
    values: np.ndarray
    shape: GridShape
    params: KernelParams
    symmetrized: bool = False

    def __post_init__(self):
        if self.values.shape != self.shape.dims:
            raise ValueError(f"values shape {self.values.shape} != dims {self.shape.dims}")

    @property
    def mode(self) -> Mode:
        return self.params.mode

    @property
    def period(self) -> float:
        return self.params.mode.period

    @property
    def wtheta(self) -> float:
        return self.period / self.shape.ntheta

    @property
    def bin_volume(self) -> float:
        return self.shape.wx * self.shape.wy * self.wtheta

    def theta_nodes(self) -> np.ndarray:
        return wrap_centered(self.wtheta * np.arange(self.shape.ntheta), self.mode)

    def total_mass(self) -> float:
        return float(self.values.sum() * self.bin_volume)

    def xy_marginal(self) -> np.ndarray:
        """Mass per spatial bin, summed over orientation."""
        return self.values.sum(axis=2) * self.bin_volume

    def digest(self) -> str:
        return hashlib.sha256(to_bytes(self)).hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, KernelGrid):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.params == other.params
            and self.symmetrized == other.symmetrized
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def cone_mass(grid: KernelGrid, direction: float, half_width: float = math.pi / 8) -> float:
    """Mass whose planar offset points within ``half_width`` of ``direction``.

    The origin node has no direction and is excluded.
    """
    X, Y = np.meshgrid(grid.shape.x_nodes(), grid.shape.y_nodes(), indexing="ij")
    ang = np.abs(wrap_centered(np.arctan2(Y, X) - direction, Mode.POLARIZED))
    sel = (ang < half_width) & ((X != 0) | (Y != 0))
    return float(grid.xy_marginal()[sel].sum())


def anisotropy_ratio(grid: KernelGrid) -> float:
    """Forward-cone mass over lateral-cone mass (inf when the lateral cone is empty)."""
    fwd = cone_mass(grid, 0.0)
    lat = cone_mass(grid, math.pi / 2)
    return fwd / lat if lat > 0 else math.inf


# --------------------------------------------------------------------------
# simulation


def _block_rng(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _simulate_paths(params: KernelParams, n: int, rng: np.random.Generator):
    """States after steps 1..H of ``n`` paths, each array shaped (H, n)."""
    H, ds = params.H, params.step
    root = math.sqrt(ds)
    kind = params.kind
    if kind is KernelKind.FOKKER_PLANCK:
        # heading used for step k is the angle reached after k-1 noise kicks
        kicks = rng.standard_normal((H, n)) * (params.sigma * root)
        theta = np.cumsum(kicks, axis=0)
        heading = np.empty_like(theta)
        heading[0] = 0.0
        heading[1:] = theta[:-1]
        x = np.cumsum(ds * np.cos(heading), axis=0)
        y = np.cumsum(ds * np.sin(heading), axis=0)
    elif kind is KernelKind.SUB_RIEMANNIAN_LAPLACIAN:
        speed = rng.standard_normal((H, n)) * (params.sigma1 * root)
        kicks = rng.standard_normal((H, n)) * (params.sigma3 * root)
        theta = np.cumsum(kicks, axis=0)
        heading = np.empty_like(theta)
        heading[0] = 0.0
        heading[1:] = theta[:-1]
        x = np.cumsum(speed * np.cos(heading), axis=0)
        y = np.cumsum(speed * np.sin(heading), axis=0)
    else:
        x = np.cumsum(rng.standard_normal((H, n)) * (params.sigma_iso * root), axis=0)
        y = np.cumsum(rng.standard_normal((H, n)) * (params.sigma_iso * root), axis=0)
        theta = np.cumsum(rng.standard_normal((H, n)) * (params.rho * root), axis=0)
    return x, y, theta


def _bin_counts(params: KernelParams, shape: GridShape, ntheta_sim: int, n: int, block: int):
    rng = _block_rng(params.seed, block)
    x, y, theta = _simulate_paths(params, n, rng)
    ix = np.rint((x + shape.half_x) / shape.wx)
    iy = np.rint((y + shape.half_y) / shape.wy)
    inside = (ix >= 0) & (ix < shape.nx) & (iy >= 0) & (iy < shape.ny)
    it = np.rint(theta * (ntheta_sim / (2.0 * math.pi))).astype(np.int64) % ntheta_sim
    flat = (ix[inside].astype(np.int64) * shape.ny + iy[inside].astype(np.int64)) * ntheta_sim + it[inside]
    return np.bincount(flat, minlength=shape.nx * shape.ny * ntheta_sim)


def simulate_counts(params: KernelParams, shape: GridShape = DEFAULT_SHAPE, workers: int | None = None) -> np.ndarray:
    """Raw passage counts on the polarized angular grid.

    Paths are split into fixed blocks of :data:`BLOCK_PATHS`; block ``b``
    draws from a Philox stream keyed by ``(seed, b)``. Counts are integers,
    so the merged histogram is bit-identical for any worker count.
    """
    ntheta_sim = shape.ntheta if params.mode is Mode.POLARIZED else 2 * shape.ntheta
    blocks = [
        (b, min(BLOCK_PATHS, params.n_paths - b * BLOCK_PATHS))
        for b in range(math.ceil(params.n_paths / BLOCK_PATHS))
    ]
    total = np.zeros(shape.nx * shape.ny * ntheta_sim, dtype=np.int64)

    def run(job):
        b, n = job
        return _bin_counts(params, shape, ntheta_sim, n, b)

    workers = workers or 1
    if workers == 1:
        for job in blocks:
            total += run(job)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for counts in pool.map(run, blocks):
                total += counts
    return total.reshape(shape.nx, shape.ny, ntheta_sim)


def fold_unpolarized(counts: np.ndarray) -> np.ndarray:
    """Identify angle offsets that differ by pi: ``v[k] + v[k + n]``."""
    n = counts.shape[2] // 2
    return counts[:, :, :n] + counts[:, :, n:]


def reflect_unpolarized(counts: np.ndarray) -> np.ndarray:
    """Add the point reflection ``(dx, dy) -> (-dx, -dy)``.

    An unpolarized source frame may be turned by a half turn, which negates
    the planar offset; the kernel must not depend on that choice. Spatial
    nodes are symmetric about zero, so the reflection is an index flip.
    """
    return counts + counts[::-1, ::-1, :]


def simulate_kernel(params: KernelParams, shape: GridShape = DEFAULT_SHAPE, workers: int | None = None) -> KernelGrid:
    counts = simulate_counts(params, shape, workers)
    if counts.sum() == 0:
        raise DegenerateKernelError("every simulated state left the grid extent")
    norm_paths = params.n_paths
    if params.mode is Mode.UNPOLARIZED:
        counts = reflect_unpolarized(fold_unpolarized(counts))
        norm_paths *= 2
    grid = KernelGrid(np.zeros(shape.dims), shape, params)
    norm = norm_paths * params.H * grid.bin_volume
    return dataclasses.replace(grid, values=counts / norm)


# --------------------------------------------------------------------------
# interpolation and evaluation


def interpolate(grid: KernelGrid, dx, dy, dth) -> np.ndarray:
    """Trilinear interpolation at displacements; 0 outside the node range.

    The angular axis is cyclic.
    """
    sh = grid.shape
    dx, dy, dth = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (dx, dy, dth)))
    inside = (np.abs(dx) <= sh.half_x) & (np.abs(dy) <= sh.half_y)
    u = np.clip((dx + sh.half_x) / sh.wx, 0.0, sh.nx - 1)
    v = np.clip((dy + sh.half_y) / sh.wy, 0.0, sh.ny - 1)
    w = np.mod(dth / grid.wtheta, sh.ntheta)
    i0 = np.minimum(np.floor(u).astype(np.int64), sh.nx - 2)
    j0 = np.minimum(np.floor(v).astype(np.int64), sh.ny - 2)
    k0 = np.floor(w).astype(np.int64) % sh.ntheta
    fu, fv, fw = u - i0, v - j0, w - np.floor(w)
    k1 = (k0 + 1) % sh.ntheta
    vals = grid.values
    out = np.zeros(dx.shape)
    for di, wi in ((0, 1 - fu), (1, fu)):
        for dj, wj in ((0, 1 - fv), (1, fv)):
            for kk, wk in ((k0, 1 - fw), (k1, fw)):
                out += wi * wj * wk * vals[i0 + di, j0 + dj, kk]
    return np.where(inside, out, 0.0)


def symmetrize(grid: KernelGrid) -> KernelGrid:
    """Average the kernel with its exchanged counterpart at every node.

    The partner value is interpolated at the inverse displacement. Where the
    inverse leaves the spatial extent the node keeps its own value. Already
    symmetrized grids are returned unchanged.
    """
    if grid.symmetrized:
        return grid
    X, Y, T = np.meshgrid(grid.shape.x_nodes(), grid.shape.y_nodes(), grid.theta_nodes(), indexing="ij")
    ix, iy, it = invert_displacement_arrays(X, Y, T, grid.mode)
    sh = grid.shape
    outside = (np.abs(ix) > sh.half_x) | (np.abs(iy) > sh.half_y)
    partner = np.where(outside, grid.values, interpolate(grid, ix, iy, it))
    return dataclasses.replace(grid, values=0.5 * (grid.values + partner), symmetrized=True)


def _check_mode(grid: KernelGrid, mode) -> None:
    if mode is not None and Mode.parse(mode) is not grid.mode:
        raise ValueError(f"kernel grid is {grid.mode.value}, requested {Mode.parse(mode).value}")


def eval_displacements(grid: KernelGrid, dx, dy, dth) -> np.ndarray:
    """Kernel values at displacements. Symmetrized grids are evaluated as the
    mean over the displacement and its inverse, so exchange symmetry holds
    between arbitrary off-node pairs and not only at the nodes."""
    direct = interpolate(grid, dx, dy, dth)
    if not grid.symmetrized:
        return direct
    return 0.5 * (direct + interpolate(grid, *invert_displacement_arrays(dx, dy, dth, grid.mode)))


def eval_kernel(grid: KernelGrid, p: LiftedPoint, q: LiftedPoint, mode=None) -> float:
    _check_mode(grid, mode)
    d: Displacement = group_displacement(p, q, grid.mode)
    return float(eval_displacements(grid, d.dx, d.dy, d.dtheta))


def eval_pairs(grid: KernelGrid, xs, ys, thetas, mode=None) -> np.ndarray:
    """Matrix of kernel values between every ordered pair of points."""
    _check_mode(grid, mode)
    return eval_displacements(grid, *displacements(xs, ys, thetas, grid.mode))


# --------------------------------------------------------------------------
# cache file

MAGIC = b"SGK1"
FORMAT_VERSION = 1
# magic, version, kind, mode, flags, dims, extent + period, params
_HEADER = struct.Struct("<4sIBBB3I3d5dQQdQ")
_CRC = struct.Struct("<I")


def _header_bytes(grid: KernelGrid) -> bytes:
    p, sh = grid.params, grid.shape
    return _HEADER.pack(
        MAGIC, FORMAT_VERSION, int(p.kind), 0 if p.mode is Mode.POLARIZED else 1,
        1 if grid.symmetrized else 0,
        sh.nx, sh.ny, sh.ntheta, sh.half_x, sh.half_y, grid.period,
        p.sigma, p.sigma1, p.sigma3, p.sigma_iso, p.rho,
        p.n_paths, p.H, p.step, p.seed,
    )


def to_bytes(grid: KernelGrid) -> bytes:
    header = _header_bytes(grid)
    payload = np.ascontiguousarray(grid.values, dtype="<f8").tobytes()
    return b"".join((header, _CRC.pack(zlib.crc32(header)), payload, _CRC.pack(zlib.crc32(payload))))


def from_bytes(data: bytes) -> KernelGrid:
    hsize = _HEADER.size
    if len(data) < 4 or data[:4] != MAGIC:
        raise KernelFormatError("magic", f"expected {MAGIC!r}")
    if len(data) < hsize + _CRC.size:
        raise KernelFormatError("header", "file truncated inside header")
    header = data[:hsize]
    fields = _HEADER.unpack(header)
    (_, version, kind, mode, flags, nx, ny, nt, hx, hy, period,
     sigma, sigma1, sigma3, sigma_iso, rho, n_paths, H, step, seed) = fields
    if version != FORMAT_VERSION:
        raise KernelFormatError("version", f"unsupported format version {version}")
    (hcrc,) = _CRC.unpack_from(data, hsize)
    if hcrc != zlib.crc32(header):
        raise KernelFormatError("header_crc", "header checksum mismatch")
    if kind not in (0, 1, 2):
        raise KernelFormatError("kind", f"invalid kernel kind {kind}")
    if mode not in (0, 1):
        raise KernelFormatError("mode", f"invalid mode {mode}")
    start = hsize + _CRC.size
    n = nx * ny * nt
    end = start + 8 * n
    if len(data) != end + _CRC.size:
        raise KernelFormatError("values", f"expected {n} values, file size {len(data)} does not match")
    payload = data[start:end]
    (pcrc,) = _CRC.unpack_from(data, end)
    if pcrc != zlib.crc32(payload):
        raise KernelFormatError("payload_crc", "payload checksum mismatch")
    params = KernelParams(
        kind=KernelKind(kind), sigma=sigma, sigma1=sigma1, sigma3=sigma3, sigma_iso=sigma_iso,
        rho=rho, n_paths=n_paths, H=H, step=step, seed=seed,
        mode=Mode.POLARIZED if mode == 0 else Mode.UNPOLARIZED,
    )
    if period != params.mode.period:
        raise KernelFormatError("period", f"angular period {period} inconsistent with mode")
    shape = GridShape(nx, ny, nt, hx, hy)
    values = np.frombuffer(payload, dtype="<f8").astype(float).reshape(nx, ny, nt)
    return KernelGrid(values, shape, params, symmetrized=bool(flags & 1))


def save_kernel(grid: KernelGrid, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    tmp.write_bytes(to_bytes(grid))
    os.replace(tmp, path)


def load_kernel(path) -> KernelGrid:
    return from_bytes(Path(path).read_bytes())


# --------------------------------------------------------------------------
# convenience


def cache_name(params: KernelParams, shape: GridShape = DEFAULT_SHAPE, symmetrized: bool = False) -> str:
    key = repr((dataclasses.astuple(params), dataclasses.astuple(shape), symmetrized))
    return f"{params.kind.short}-{params.mode.value[:3]}-H{params.H}-{hashlib.sha256(key.encode()).hexdigest()[:12]}.sgk"


def connectivity_kernel(
    params: KernelParams,
    shape: GridShape = DEFAULT_SHAPE,
    cache_dir=None,
    workers: int | None = None,
) -> KernelGrid:
    """Simulate (or fetch from cache) the kernel used for grouping.

    Fokker-Planck grids are symmetrized; the other two are kept as simulated.
    ``cache_dir`` falls back to the ``SEGEO_KERNEL_CACHE`` environment variable.
    """
    sym = params.kind is KernelKind.FOKKER_PLANCK
    cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)
    path = Path(cache_dir) / cache_name(params, shape, sym) if cache_dir else None
    if path is not None and path.exists():
        try:
            return load_kernel(path)
        except KernelFormatError as exc:
            log.warning("ignoring unreadable cache file %s (%s)", path, exc)
    grid = simulate_kernel(params, shape, workers)
    if sym:
        grid = symmetrize(grid)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_kernel(grid, path)
    return grid
