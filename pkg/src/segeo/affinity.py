"""Neural affinity matrix: the connectivity kernel restricted to the active elements."""
from __future__ import annotations

import dataclasses
import warnings

import numpy as np

from .kernels import KernelGrid, KernelKind, eval_pairs
from .stimuli import Stimulus


class DegenerateAffinityWarning(UserWarning):
    pass


@dataclasses.dataclass(frozen=True, eq=False)
class AffinityMatrix:
    values: np.ndarray
    source: tuple[str, str] = ("", "")
    degenerate: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("affinity matrix must be square")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("affinity entries must be finite and non-negative")
        if not np.array_equal(v, v.T):
            raise ValueError("affinity matrix must be exactly symmetric")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def build_affinity(s: Stimulus, grid: KernelGrid) -> AffinityMatrix:
    """``A[i, j]`` = kernel value between elements ``i`` and ``j``.

    The matrix is averaged with its transpose (absorbing interpolation
    asymmetry) and the diagonal is set to zero.
    """
    if grid.mode is not s.mode:
        raise ValueError(f"kernel mode {grid.mode.value} does not match stimulus mode {s.mode.value}")
    if grid.params.kind is KernelKind.FOKKER_PLANCK and not grid.symmetrized:
        raise ValueError("Fokker-Planck kernels must be symmetrized before building affinities")
    raw = eval_pairs(grid, s.xs, s.ys, s.thetas)
    A = 0.5 * (raw + raw.T)
    np.fill_diagonal(A, 0.0)
    A = np.maximum(A, 0.0)
    # a lone element has no pairs to be degenerate about
    degenerate = len(s) > 1 and not np.any(A > 0)
    if degenerate:
        warnings.warn("affinity matrix is identically zero", DegenerateAffinityWarning, stacklevel=2)
    return AffinityMatrix(A, (grid.digest(), s.digest()), degenerate)


def dump_matrix(A) -> str:
    """Plain-text dump: ``n`` then ``n`` rows of ``n`` values."""
    M = np.asarray(A, dtype=float)
    rows = [str(M.shape[0])]
    rows += [" ".join(repr(float(v)) for v in row) for row in M]
    return "\n".join(rows) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix dump")
    n = int(lines[0])
    if len(lines) != n + 1:
        raise ValueError(f"expected {n} rows, found {len(lines) - 1}")
    M = np.array([[float(v) for v in ln.split()] for ln in lines[1:]]) if n else np.zeros((0, 0))
    if M.shape != (n, n):
        raise ValueError(f"expected a {n}x{n} matrix")
    return M
