"""Saliency by eigen-analysis of affinity matrices.

The leading eigenvector of the affinity matrix is the emergent perceptual
unit; its eigenvalue is the unit's saliency. Further units are found by
removing the detected one and repeating.
"""
from __future__ import annotations

import dataclasses
import enum
import math

import numpy as np

#: above this size the leading pair comes from power iteration
DENSE_LIMIT = 512


class ConvergenceError(ArithmeticError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


class InstabilityError(ArithmeticError):
    pass


class Deflation(str, enum.Enum):
    ZERO = "zero"
    PROJECT = "project"


@dataclasses.dataclass(frozen=True)
class LeadingPair:
    eigenvalue: float
    eigenvector: np.ndarray
    degenerate: bool = False
    gap: float = math.inf

    def __iter__(self):
        return iter((self.eigenvalue, self.eigenvector))


@dataclasses.dataclass(frozen=True)
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns


@dataclasses.dataclass(frozen=True)
class PerceptualUnit:
    members: frozenset[int]
    saliency: float
    rank: int
    degenerate: bool = False


def _as_matrix(A) -> np.ndarray:
    M = np.asarray(getattr(A, "values", A), dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    return M


def sign_fix(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so that its largest-magnitude component is positive."""
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def spectrum(A) -> SpectralResult:
    """Full symmetric eigendecomposition, eigenvalues descending."""
    M = _as_matrix(A)
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    order = np.argsort(w, kind="stable")[::-1]
    V = V[:, order]
    for k in range(V.shape[1]):
        V[:, k] = sign_fix(V[:, k])
    return SpectralResult(w[order], V)


def power_iteration(M: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000, seed: int = 0):
    """Algebraically largest eigenpair of a symmetric matrix.

    The matrix is shifted by its Gershgorin bound so that the wanted
    eigenvalue is also the largest in magnitude.
    """
    n = M.shape[0]
    shift = float(np.abs(M).sum(axis=1).max())
    B = M + shift * np.eye(n)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    norm_f = max(np.linalg.norm(M), np.finfo(float).tiny)
    residual = math.inf
    for it in range(max_iter):
        w = B @ v
        v = w / np.linalg.norm(w)
        if it % 10 == 9:
            lam = float(v @ M @ v)
            residual = float(np.linalg.norm(M @ v - lam * v))
            if residual <= tol * norm_f:
                return lam, v
    raise ConvergenceError("power iteration did not converge", residual)


def leading_eigenpair(A, tol: float = 1e-9) -> LeadingPair:
    """Largest eigenvalue and a unit eigenvector of a symmetric matrix."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    M = _as_matrix(A)
    n = M.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    if not np.any(M):
        e = np.zeros(n)
        e[0] = 1.0
        return LeadingPair(0.0, e, degenerate=True, gap=0.0)
    if n <= DENSE_LIMIT:
        res = spectrum(M)
        lam, v = float(res.eigenvalues[0]), res.eigenvectors[:, 0]
        gap = float(res.eigenvalues[0] - res.eigenvalues[1]) if n > 1 else math.inf
    else:
        lam, v = power_iteration(M, tol=min(tol, 1e-10))
        v = sign_fix(v)
        # second eigenvalue via Hotelling deflation, only to report the gap
        lam2, _ = power_iteration(M - lam * np.outer(v, v), tol=1e-6)
        gap = lam - lam2
    residual = float(np.linalg.norm(M @ v - lam * v))
    if residual > tol * np.linalg.norm(M):
        raise ConvergenceError("eigenpair residual above tolerance", residual)
    degenerate = gap < 1e-9 * abs(lam)
    return LeadingPair(lam, v, degenerate, gap)


def membership(v, rel_threshold: float = 0.3) -> set[int]:
    """Indices whose component reaches ``rel_threshold`` of the largest one."""
    if not 0 < rel_threshold < 1:
        raise ValueError("rel_threshold must lie in (0, 1)")
    a = np.abs(np.asarray(v, dtype=float))
    top = a.max() if a.size else 0.0
    if top == 0:
        return set()
    return {int(i) for i in np.flatnonzero(a >= rel_threshold * top)}


def extract_units(
    A,
    rel_threshold: float = 0.3,
    saliency_floor_fraction: float = 0.1,
    max_units: int = 10,
    deflation: Deflation | str = Deflation.ZERO,
    tol: float = 1e-9,
) -> list[PerceptualUnit]:
    """Repeatedly take the leading eigenvector, record its unit, remove it.

    Stops when the current eigenvalue drops below
    ``saliency_floor_fraction`` of the first, or after ``max_units`` units.
    With the default ``zero`` deflation the rows and columns of detected
    members are cleared, so units are disjoint; ``project`` restricts the
    matrix to the orthogonal complement of the eigenvector instead.
    """
    if not saliency_floor_fraction > 0 or max_units < 1:
        raise ValueError("stop parameters must be positive")
    deflation = Deflation(deflation)
    M = _as_matrix(A).copy()
    n = M.shape[0]
    used: set[int] = set()
    units: list[PerceptualUnit] = []
    first = None
    while len(units) < max_units:
        pair = leading_eigenpair(M, tol)
        lam = pair.eigenvalue
        if first is None:
            if lam <= 0:
                break
            first = lam
        if lam <= 0 or lam < saliency_floor_fraction * first:
            break
        v = pair.eigenvector
        if deflation is Deflation.ZERO:
            v = v.copy()
            v[list(used)] = 0.0
        members = membership(v, rel_threshold)
        if deflation is Deflation.ZERO:
            members -= used
        if not members:
            break
        units.append(PerceptualUnit(frozenset(members), lam, len(units) + 1, pair.degenerate))
        if deflation is Deflation.ZERO:
            idx = sorted(members)
            M[idx, :] = 0.0
            M[:, idx] = 0.0
            used |= members
        else:
            P = np.eye(n) - np.outer(pair.eigenvector, pair.eigenvector)
            M = P @ M @ P
            M = 0.5 * (M + M.T)
    return units


def mean_field_evolve(
    A,
    u0,
    lambda_decay: float = 1.0,
    sigmoid_slope: float = 1.0,
    sigmoid_saturation: float = 1.0,
    dt: float = 0.01,
    n_steps: int = 10_000,
    guard: float = 1e6,
):
    """Explicit Euler for ``du/dt = -lambda_decay * u + s(A u)``.

    ``s(x) = saturation * tanh(slope * x / saturation)``, so ``s'(0)`` is the
    slope. Returns ``(u, residual)`` where ``residual`` is the sup-norm of
    ``du/dt`` at the final state.
    """
    if not dt > 0 or not lambda_decay > 0:
        raise ValueError("dt and lambda_decay must be positive")
    M = _as_matrix(A)
    u = np.array(u0, dtype=float)

    def rhs(u):
        return -lambda_decay * u + sigmoid_saturation * np.tanh(sigmoid_slope * (M @ u) / sigmoid_saturation)

    for _ in range(n_steps):
        u = u + dt * rhs(u)
        if not np.all(np.isfinite(u)) or np.abs(u).max() > guard:
            raise InstabilityError("activity diverged; reduce dt")
    return u, float(np.abs(rhs(u)).max())
