"""Sub-Riemannian connectivity kernels and spectral perceptual grouping.

Stimuli are sets of oriented elements lifted to R^2 x S^1. A connectivity
kernel, estimated by Monte-Carlo path simulation, gives pairwise affinities;
the leading eigenvectors of the affinity matrix pick out perceptual units.
"""
from .affinity import AffinityMatrix, build_affinity
from .geometry import Displacement, LiftedPoint, Mode, VectorField, group_displacement, invert_displacement, wrap_angle
from .kernels import (
    GridShape,
    KernelGrid,
    KernelKind,
    KernelParams,
    connectivity_kernel,
    eval_kernel,
    load_kernel,
    save_kernel,
    simulate_kernel,
    symmetrize,
)
from .spectral import PerceptualUnit, extract_units, leading_eigenpair, mean_field_evolve, membership
from .stimuli import Stimulus, parse_stimulus, serialize_stimulus

__version__ = "0.1.0"

__all__ = [
    "AffinityMatrix",
    "Displacement",
    "GridShape",
    "KernelGrid",
    "KernelKind",
    "KernelParams",
    "LiftedPoint",
    "Mode",
    "PerceptualUnit",
    "Stimulus",
    "VectorField",
    "build_affinity",
    "connectivity_kernel",
    "eval_kernel",
    "extract_units",
    "group_displacement",
    "invert_displacement",
    "leading_eigenpair",
    "load_kernel",
    "mean_field_evolve",
    "membership",
    "parse_stimulus",
    "save_kernel",
    "serialize_stimulus",
    "simulate_kernel",
    "symmetrize",
    "wrap_angle",
]
