"""Reconstruction of perfectly conducting cavities from boundary measurements.

Pipeline: Nystrom layer potentials -> Dirichlet-to-Neumann data -> harmonic
moments of an equivalent measure -> atomic measure by a Hankel pencil ->
disks.  Closed-form references for a single cavity with a known conformal
map and for two disks live in :mod:`calderon_cavities.oracles`.
"""
from .errors import *  # noqa: F401,F403
from .forward import DtnPair, assemble_dtn, measured_interaction, perturb_measurements
from .geometry import (
    BoundaryGrid,
    Circle,
    Ellipse,
    LaurentCurve,
    RescaleMap,
    RoundedRectangle,
    Scene,
    TrigPolynomial,
    build_scene,
    clover,
    sample_grid,
)
from .moments import MomentSequence, build_Q, extract_moments
from .prony import AtomicMeasure, DiskSet, atoms_to_disks, inverse_rescale, solve_prony
from .traces import TraceSpace

__version__ = "0.1.0"
