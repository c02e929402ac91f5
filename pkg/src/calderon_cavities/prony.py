"""Atomic measures from harmonic moments (Prony's problem).

Given ``tau_m = sum_i c_i z_i^m`` for ``m = 0 .. 2n-1`` the nodes ``z_i``
are the generalized eigenvalues of the Hankel pencil ``(H1, H0)`` with
``H0[j, k] = tau_{j+k}`` and ``H1[j, k] = tau_{j+k+1}``.  The pencil is
reduced onto the numerical range of ``H0`` by a truncated SVD before the
small dense eigen-solve, so an overestimated ``n`` collapses to the rank
actually present in the data.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IllConditionedPencil, RankZero
from .geometry import RescaleMap
from .moments import MomentSequence

RANK_TOL = 1e-10
DEDUPE_TOL = 1e-6
WEIGHT_FLOOR_REL = 1e-8
KAPPA_MASS = {"2pi": 2.0 * math.pi, "4pi": 4.0 * math.pi}


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Weighted Dirac masses ``sum c_i delta_{z_i}``."""

    locations: np.ndarray
    weights: np.ndarray
    n_requested: int = 0
    rank: int = 0
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.locations, dtype=complex))
        c = np.atleast_1d(np.asarray(self.weights, dtype=complex))
        if z.shape != c.shape or z.ndim != 1:
            raise ValueError("locations and weights must be matching 1-D arrays")
        object.__setattr__(self, "locations", z)
        object.__setattr__(self, "weights", c)
        object.__setattr__(self, "residuals", np.asarray(self.residuals, dtype=float))

    def __len__(self):
        return len(self.locations)

    def moments(self, count: int) -> np.ndarray:
        """``sum_i c_i z_i^m`` for ``m < count``."""
        if len(self) == 0:
            return np.zeros(count, dtype=complex)
        return np.vander(self.locations, count, increasing=True).T @ self.weights

    @property
    def total_mass(self) -> complex:
        return complex(self.weights.sum())


@dataclass(frozen=True, eq=False)
class DiskSet:
    centers: np.ndarray
    radii: np.ndarray
    kappa_mass: float = KAPPA_MASS["4pi"]

    def __post_init__(self):
        centers = np.atleast_1d(np.asarray(self.centers, dtype=complex))
        radii = np.atleast_1d(np.asarray(self.radii, dtype=float))
        if centers.shape != radii.shape:
            raise ValueError("centers and radii must have the same length")
        if np.any(radii < 0):
            raise ValueError("radii must be non-negative")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)

    def __len__(self):
        return len(self.centers)


def kappa_from_convention(convention) -> float:
    """Mass constant from ``"2pi"``, ``"4pi"`` or a positive number."""
    if isinstance(convention, str):
        try:
            return KAPPA_MASS[convention]
        except KeyError:
            raise ValueError(f"unknown mass convention {convention!r}") from None
    value = float(convention)
    if not value > 0:
        raise ValueError("mass constant must be positive")
    return value


def hankel_pair(tau: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.add.outer(np.arange(n), np.arange(n))
    return tau[idx], tau[idx + 1]


def _values(tau) -> np.ndarray:
    return tau.values if isinstance(tau, MomentSequence) else np.asarray(tau, dtype=complex)


def _scale(tau: np.ndarray) -> float:
    """Rough modulus of the nodes, used to balance the Hankel entries."""
    t0 = np.abs(tau[0])
    if t0 == 0:
        return 1.0
    m = np.arange(1, len(tau))
    ratios = (np.abs(tau[1:]) / t0) ** (1.0 / m)
    s = float(ratios.max()) if ratios.size else 1.0
    return s if np.isfinite(s) and s > 0 else 1.0


def _dedupe(z: np.ndarray, tol: float) -> np.ndarray:
    kept: list[complex] = []
    for zi in z:
        if all(abs(zi - zk) > tol for zk in kept):
            kept.append(zi)
    return np.array(kept, dtype=complex)


def fit_weights(locations: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Least-squares weights for ``sum_i c_i z_i^m = tau_m`` on the given moments."""
    if len(locations) == 0:
        return np.zeros(0, dtype=complex)
    vander = np.vander(locations, len(tau), increasing=True).T
    c, *_ = np.linalg.lstsq(vander, tau, rcond=None)
    return c


def solve_prony(tau, n: int, *, rank_tol: float = RANK_TOL,
                dedupe_tol: float = DEDUPE_TOL) -> AtomicMeasure:
    """Atomic measure with at most ``n`` atoms matching ``tau_0 .. tau_{2n-1}``.

    Moments beyond ``2n`` (if supplied) do not enter the fit but are
    included in the reported residuals, which makes them a hold-out check.
    """
    tau = _values(tau)
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(tau) < 2 * n:
        raise ValueError(f"need {2 * n} moments for n={n}, got {len(tau)}")
    fit = tau[: 2 * n]
    if not np.any(np.abs(fit) > 0) or np.abs(fit).max() < 1e-300:
        warnings.warn("all moments vanish; returning the empty measure", RankZero, stacklevel=2)
        return AtomicMeasure(np.zeros(0), np.zeros(0), n, 0, np.abs(tau))

    # Work with nodes z / s so that the Hankel entries are of comparable size.
    s = _scale(fit)
    scaled = fit / s ** np.arange(2 * n)
    h0, h1 = hankel_pair(scaled, n)
    u, sv, vh = np.linalg.svd(h0)
    rank = int(np.sum(sv > rank_tol * sv[0])) if sv[0] > 0 else 0
    if rank == 0:
        warnings.warn("Hankel matrix is numerically zero; returning the empty measure",
                      RankZero, stacklevel=2)
        return AtomicMeasure(np.zeros(0), np.zeros(0), n, 0, np.abs(tau), sv)
    if rank < n:
        warnings.warn(f"Hankel matrix has numerical rank {rank} < n={n}; "
                      f"reducing to {rank} atoms", IllConditionedPencil, stacklevel=2)
    ur, vr = u[:, :rank], vh[:rank].conj().T
    reduced = (ur.conj().T @ h1 @ vr) / sv[:rank][:, None]
    nodes = np.linalg.eigvals(reduced) * s
    nodes = _dedupe(nodes, dedupe_tol)
    weights = fit_weights(nodes, fit)
    measure = AtomicMeasure(nodes, weights, n, rank, singular_values=sv)
    residuals = np.abs(measure.moments(len(tau)) - tau)
    return AtomicMeasure(nodes, weights, n, rank, residuals, sv)


def prony_polynomial_roots(tau, n: int) -> np.ndarray:
    """Nodes as roots of the Prony polynomial ``z^n + a_{n-1} z^{n-1} + ... + a_0``.

    The coefficients solve ``H0 a = -(tau_n, ..., tau_{2n-1})``; this route
    shares nothing with the pencil reduction in :func:`solve_prony`.
    """
    tau = _values(tau)
    h0, _ = hankel_pair(tau, n)
    a = np.linalg.solve(h0, -tau[n: 2 * n])
    return np.roots(np.concatenate([[1.0], a[::-1]]))


def suggest_rank(tau, rank_tol: float = RANK_TOL) -> int:
    """Numerical rank of the largest square Hankel matrix the moments allow."""
    tau = _values(tau)
    n = len(tau) // 2
    if n == 0 or not np.any(np.abs(tau) > 0):
        return 0
    s = _scale(tau[: 2 * n])
    h0, _ = hankel_pair(tau[: 2 * n] / s ** np.arange(2 * n), n)
    sv = np.linalg.svd(h0, compute_uv=False)
    return int(np.sum(sv > rank_tol * sv[0]))


def atoms_to_disks(measure: AtomicMeasure, kappa_mass=KAPPA_MASS["4pi"], *,
                   weight_floor: float | None = None, tau0: float | None = None) -> DiskSet:
    """Disks of radius ``sqrt(|c| / kappa_mass)`` centred at the atoms.

    Atoms with ``|c|`` below ``weight_floor`` (default ``1e-8 * tau0``)
    become zero-radius markers.
    """
    kappa = kappa_from_convention(kappa_mass)
    c = np.abs(measure.weights)
    if weight_floor is None:
        ref = abs(tau0) if tau0 is not None else (c.sum() if c.size else 0.0)
        weight_floor = WEIGHT_FLOOR_REL * ref
    radii = np.where(c < weight_floor, 0.0, np.sqrt(c / kappa))
    return DiskSet(measure.locations.copy(), radii, kappa)


def inverse_rescale(disks: DiskSet, rescale: RescaleMap) -> DiskSet:
    """Map disks from the rescaled frame back to the original coordinates."""
    return DiskSet(rescale.inverse(disks.centers), disks.radii / rescale.scale, disks.kappa_mass)


def inverse_rescale_measure(measure: AtomicMeasure, rescale: RescaleMap) -> AtomicMeasure:
    """Atoms in original coordinates; weights scale like area (``1 / s^2``)."""
    return AtomicMeasure(rescale.inverse(measure.locations), measure.weights / rescale.scale**2,
                         measure.n_requested, measure.rank, measure.residuals,
                         measure.singular_values)


def write_atoms_csv(path: str | Path, measure: AtomicMeasure, disks: DiskSet) -> None:
    lines = [f"# kappa_mass: {disks.kappa_mass!r}", "re_z,im_z,re_c,im_c,radius"]
    for z, c, r in zip(measure.locations, measure.weights, disks.radii):
        lines.append(f"{z.real:.17g},{z.imag:.17g},{c.real:.17g},{c.imag:.17g},{r:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_atoms_csv(path: str | Path) -> tuple[AtomicMeasure, DiskSet]:
    kappa = KAPPA_MASS["4pi"]
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# kappa_mass:"):
            kappa = float(line.split(":", 1)[1])
        elif line.strip() and not line.startswith(("#", "re_z")):
            rows.append([float(v) for v in line.split(",")])
    arr = np.array(rows).reshape(-1, 5)
    z = arr[:, 0] + 1j * arr[:, 1]
    c = arr[:, 2] + 1j * arr[:, 3]
    return AtomicMeasure(z, c), DiskSet(z, arr[:, 4], kappa)
