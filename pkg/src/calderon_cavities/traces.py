"""Trace-space calculus on a (possibly multiply connected) boundary.

A :class:`TraceSpace` owns the single-layer matrix of a grid, its LU
factorization, and the equilibrium densities; it provides the projections
onto zero-circulation densities and onto the matching trace space, and the
hermitian ``H^{1/2}`` pairing ``<p, q> = int (S^{-1} p) conj(q) ds``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import SingularSystem, UnprojectedTrace
from .geometry import BoundaryGrid
from .kernels import BoundaryField, BoundaryOperator, assemble_single_layer

RCOND_MIN = 1e-13


def lu_factor_checked(matrix: np.ndarray, what: str = "system"):
    """LU factorization that raises :class:`SingularSystem` on rcond < 1e-13."""
    matrix = np.asarray(matrix)
    if not np.all(np.isfinite(matrix)):
        raise SingularSystem(f"{what}: matrix has non-finite entries")
    lu, piv = sla.lu_factor(matrix, check_finite=False)
    gecon, = sla.get_lapack_funcs(("gecon",), (lu,))
    anorm = np.linalg.norm(matrix, 1)
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or not rcond > RCOND_MIN:
        raise SingularSystem(
            f"{what} is numerically singular (rcond={rcond:.2e}); if this is a "
            "single-layer system, rescale the geometry so its diameter is < 1")
    return lu, piv


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, BoundaryField) else np.asarray(x)


@dataclass(frozen=True, eq=False)
class EquilibriumBasis:
    """Equilibrium densities ``psi[k]`` and the constants ``phi[k, l]`` of ``S psi[k]`` on curve ``l``."""

    grid: BoundaryGrid
    densities: np.ndarray
    constants: np.ndarray


class TraceSpace:
    def __init__(self, grid: BoundaryGrid, single_layer: BoundaryOperator | None = None):
        self.grid = grid
        self.S = single_layer if single_layer is not None else assemble_single_layer(grid, grid)
        self._lu = lu_factor_checked(self.S.matrix, "single-layer operator")
        n, size = grid.n_curves, grid.size
        # E maps per-curve constants to nodal values; J takes circulations.
        self._E = np.zeros((size, n))
        self._J = np.zeros((n, size))
        for k in range(n):
            sl = grid.slice(k)
            self._E[sl, k] = 1.0
            self._J[k, sl] = grid.weights[sl]
        aug = np.block([[self.S.matrix, self._E], [self._J, np.zeros((n, n))]])
        self._aug_lu = lu_factor_checked(aug, "augmented single-layer system")
        self.basis = self._equilibrium_basis()

    def _equilibrium_basis(self) -> EquilibriumBasis:
        n = self.grid.n_curves
        rhs = np.vstack([np.zeros((self.grid.size, n)), np.eye(n)])
        sol = sla.lu_solve(self._aug_lu, rhs)
        densities = sol[: self.grid.size].T.copy()
        constants = -sol[self.grid.size:].T.copy()
        if np.linalg.cond(constants) > 1e12:
            raise SingularSystem("equilibrium constants matrix is singular (capacity close to 1?)")
        return EquilibriumBasis(self.grid, densities, constants)

    # -- basic solves -------------------------------------------------

    def solve_augmented(self, f, b=None) -> tuple[np.ndarray, np.ndarray]:
        """Solve ``S q + c = f`` on each curve with circulations ``b``."""
        f = _values(f)
        n = self.grid.n_curves
        b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
        dtype = np.result_type(f.dtype, float)
        rhs = np.concatenate([f.astype(dtype), b.astype(dtype)])
        sol = sla.lu_solve(self._aug_lu, rhs)
        qhat, c = sol[: self.grid.size], sol[self.grid.size:]
        aug_res = np.abs(self.S.matrix @ qhat + self._E @ c - f).max()
        scale = max(np.abs(f).max(), np.abs(b).max() if b.size else 0.0, 1e-300)
        if aug_res > 1e-8 * scale:
            raise SingularSystem(f"augmented solve residual {aug_res:.2e} too large")
        return qhat, c

    def apply_inverse(self, p) -> np.ndarray:
        return sla.lu_solve(self._lu, _values(p))

    def circulations(self, qhat) -> np.ndarray:
        return self._J @ _values(qhat)

    def pairing(self, qhat, q) -> complex:
        """Duality bracket ``int qhat q ds`` (bilinear)."""
        return complex(np.sum(_values(qhat) * _values(q) * self.grid.weights))

    # -- projections --------------------------------------------------

    def project_hat(self, qhat) -> np.ndarray:
        qhat = _values(qhat)
        return qhat - self.circulations(qhat) @ self.basis.densities

    def project_trace(self, q) -> np.ndarray:
        q = _values(q)
        coeffs = self.basis.densities @ (q * self.grid.weights)
        return q - self._E @ coeffs

    def trace0(self, values: np.ndarray | Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Projected trace of a function given by nodal values or as a callable of ``z``."""
        if callable(values):
            values = values(self.grid.points)
        return self.project_trace(np.asarray(values))

    def projection_defect(self, q) -> float:
        """Relative size of ``<psi_k, q>``; zero for traces in the projected space."""
        q = _values(q)
        c = self.basis.densities @ (q * self.grid.weights)
        return float(np.abs(c).max() / max(np.abs(q).max(), 1e-300))

    def _ensure_projected(self, q, tol=1e-6):
        q = _values(q)
        if self.projection_defect(q) > tol:
            warnings.warn("trace is not in the projected space; projecting it first",
                          UnprojectedTrace, stacklevel=3)
        return self.project_trace(q)

    # -- inner products -----------------------------------------------

    def inner_half(self, p, q) -> complex:
        """Hermitian ``<p, q>_{1/2}``, linear in ``p`` and conjugate-linear in ``q``."""
        p = self._ensure_projected(p)
        q = self._ensure_projected(q)
        phat = self.apply_inverse(p)
        return complex(np.sum(phat * np.conj(q) * self.grid.weights))

    def gram(self) -> np.ndarray:
        """Matrix ``G`` with ``<p, q>_{1/2} = p^T G conj(q)`` on projected traces."""
        inv = sla.lu_solve(self._lu, np.eye(self.grid.size))
        return inv.T * self.grid.weights[None, :]

    def projector(self) -> np.ndarray:
        """Matrix of ``project_trace``."""
        return np.eye(self.grid.size) - self._E @ (self.basis.densities * self.grid.weights[None, :])

    def operator_norm(self, op: np.ndarray) -> float:
        """Norm of ``op`` on projected traces, measured with ``<.,.>_{1/2}``."""
        u, s, _ = np.linalg.svd(self.projector())
        basis = u[:, s > 0.5]
        g = self.gram()
        h = basis.T @ (0.5 * (g + g.T)) @ basis
        c = np.linalg.cholesky(h)
        a = basis.T @ np.asarray(op) @ basis
        return float(np.linalg.norm(c.T @ a @ np.linalg.inv(c.T), 2))


def solve_augmented_system(grid: BoundaryGrid, f, b=None) -> tuple[np.ndarray, np.ndarray]:
    return TraceSpace(grid).solve_augmented(f, b)


def compute_equilibrium_basis(grid: BoundaryGrid) -> EquilibriumBasis:
    return TraceSpace(grid).basis
