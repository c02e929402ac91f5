"""Forward cavity problem and Dirichlet-to-Neumann operators.

The potential in the perforated domain is represented as a single layer on
all curves.  Unknowns are the densities and one constant per cavity; the
equations are the Dirichlet data on the outer curve, ``u = c_k`` on each
cavity and zero circulation of each cavity density (which is exactly the
zero-flux condition, because ``u`` is constant inside every cavity).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .errors import SingularSystem
from .geometry import BoundaryGrid, Scene, sample_grid
from .kernels import (
    BoundaryField,
    BoundaryOperator,
    assemble_adjoint_double_layer,
    assemble_single_layer,
)
from .traces import TraceSpace, lu_factor_checked


@dataclass(frozen=True, eq=False)
class CavitySolution:
    densities: BoundaryField
    constants: np.ndarray
    normal_derivative: np.ndarray


@dataclass(frozen=True, eq=False)
class DtnPair:
    """``Lambda_gamma``, ``Lambda_0`` and ``R = S (Lambda_gamma - Lambda_0)`` on the outer grid."""

    scene: Scene
    grid: BoundaryGrid
    outer_space: TraceSpace
    lambda_gamma: BoundaryOperator
    lambda_0: BoundaryOperator
    R: BoundaryOperator
    K_direct: BoundaryOperator | None = None
    noise_level: float = 0.0
    noise_seed: int | None = None

    @property
    def outer_grid(self) -> BoundaryGrid:
        return self.outer_space.grid


class ForwardSolver:
    """Assembled and factorized cavity problem for one scene and grid."""

    def __init__(self, scene: Scene, grid: BoundaryGrid):
        if grid.n_curves != 1 + len(scene.cavities):
            raise ValueError("grid must hold the outer curve followed by every cavity")
        self.scene = scene
        self.grid = grid
        self.outer_grid = grid.subgrid([0])
        self.n_cavities = len(scene.cavities)
        self.S = assemble_single_layer(grid, grid).matrix
        self.adjoint_outer = assemble_adjoint_double_layer(grid, self.outer_grid).matrix
        n, size = self.n_cavities, grid.size
        E = np.zeros((size, n))
        J = np.zeros((n, size))
        for k in range(n):
            sl = grid.slice(k + 1)
            E[sl, k] = -1.0
            J[k, sl] = grid.weights[sl]
        self._system = np.block([[self.S, E], [J, np.zeros((n, n))]])
        self._lu = lu_factor_checked(self._system, "cavity boundary-integral system")
        self._outer = grid.slice(0)

    def solve(self, f: np.ndarray):
        """Densities, cavity constants and outward normal derivative on the outer curve.

        ``f`` may be a vector of outer nodal values or a matrix of columns.
        """
        f = np.asarray(f)
        m = self.outer_grid.size
        rhs = np.zeros((self._system.shape[0],) + f.shape[1:], dtype=np.result_type(f, float))
        rhs[:m] = f
        sol = sla.lu_solve(self._lu, rhs)
        sigma, consts = sol[: self.grid.size], sol[self.grid.size:]
        res = np.abs(self._system @ sol - rhs).max()
        if res > 1e-9 * max(np.abs(f).max(), 1e-300):
            raise SingularSystem(f"cavity system residual {res:.2e}")
        # Outward normal derivative from inside: (1/2 - L*) on the outer
        # density, minus L* (smooth kernel) on the cavity densities.
        dn = 0.5 * sigma[: m] - self.adjoint_outer @ sigma
        return sigma, consts, dn

    def outer_single_layer(self) -> np.ndarray:
        return self.S[self._outer, self._outer]


def solve_cavity_problem(scene: Scene, grid: BoundaryGrid, f) -> CavitySolution:
    solver = ForwardSolver(scene, grid)
    values = f.values if isinstance(f, BoundaryField) else np.asarray(f)
    sigma, consts, dn = solver.solve(values)
    return CavitySolution(BoundaryField(grid, sigma), consts, dn)


def _boundary_interaction(solver: ForwardSolver, outer_space: TraceSpace):
    """Matrices of ``K_Gamma^gamma``, ``K_gamma^Gamma`` and the cavity trace space."""
    grid = solver.grid
    cav_ids = list(range(1, grid.n_curves))
    cav_grid = grid.subgrid(cav_ids)
    cav_idx = np.arange(grid.offsets[1], grid.size)
    out_idx = np.arange(0, grid.offsets[1])
    s_cc = solver.S[np.ix_(cav_idx, cav_idx)]
    s_co = solver.S[np.ix_(cav_idx, out_idx)]
    s_oc = solver.S[np.ix_(out_idx, cav_idx)]
    cav_space = TraceSpace(cav_grid, BoundaryOperator(cav_grid, cav_grid, s_cc))
    # K_Gamma^gamma q = Tr0_gamma(S_Gamma S_Gamma^{-1} q)
    k_out_to_cav = cav_space.projector() @ s_co @ outer_space.apply_inverse(np.eye(len(out_idx)))
    k_cav_to_out = outer_space.projector() @ s_oc @ cav_space.apply_inverse(np.eye(len(cav_idx)))
    return (BoundaryOperator(outer_space.grid, cav_grid, k_out_to_cav),
            BoundaryOperator(cav_grid, outer_space.grid, k_cav_to_out),
            cav_space)


def boundary_interaction(scene: Scene, grid: BoundaryGrid):
    """``(K_Gamma^gamma, K_gamma^Gamma, outer TraceSpace, cavity TraceSpace)``."""
    solver = ForwardSolver(scene, grid)
    outer_space = TraceSpace(solver.outer_grid,
                             BoundaryOperator(solver.outer_grid, solver.outer_grid, solver.outer_single_layer()))
    k1, k2, cav_space = _boundary_interaction(solver, outer_space)
    return k1, k2, outer_space, cav_space


def assemble_dtn(scene: Scene, grid: BoundaryGrid | None = None, *, nodes_per_curve=256,
                 with_k: bool = False) -> DtnPair:
    """Assemble ``Lambda_gamma``, ``Lambda_0`` and ``R`` column by column."""
    if grid is None:
        grid = sample_grid(scene, nodes_per_curve)
    solver = ForwardSolver(scene, grid)
    og = solver.outer_grid
    m = og.size
    s_oo = solver.outer_single_layer()
    outer_space = TraceSpace(og, BoundaryOperator(og, og, s_oo))

    _, _, lam_gamma = solver.solve(np.eye(m))
    self_adjoint = solver.adjoint_outer[:, :m]
    lam_0 = (0.5 * np.eye(m) - self_adjoint) @ outer_space.apply_inverse(np.eye(m))
    R = s_oo @ (lam_gamma - lam_0)

    k_direct = None
    if with_k and solver.n_cavities:
        k1, k2, _ = _boundary_interaction(solver, outer_space)
        k_direct = BoundaryOperator(og, og, k2.matrix @ k1.matrix)
    elif with_k:
        k_direct = BoundaryOperator(og, og, np.zeros((m, m)))
    return DtnPair(scene, grid, outer_space, BoundaryOperator(og, og, lam_gamma),
                   BoundaryOperator(og, og, lam_0), BoundaryOperator(og, og, R), k_direct)


def measured_interaction(dtn: DtnPair) -> np.ndarray:
    """``(Id + R)^{-1} R``, the boundary interaction operator recovered from data."""
    R = dtn.R.matrix
    lu = lu_factor_checked(np.eye(R.shape[0]) + R, "Id + R")
    return sla.lu_solve(lu, R)


def perturb_measurements(dtn: DtnPair, level: float, seed: int | None = 0) -> DtnPair:
    """Multiply every entry of ``R`` by ``1 + level * N(0, 1)``."""
    if level == 0.0:
        return replace(dtn, noise_level=0.0, noise_seed=seed)
    rng = np.random.default_rng(seed)
    R = dtn.R.matrix * (1.0 + level * rng.standard_normal(dtn.R.matrix.shape))
    return replace(dtn, R=BoundaryOperator(dtn.R.source, dtn.R.target, R),
                   noise_level=float(level), noise_seed=seed)


def adjoint_check(k_out_to_cav: BoundaryOperator, k_cav_to_out: BoundaryOperator,
                  outer_space: TraceSpace, cav_space: TraceSpace,
                  samples: int = 5, seed: int = 0, pairs=None) -> dict:
    """Compare ``<K_Gamma^gamma q, p>_gamma`` with ``<q, K_gamma^Gamma p>_Gamma``.

    ``pairs`` may supply explicit ``(q, p)`` traces; otherwise random
    projected traces are drawn.  Mismatches are scaled by
    ``|K q| |p|`` (Cauchy-Schwarz bound of either side).
    """
    if pairs is None:
        rng = np.random.default_rng(seed)
        pairs = []
        for _ in range(samples):
            q = rng.standard_normal(outer_space.grid.size) + 1j * rng.standard_normal(outer_space.grid.size)
            p = rng.standard_normal(cav_space.grid.size) + 1j * rng.standard_normal(cav_space.grid.size)
            pairs.append((outer_space.project_trace(q), cav_space.project_trace(p)))
    rows = []
    for q, p in pairs:
        kq = k_out_to_cav.matrix @ q
        lhs = cav_space.inner_half(kq, p)
        rhs = outer_space.inner_half(q, k_cav_to_out.matrix @ p)
        scale = np.sqrt(abs(cav_space.inner_half(kq, kq)) * abs(cav_space.inner_half(p, p)))
        rel = abs(lhs - rhs) / scale if scale > 0 else abs(lhs - rhs)
        rows.append({"lhs": lhs, "rhs": rhs, "mismatch": float(rel)})
    return {"pairs": rows, "max_mismatch": max((r["mismatch"] for r in rows), default=0.0)}


def write_matrix_csv(path: str | Path, matrix: np.ndarray, metadata: dict) -> None:
    """Row-major dump with ``# key: value`` header lines."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        for key, value in metadata.items():
            fh.write(f"# {key}: {value}\n")
        for row in np.asarray(matrix):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_matrix_csv(path: str | Path) -> tuple[np.ndarray, dict]:
    meta = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif line.strip():
            rows.append([float(v) for v in line.split(",")])
    return np.array(rows), meta
