"""Nystrom discretizations of the 2-D Laplace layer potentials.

Fundamental solution ``G(x) = -log|x| / (2 pi)``.

Sign convention for the double layer and its adjoint: the normal used in
the kernels points *into* the region enclosed by each (counter-clockwise)
curve, i.e. ``n = -grid.normals``.  With this choice

* ``D 1 = 1`` inside a curve and ``0`` outside;
* ``D q = (C q + conj(C conj(q))) / 2`` off the curve, ``C`` the Cauchy
  transform over the counter-clockwise contour;
* interior traces: ``D q -> (1/2 + L) q`` and ``d_n S q -> (-1/2 + L*) q``;
  exterior traces: ``D q -> (-1/2 + L) q`` and ``d_n S q -> (1/2 + L*) q``.

Self-interaction blocks of the single layer use the Kress product rule
for the logarithmic singularity; everything else is the plain trapezoid
rule, which is spectrally accurate for smooth periodic integrands.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import PointTooCloseToBoundary
from .geometry import BoundaryGrid, sample_curves

INV_2PI = 1.0 / (2.0 * math.pi)
INV_4PI = 1.0 / (4.0 * math.pi)


@dataclass(frozen=True, eq=False)
class BoundaryField:
    """Complex nodal values on a grid."""

    grid: BoundaryGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.grid.size,):
            raise ValueError(f"field has {values.shape} values, grid has {self.grid.size} nodes")
        object.__setattr__(self, "values", values)

    def on_curve(self, k: int) -> np.ndarray:
        return self.values[self.grid.slice(k)]


@dataclass(frozen=True, eq=False)
class BoundaryOperator:
    """Dense matrix acting on nodal values (quadrature weights folded in)."""

    source: BoundaryGrid
    target: BoundaryGrid
    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.shape != (self.target.size, self.source.size):
            raise ValueError("operator shape does not match its grids")

    def __matmul__(self, other):
        if isinstance(other, BoundaryField):
            return BoundaryField(self.target, self.matrix @ other.values)
        return self.matrix @ other

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def _same_curve(src: BoundaryGrid, a: int, tgt: BoundaryGrid, b: int) -> bool:
    return (src.counts[a] == tgt.counts[b]
            and src.curves[a] == tgt.curves[b]
            and np.array_equal(src.t[src.slice(a)], tgt.t[tgt.slice(b)]))


def kress_log_weights(m: int) -> np.ndarray:
    """Weights ``R_k`` with ``int log(4 sin^2((t_i - s)/2)) f(s) ds ~ sum_j R_{i-j} f_j``.

    Exact for trigonometric polynomials of degree < m/2 (m even).
    """
    n = m // 2
    tk = 2.0 * math.pi * np.arange(m) / m
    j = np.arange(1, n)
    r = -(2.0 * math.pi / n) * (np.cos(np.outer(tk, j)) / j).sum(axis=1)
    return r - (math.pi / n**2) * np.cos(n * tk)


def upsample_field(field: BoundaryField, factor: int) -> BoundaryField:
    """Trigonometric interpolation of a field onto a grid ``factor`` times finer.

    Shared nodes keep their values; useful for evaluating potentials
    closer to the curves than the original grid allows.
    """
    grid = field.grid
    fine = sample_curves(grid.curves, [factor * m for m in grid.counts])
    out = np.empty(fine.size, dtype=np.result_type(field.values, complex))
    for k, m in enumerate(grid.counts):
        coef = np.fft.fft(field.values[grid.slice(k)])
        padded = np.zeros(factor * m, dtype=complex)
        half = m // 2
        padded[:half] = coef[:half]
        padded[-half + 1:] = coef[-half + 1:]
        # Split the Nyquist mode symmetrically so real data stays real.
        padded[half] = 0.5 * coef[half]
        padded[-half] = 0.5 * coef[half]
        out[fine.slice(k)] = np.fft.ifft(padded) * factor
    if not np.iscomplexobj(field.values):
        out = out.real
    return BoundaryField(fine, out)


def _single_layer_self(grid: BoundaryGrid, k: int) -> np.ndarray:
    sl = grid.slice(k)
    m = grid.counts[k]
    z = grid.points[sl]
    t = grid.t[sl]
    speed = grid.speed[sl]
    i, j = np.indices((m, m))
    rk = kress_log_weights(m)[(i - j) % m]
    diff = t[:, None] - t[None, :]
    sin2 = 4.0 * np.sin(0.5 * diff) ** 2
    np.fill_diagonal(sin2, 1.0)
    dist2 = np.abs(z[:, None] - z[None, :]) ** 2
    np.fill_diagonal(dist2, 1.0)
    smooth = np.log(dist2 / sin2)
    np.fill_diagonal(smooth, np.log(speed**2))
    return -INV_4PI * (rk + (2.0 * math.pi / m) * smooth) * speed[None, :]


def assemble_single_layer(src: BoundaryGrid, tgt: BoundaryGrid) -> BoundaryOperator:
    """Single-layer trace operator ``(S q)(x) = int G(x - y) q(y) ds_y``."""
    diff = tgt.points[:, None] - src.points[None, :]
    with np.errstate(divide="ignore"):
        mat = -INV_4PI * np.log(np.abs(diff) ** 2) * src.weights[None, :]
    for a in range(src.n_curves):
        for b in range(tgt.n_curves):
            if _same_curve(src, a, tgt, b):
                mat[tgt.slice(b), src.slice(a)] = _single_layer_self(src, a)
    return BoundaryOperator(src, tgt, mat)


def _fill_self_diagonal(mat, src, tgt):
    for a in range(src.n_curves):
        for b in range(tgt.n_curves):
            if _same_curve(src, a, tgt, b):
                rows = np.arange(tgt.offsets[b], tgt.offsets[b + 1])
                cols = np.arange(src.offsets[a], src.offsets[a + 1])
                mat[rows, cols] = INV_4PI * src.curvature[cols] * src.weights[cols]


def assemble_double_layer(src: BoundaryGrid, tgt: BoundaryGrid) -> BoundaryOperator:
    """``(L q)(x) = int d_{n_y} G(x - y) q(y) ds_y`` (principal value on the curve)."""
    diff = src.points[None, :] - tgt.points[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ker = INV_2PI * np.real(diff * np.conj(src.normals)[None, :]) / np.abs(diff) ** 2
    mat = ker * src.weights[None, :]
    _fill_self_diagonal(mat, src, tgt)
    return BoundaryOperator(src, tgt, mat)


def assemble_adjoint_double_layer(src: BoundaryGrid, tgt: BoundaryGrid) -> BoundaryOperator:
    """``(L* q)(x) = int d_{n_x} G(x - y) q(y) ds_y`` (principal value on the curve)."""
    diff = tgt.points[:, None] - src.points[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ker = INV_2PI * np.real(diff * np.conj(tgt.normals)[:, None]) / np.abs(diff) ** 2
    mat = ker * src.weights[None, :]
    _fill_self_diagonal(mat, src, tgt)
    return BoundaryOperator(src, tgt, mat)


def _check_distance(grid: BoundaryGrid, points: np.ndarray) -> None:
    if points.size == 0 or grid.size == 0:
        return
    for k in range(grid.n_curves):
        z = grid.points[grid.slice(k)]
        dmin = np.abs(points[:, None] - z[None, :]).min()
        if dmin < 3.0 * grid.spacing(k):
            warnings.warn(
                f"evaluation point at distance {dmin:.3g} from curve {k} "
                f"(< 3 grid spacings); accuracy is not guaranteed",
                PointTooCloseToBoundary, stacklevel=3)
            return


def _density(density):
    if not isinstance(density, BoundaryField):
        raise TypeError("density must be a BoundaryField")
    return density.grid, density.values


def evaluate_single_layer(density: BoundaryField, points) -> np.ndarray:
    grid, q = _density(density)
    z = np.atleast_1d(np.asarray(points, dtype=complex))
    _check_distance(grid, z)
    dist = np.abs(z[:, None] - grid.points[None, :])
    return (-INV_2PI * np.log(dist)) @ (q * grid.weights)


def evaluate_single_layer_gradient(density: BoundaryField, points) -> np.ndarray:
    """Gradient of the single layer as an ``(npts, 2)`` array (x and y parts)."""
    grid, q = _density(density)
    z = np.atleast_1d(np.asarray(points, dtype=complex))
    _check_distance(grid, z)
    diff = z[:, None] - grid.points[None, :]
    r2 = np.abs(diff) ** 2
    qw = q * grid.weights
    gx = (-INV_2PI * diff.real / r2) @ qw
    gy = (-INV_2PI * diff.imag / r2) @ qw
    return np.column_stack([gx, gy])


def evaluate_double_layer(density: BoundaryField, points) -> np.ndarray:
    grid, q = _density(density)
    z = np.atleast_1d(np.asarray(points, dtype=complex))
    _check_distance(grid, z)
    diff = grid.points[None, :] - z[:, None]
    ker = INV_2PI * np.real(diff * np.conj(grid.normals)[None, :]) / np.abs(diff) ** 2
    return ker @ (q * grid.weights)


def cauchy_transform(density: BoundaryField, points) -> np.ndarray:
    """``(1 / 2 pi i) closed-integral q(zeta) / (zeta - z) dzeta`` by the trapezoid rule."""
    grid, q = _density(density)
    z = np.atleast_1d(np.asarray(points, dtype=complex))
    _check_distance(grid, z)
    dt = np.concatenate([np.full(m, 2.0 * math.pi / m) for m in grid.counts])
    dzeta = grid.tangents * dt
    return (1.0 / (grid.points[None, :] - z[:, None])) @ (q * dzeta) / (2j * math.pi)
