"""Closed-form and series references for the moment measure.

* one simply connected cavity with exterior conformal map ``phi``:
  ``tau_m = 2 a1 / (m + 1) * int_0^{2 pi} e^{-it} phi(e^{it})^{m+1} dt``;
* two disjoint disks: an explicit infinite atomic measure built from
  image-charge sequences;
* small inclusions: the first-order asymptotic measure
  ``sum 2 pi (eps rho_i)^2 delta_{z_i}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from shapely.geometry import LinearRing

from .errors import DisksOverlap, OracleNotApplicable, SelfIntersectingMap
from .geometry import Circle, Curve, Ellipse, LaurentCurve, Scene
from .kernels import BoundaryField, evaluate_double_layer
from .moments import MomentSequence
from .prony import AtomicMeasure

SERIES_TOL = 1e-14
MAX_TERMS = 100_000


# -- single cavity: exterior conformal map --------------------------------

@dataclass(frozen=True)
class LaurentMap:
    """``phi(w) = a1 w + a0 + sum_k a_neg[k-1] w^{-k}`` with ``a1 > 0``."""

    a1: float
    a0: complex = 0.0
    a_neg: tuple[complex, ...] = ()

    def __post_init__(self):
        if not self.a1 > 0:
            raise SelfIntersectingMap("leading coefficient a1 must be positive")
        object.__setattr__(self, "a0", complex(self.a0))
        object.__setattr__(self, "a_neg", tuple(complex(a) for a in self.a_neg))

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        out = self.a1 * w + self.a0
        for k, a in enumerate(self.a_neg, start=1):
            out = out + a * w ** (-k)
        return out

    def validate(self, samples: int = 2048) -> None:
        w = np.exp(2j * math.pi * np.arange(samples) / samples)
        z = self(w)
        # phi'(w) != 0 on the circle and a simple image curve.
        dphi = self.a1 - sum(k * a * w ** (-k - 1) for k, a in enumerate(self.a_neg, start=1))
        if np.min(np.abs(dphi)) < 1e-12 * self.a1:
            raise SelfIntersectingMap("phi' vanishes on the unit circle")
        if not LinearRing(np.column_stack([z.real, z.imag])).is_simple:
            raise SelfIntersectingMap("image of the unit circle self-intersects")

    def transformed(self, scale: float, shift: complex) -> "LaurentMap":
        return LaurentMap(scale * self.a1, scale * self.a0 + shift,
                          tuple(scale * a for a in self.a_neg))

    @classmethod
    def from_curve(cls, curve: Curve) -> "LaurentMap":
        if isinstance(curve, Circle):
            return cls(curve.radius, curve.center)
        if isinstance(curve, Ellipse):
            a, b = curve.semi_axes
            rot = np.exp(2j * curve.rotation)
            return cls(0.5 * (a + b), curve.center, (0.5 * (a - b) * rot,))
        if isinstance(curve, LaurentCurve):
            return cls(curve.a1, curve.a0, curve.a_neg)
        raise OracleNotApplicable(
            f"no closed-form exterior map for a {curve.kind!r} curve")


def conformal_moments(phi: LaurentMap, m_max: int, *, nodes: int | None = None) -> MomentSequence:
    """``tau_0 .. tau_{m_max}`` of the cavity bounded by ``phi(|w| = 1)``.

    The integrand is a trigonometric polynomial of degree ``(m+1) K + 1``
    (``K`` the number of negative powers), so the trapezoid rule with more
    nodes than that degree is exact up to rounding.
    """
    phi.validate()
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    degree = (m_max + 1) * max(len(phi.a_neg), 1) + 2
    n = nodes or max(64, 2 * degree)
    t = 2.0 * math.pi * np.arange(n) / n
    w = np.exp(1j * t)
    z = phi(w)
    tau = np.empty(m_max + 1, dtype=complex)
    for m in range(m_max + 1):
        integral = np.mean(np.conj(w) * z ** (m + 1)) * 2.0 * math.pi
        tau[m] = 2.0 * phi.a1 * integral / (m + 1)
    return MomentSequence(tau, {"oracle": "conformal"})


# -- two disks --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TwoDiskSeries:
    """Image sequences for two disjoint disks.

    Index ``n`` of every array is the sequence index; ``kappa[0]`` is
    unused (the kappa sequences start at ``n = 1``); ``alpha[0]`` is the
    constant term of ``q_{j,0}``.
    """

    z1: complex
    rho1: float
    z2: complex
    rho2: float
    lam1: np.ndarray
    lam2: np.ndarray
    zs1: np.ndarray
    zs2: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    delta: float
    tail: float

    @property
    def rho(self) -> float:
        return abs(self.z1 - self.z2)

    @property
    def Lambda1(self) -> float:
        return (self.rho1 / self.rho) ** 2

    @property
    def Lambda2(self) -> float:
        return (self.rho2 / self.rho) ** 2

    @property
    def Lambda(self) -> float:
        l1, l2 = self.Lambda1, self.Lambda2
        return (l1 - l2) ** 2 + 1.0 - 2.0 * (l1 + l2)

    @property
    def n_terms(self) -> int:
        return len(self.lam1)

    def lambda_limits(self) -> tuple[float, float]:
        l1, l2, root = self.Lambda1, self.Lambda2, math.sqrt(self.Lambda)
        return 0.5 * (1 + l1 - l2 + root), 0.5 * (1 + l2 - l1 + root)

    def theoretical_delta(self) -> float:
        """Asymptotic ratio ``kappa_{n+2} / kappa_n`` (geometric rate per two steps)."""
        l1, l2 = self.Lambda1, self.Lambda2
        return 4.0 * l1 * l2 / (1.0 - l1 - l2 + math.sqrt(self.Lambda)) ** 2

    def density(self, j: int, n: int, z) -> np.ndarray:
        """``q_{j,n}(z)``: ``2 (z - z_j)`` for ``n = 0``, else ``kappa/(z - z_other) + alpha``."""
        z = np.asarray(z, dtype=complex)
        if n == 0:
            return 2.0 * (z - (self.z1 if j == 1 else self.z2))
        kappa, alpha, other = ((self.kappa1, self.alpha1, self.zs2) if j == 1
                               else (self.kappa2, self.alpha2, self.zs1))
        return kappa[n] / (z - other[n - 1]) + alpha[n]

    def limit_density(self, j: int, z) -> np.ndarray:
        """Partial sum of ``q_{j,2n} + conj(q_{j,2n+1})`` over all stored terms."""
        out = np.zeros(np.shape(z), dtype=complex)
        for n in range(0, self.n_terms - 1, 2):
            out += self.density(j, n, z) + np.conj(self.density(j, n + 1, z))
        return out


def _kappa_direct(rho_a, rho_b, d_conj, lam_self, lam_other, l1, l2, n_terms):
    """kappa_{a,n}: first two terms then the two-step recursion."""
    kappa = np.zeros(n_terms, dtype=complex)
    kappa[1] = 2.0 * rho_b**2
    if n_terms > 2:
        kappa[2] = -2.0 * (rho_a * rho_b) ** 2 / d_conj**2
    for n in range(1, n_terms - 2):
        kappa[n + 2] = l1 * l2 / (lam_other[n] * lam_self[n - 1]) ** 2 * kappa[n]
    return kappa


def build_two_disk_series(z1, rho1, z2, rho2, tol: float = SERIES_TOL) -> TwoDiskSeries:
    z1, z2 = complex(z1), complex(z2)
    rho1, rho2 = float(rho1), float(rho2)
    if rho1 <= 0 or rho2 <= 0:
        raise DisksOverlap("radii must be positive")
    rho = abs(z1 - z2)
    if not rho > rho1 + rho2:
        raise DisksOverlap(f"disks intersect: |z1 - z2| = {rho:.6g} <= rho1 + rho2 = {rho1 + rho2:.6g}")
    l1, l2 = (rho1 / rho) ** 2, (rho2 / rho) ** 2

    # Grow the lambda tables until the kappa terms drop below tol.
    n_terms = 16
    while True:
        lam1 = np.ones(n_terms)
        lam2 = np.ones(n_terms)
        for n in range(1, n_terms):
            lam1[n] = 1.0 - l2 / lam2[n - 1]
            lam2[n] = 1.0 - l1 / lam1[n - 1]
        kappa1 = _kappa_direct(rho1, rho2, np.conj(z2 - z1), lam1, lam2, l1, l2, n_terms)
        kappa2 = _kappa_direct(rho2, rho1, np.conj(z1 - z2), lam2, lam1, l1, l2, n_terms)
        size = np.abs(kappa1) + np.abs(kappa2)
        below = np.nonzero(size[1:] < tol)[0]
        if below.size and below[0] + 1 < n_terms - 2:
            # Keep an even number of terms past the cut so pairs (2n, 2n+1) close.
            n_keep = below[0] + 3
            n_keep += n_keep % 2
            break
        if n_terms > MAX_TERMS:
            raise DisksOverlap("two-disk series does not converge (disks nearly touching)")
        n_terms *= 2

    sl = slice(0, n_keep)
    lam1, lam2, kappa1, kappa2 = lam1[sl], lam2[sl], kappa1[sl], kappa2[sl]
    zs1 = (1.0 - lam2) * z2 + lam2 * z1
    zs2 = (1.0 - lam1) * z1 + lam1 * z2
    alpha1 = np.zeros(n_keep, dtype=complex)
    alpha2 = np.zeros(n_keep, dtype=complex)
    # Constant part of q_{j,0} = 2 (z - z_j).
    alpha1[0], alpha2[0] = -2.0 * z1, -2.0 * z2
    alpha1[1:] = -0.5 * kappa1[1:] / (lam1[:-1] * (z1 - z2))
    alpha2[1:] = -0.5 * kappa2[1:] / (lam2[:-1] * (z2 - z1))

    size = np.abs(kappa1[1:]) + np.abs(kappa2[1:])
    delta, tail = _fit_decay(size)
    return TwoDiskSeries(z1, rho1, z2, rho2, lam1, lam2, zs1, zs2, kappa1, kappa2,
                         alpha1, alpha2, delta, tail)


def _fit_decay(size: np.ndarray) -> tuple[float, float]:
    """Per-index geometric rate of ``size`` (log-linear fit) and a tail bound."""
    n = np.arange(1, len(size) + 1)
    mask = size > 0
    if mask.sum() < 2:
        return 0.0, 0.0
    slope, _ = np.polyfit(n[mask], np.log(size[mask]), 1)
    delta = float(math.exp(slope))
    last = size[mask][-1]
    tail = float(last * delta / (1.0 - delta)) if delta < 1 else math.inf
    return delta, tail


def kappa_ratio_form(series: TwoDiskSeries) -> np.ndarray:
    """kappa_{1,n} from the alternative two-step ratio ``Lambda1 Lambda2 / (lambda_{1,n-1} - Lambda1)^2``."""
    l1, l2 = series.Lambda1, series.Lambda2
    k = np.zeros_like(series.kappa1)
    k[1:3] = series.kappa1[1:3]
    for n in range(1, len(k) - 2):
        k[n + 2] = l1 * l2 / (series.lam1[n - 1] - l1) ** 2 * k[n]
    return k


def kappa_cross_form(series: TwoDiskSeries) -> np.ndarray:
    """kappa_{1,n} obtained by applying the 1 <-> 2 conjugate cross relation twice."""
    d12 = np.conj(series.z2 - series.z1)
    d21 = np.conj(series.z1 - series.z2)
    k1 = np.zeros_like(series.kappa1)
    k1[1] = series.kappa1[1]
    k1[2] = -series.rho2**2 / (d12**2 * series.lam2[0] ** 2) * np.conj(series.kappa2[1])
    for n in range(1, len(k1) - 2):
        k2 = -series.rho1**2 / (d21**2 * series.lam1[n - 1] ** 2) * np.conj(k1[n])
        k1[n + 2] = -series.rho2**2 / (d12**2 * series.lam2[n] ** 2) * np.conj(k2)
    return k1


def two_disk_measure(series: TwoDiskSeries, tol: float = SERIES_TOL) -> AtomicMeasure:
    """Atoms ``(z_{1,2n}, 2 pi kappa_{2,2n+1})`` then ``(z_{2,2n}, 2 pi kappa_{1,2n+1})``."""
    locs, weights = [], []
    for zs, kappa in ((series.zs1, series.kappa2), (series.zs2, series.kappa1)):
        for n in range(0, series.n_terms - 1, 2):
            c = 2.0 * math.pi * kappa[n + 1]
            if n > 0 and abs(c) < tol:
                break
            locs.append(zs[n])
            weights.append(c)
    return AtomicMeasure(np.array(locs), np.array(weights), len(locs), len(locs))


def two_disk_double_layer(series: TwoDiskSeries, grid, points) -> np.ndarray:
    """``D_{gamma1} q1 + D_{gamma2} q2`` at ``points`` using the series densities on ``grid``.

    ``grid`` must hold the two circles in the order (disk 1, disk 2); the
    result should equal ``xi - z_j`` inside disk ``j``.
    """
    values = np.concatenate([series.limit_density(1, grid.points[grid.slice(0)]),
                             series.limit_density(2, grid.points[grid.slice(1)])])
    return evaluate_double_layer(BoundaryField(grid, values), points)


def write_series_csv(path: str | Path, series: TwoDiskSeries) -> None:
    header = ("n,lambda1,lambda2,re_z1n,im_z1n,re_z2n,im_z2n,re_kappa1,im_kappa1,"
              "re_kappa2,im_kappa2,re_alpha1,im_alpha1,re_alpha2,im_alpha2")
    lines = [f"# delta: {series.delta!r}", f"# tail: {series.tail!r}", header]
    for n in range(series.n_terms):
        vals = [series.lam1[n], series.lam2[n], series.zs1[n].real, series.zs1[n].imag,
                series.zs2[n].real, series.zs2[n].imag,
                series.kappa1[n].real, series.kappa1[n].imag,
                series.kappa2[n].real, series.kappa2[n].imag,
                series.alpha1[n].real, series.alpha1[n].imag,
                series.alpha2[n].real, series.alpha2[n].imag]
        lines.append(f"{n}," + ",".join(f"{v:.17g}" for v in vals))
    Path(path).write_text("\n".join(lines) + "\n")


# -- small inclusions ---------------------------------------------------------

def small_inclusion_measure(centers, radii, eps: float = 1.0, *,
                            mass_constant: float = 2.0 * math.pi) -> AtomicMeasure:
    """Asymptotic measure ``sum mass_constant (eps rho_i)^2 delta_{z_i}``.

    The default constant is the first-order asymptotic one; an exact disk
    carries ``4 pi rho^2`` in the pairing used here, see the README.
    """
    centers = np.atleast_1d(np.asarray(centers, dtype=complex))
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if eps == 0:
        return AtomicMeasure(np.zeros(0), np.zeros(0))
    weights = mass_constant * (eps * radii) ** 2
    return AtomicMeasure(centers, weights.astype(complex), len(centers), len(centers))


# -- dispatch -----------------------------------------------------------------

def scene_oracle_kind(scene: Scene) -> str:
    """``"conformal"``, ``"two_disk"`` or raise :class:`OracleNotApplicable`."""
    cav = scene.cavities
    if len(cav) == 1:
        try:
            LaurentMap.from_curve(cav[0])
        except OracleNotApplicable:
            raise OracleNotApplicable(
                f"no closed-form exterior conformal map for a {cav[0].kind!r} cavity; "
                "the atomic-measure representation for general shapes is an open "
                "conjecture, so there is no reference to compare against") from None
        return "conformal"
    if len(cav) == 2 and all(isinstance(c, Circle) for c in cav):
        return "two_disk"
    raise OracleNotApplicable(
        "reference moments exist only for one cavity with a known conformal map "
        "or for two disks; the general case is an open conjecture")


def oracle_moments(scene: Scene, count: int) -> MomentSequence:
    """Reference ``tau_0 .. tau_{count-1}`` in the scene's (rescaled) frame."""
    kind = scene_oracle_kind(scene)
    if kind == "conformal":
        return conformal_moments(LaurentMap.from_curve(scene.cavities[0]), count - 1)
    c1, c2 = scene.cavities
    series = build_two_disk_series(c1.center, c1.radius, c2.center, c2.radius)
    return MomentSequence(two_disk_measure(series).moments(count), {"oracle": "two_disk"})
