"""Closed curves, cavity scenes and their trapezoidal boundary grids.

Points of the plane are complex numbers throughout.  Every curve is
parameterized counter-clockwise over ``t in [0, 2*pi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from shapely.geometry import LinearRing, Polygon

from .errors import (
    CavityTouchesOuter,
    InvalidCurveParameters,
    OddNodeCount,
    OverlappingCavities,
    SelfIntersectingMap,
)

TWO_PI = 2.0 * math.pi

# Sampling density used by validation checks (not by the quadrature).
_CHECK_SAMPLES = 1024


def _as_complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise InvalidCurveParameters(f"expected [re, im], got {value!r}")
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise InvalidCurveParameters(f"{name} must be positive, got {value!r}")
    return value


class Curve:
    """Base class of the smooth closed curves.

    Subclasses provide ``position``, ``derivative`` and
    ``second_derivative`` as vectorized functions of the parameter, plus
    ``transformed(scale, shift)`` for the map ``z -> scale*z + shift``.
    """

    kind: str = ""

    def position(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def second_derivative(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def transformed(self, scale: float, shift: complex) -> "Curve":
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def curvature(self, t: np.ndarray) -> np.ndarray:
        d1 = self.derivative(t)
        d2 = self.second_derivative(t)
        return np.imag(np.conj(d1) * d2) / np.abs(d1) ** 3

    def polygon(self, samples: int = _CHECK_SAMPLES) -> np.ndarray:
        t = TWO_PI * (np.arange(samples) / samples)
        return self.position(t)

    def signed_area(self, samples: int = 256) -> float:
        """Shoelace quadrature of ``1/2 * closed integral (x dy - y dx)``."""
        t = TWO_PI * (np.arange(samples) / samples)
        z = self.position(t)
        dz = self.derivative(t)
        return 0.5 * float(np.sum(np.imag(np.conj(z) * dz))) * TWO_PI / samples

    def validate(self) -> None:
        """Check the curve is simple, counter-clockwise and regular."""
        t = TWO_PI * (np.arange(_CHECK_SAMPLES) / _CHECK_SAMPLES)
        speed = np.abs(self.derivative(t))
        if not np.all(np.isfinite(speed)) or speed.min() <= 1e-12 * max(speed.max(), 1e-300):
            raise InvalidCurveParameters(f"{self.kind}: parameterization is not regular")
        z = self.position(t)
        ring = LinearRing(np.column_stack([z.real, z.imag]))
        if not ring.is_simple:
            err = SelfIntersectingMap if self.kind == "laurent_map" else InvalidCurveParameters
            raise err(f"{self.kind}: curve self-intersects")
        if self.signed_area() <= 0.0:
            raise InvalidCurveParameters(f"{self.kind}: curve is not counter-clockwise")


@dataclass(frozen=True)
class Circle(Curve):
    center: complex
    radius: float
    kind = "circle"

    def __post_init__(self):
        object.__setattr__(self, "center", _as_complex(self.center))
        object.__setattr__(self, "radius", _positive("radius", self.radius))

    def position(self, t):
        return self.center + self.radius * np.exp(1j * t)

    def derivative(self, t):
        return 1j * self.radius * np.exp(1j * t)

    def second_derivative(self, t):
        return -self.radius * np.exp(1j * t)

    def transformed(self, scale, shift):
        return Circle(scale * self.center + shift, scale * self.radius)

    def to_dict(self):
        return {"kind": self.kind, "center": [self.center.real, self.center.imag],
                "radius": self.radius}


@dataclass(frozen=True)
class Ellipse(Curve):
    center: complex
    semi_axes: tuple[float, float]
    rotation: float = 0.0
    kind = "ellipse"

    def __post_init__(self):
        a, b = self.semi_axes
        object.__setattr__(self, "center", _as_complex(self.center))
        object.__setattr__(self, "semi_axes", (_positive("semi-axis", a), _positive("semi-axis", b)))
        object.__setattr__(self, "rotation", float(self.rotation))

    def _rot(self):
        return np.exp(1j * self.rotation)

    def position(self, t):
        a, b = self.semi_axes
        return self.center + self._rot() * (a * np.cos(t) + 1j * b * np.sin(t))

    def derivative(self, t):
        a, b = self.semi_axes
        return self._rot() * (-a * np.sin(t) + 1j * b * np.cos(t))

    def second_derivative(self, t):
        a, b = self.semi_axes
        return -self._rot() * (a * np.cos(t) + 1j * b * np.sin(t))

    def transformed(self, scale, shift):
        a, b = self.semi_axes
        return Ellipse(scale * self.center + shift, (scale * a, scale * b), self.rotation)

    def to_dict(self):
        return {"kind": self.kind, "center": [self.center.real, self.center.imag],
                "semi_axes": list(self.semi_axes), "rotation": self.rotation}


@dataclass(frozen=True)
class RoundedRectangle(Curve):
    """Four segments joined by quarter circles, parameterized by arclength.

    The curve is C^{1,1}: curvature jumps between 0 and ``1/corner_radius``
    at the joints.  ``corner_radius=None`` selects 10% of the shorter side.
    """

    center: complex
    width: float
    height: float
    corner_radius: float | None = None
    rotation: float = 0.0
    kind = "rounded_rectangle"

    def __post_init__(self):
        object.__setattr__(self, "center", _as_complex(self.center))
        w = _positive("width", self.width)
        h = _positive("height", self.height)
        r = 0.1 * min(w, h) if self.corner_radius is None else _positive("corner_radius", self.corner_radius)
        if r > 0.5 * min(w, h):
            raise InvalidCurveParameters("corner_radius exceeds half the shorter side")
        object.__setattr__(self, "width", w)
        object.__setattr__(self, "height", h)
        object.__setattr__(self, "corner_radius", r)
        object.__setattr__(self, "rotation", float(self.rotation))

    @property
    def perimeter(self) -> float:
        r = self.corner_radius
        return 2 * (self.width - 2 * r) + 2 * (self.height - 2 * r) + TWO_PI * r

    def _pieces(self):
        # (length, kind, data) walked counter-clockwise from the middle of
        # the right edge.  Lines carry (start, unit tangent); arcs carry
        # (center, start angle).
        hw, hh, r = self.width / 2, self.height / 2, self.corner_radius
        ev, eh = hh - r, hw - r
        arc = 0.5 * math.pi * r
        return [
            (ev, "line", (complex(hw, 0.0), 1j)),
            (arc, "arc", (complex(eh, ev), 0.0)),
            (2 * eh, "line", (complex(eh, hh), -1.0)),
            (arc, "arc", (complex(-eh, ev), 0.5 * math.pi)),
            (2 * ev, "line", (complex(-hw, ev), -1j)),
            (arc, "arc", (complex(-eh, -ev), math.pi)),
            (2 * eh, "line", (complex(-eh, -hh), 1.0)),
            (arc, "arc", (complex(eh, -ev), 1.5 * math.pi)),
            (ev, "line", (complex(hw, -ev), 1j)),
        ]

    def _local(self, t, order):
        t = np.asarray(t, dtype=float)
        L = self.perimeter
        s = np.mod(t, TWO_PI) * (L / TWO_PI)
        r = self.corner_radius
        out = np.zeros(s.shape, dtype=complex)
        start = 0.0
        pieces = self._pieces()
        for idx, (length, kind, data) in enumerate(pieces):
            last = idx == len(pieces) - 1
            mask = (s >= start) & ((s < start + length) | last)
            if length == 0.0 or not np.any(mask):
                start += length
                continue
            u = s[mask] - start
            if kind == "line":
                p0, tangent = data
                if order == 0:
                    out[mask] = p0 + u * tangent
                elif order == 1:
                    out[mask] = tangent
                else:
                    out[mask] = 0.0
            else:
                c, a0 = data
                ang = a0 + u / r
                e = np.exp(1j * ang)
                if order == 0:
                    out[mask] = c + r * e
                elif order == 1:
                    out[mask] = 1j * e
                else:
                    out[mask] = -e / r
            start += length
        scale = (L / TWO_PI) ** order
        rot = np.exp(1j * self.rotation)
        if order == 0:
            return self.center + rot * out
        return rot * out * scale

    def position(self, t):
        return self._local(t, 0)

    def derivative(self, t):
        return self._local(t, 1)

    def second_derivative(self, t):
        return self._local(t, 2)

    def transformed(self, scale, shift):
        return RoundedRectangle(scale * self.center + shift, scale * self.width,
                                scale * self.height, scale * self.corner_radius, self.rotation)

    def to_dict(self):
        return {"kind": self.kind, "center": [self.center.real, self.center.imag],
                "width": self.width, "height": self.height,
                "corner_radius": self.corner_radius, "rotation": self.rotation}


@dataclass(frozen=True)
class TrigPolynomial(Curve):
    """Star-shaped curve ``center + e^{i rot} r(t) e^{it}``.

    ``r(t) = r0 + sum_k cos_coeffs[k-1] cos(k t) + sin_coeffs[k-1] sin(k t)``.
    """

    center: complex
    r0: float
    cos_coeffs: tuple[float, ...] = ()
    sin_coeffs: tuple[float, ...] = ()
    rotation: float = 0.0
    kind = "trig_polynomial"

    def __post_init__(self):
        object.__setattr__(self, "center", _as_complex(self.center))
        object.__setattr__(self, "r0", _positive("r0", self.r0))
        object.__setattr__(self, "cos_coeffs", tuple(float(c) for c in self.cos_coeffs))
        object.__setattr__(self, "sin_coeffs", tuple(float(c) for c in self.sin_coeffs))
        object.__setattr__(self, "rotation", float(self.rotation))
        t = TWO_PI * (np.arange(_CHECK_SAMPLES) / _CHECK_SAMPLES)
        if self._radius(t, 0).min() <= 0.0:
            raise InvalidCurveParameters("trig_polynomial radius must stay positive")

    def _radius(self, t, order):
        t = np.asarray(t, dtype=float)
        r = np.full(t.shape, self.r0 if order == 0 else 0.0)
        for k, a in enumerate(self.cos_coeffs, start=1):
            r = r + a * k**order * np.cos(k * t + order * math.pi / 2)
        for k, b in enumerate(self.sin_coeffs, start=1):
            r = r + b * k**order * np.sin(k * t + order * math.pi / 2)
        return r

    def position(self, t):
        return self.center + np.exp(1j * self.rotation) * self._radius(t, 0) * np.exp(1j * t)

    def derivative(self, t):
        r, r1 = self._radius(t, 0), self._radius(t, 1)
        return np.exp(1j * self.rotation) * (r1 + 1j * r) * np.exp(1j * t)

    def second_derivative(self, t):
        r, r1, r2 = self._radius(t, 0), self._radius(t, 1), self._radius(t, 2)
        return np.exp(1j * self.rotation) * (r2 + 2j * r1 - r) * np.exp(1j * t)

    def transformed(self, scale, shift):
        return TrigPolynomial(scale * self.center + shift, scale * self.r0,
                              tuple(scale * c for c in self.cos_coeffs),
                              tuple(scale * c for c in self.sin_coeffs), self.rotation)

    def to_dict(self):
        return {"kind": self.kind, "center": [self.center.real, self.center.imag],
                "r0": self.r0, "cos": list(self.cos_coeffs), "sin": list(self.sin_coeffs),
                "rotation": self.rotation}


def clover(center: complex = 0.0, r0: float = 0.2, amplitude: float = 0.25, lobes: int = 4) -> TrigPolynomial:
    """``r(t) = r0 (1 + amplitude cos(lobes t))``."""
    coeffs = [0.0] * lobes
    coeffs[lobes - 1] = r0 * amplitude
    return TrigPolynomial(center, r0, tuple(coeffs))


@dataclass(frozen=True)
class LaurentCurve(Curve):
    """Image of the unit circle under ``phi(w) = a1 w + a0 + sum_k a_{-k} w^{-k}``.

    ``a_neg`` lists ``a_{-1}, a_{-2}, ...``.
    """

    a1: float
    a0: complex = 0.0
    a_neg: tuple[complex, ...] = ()
    kind = "laurent_map"

    def __post_init__(self):
        object.__setattr__(self, "a1", _positive("a1", self.a1))
        object.__setattr__(self, "a0", _as_complex(self.a0))
        object.__setattr__(self, "a_neg", tuple(_as_complex(a) for a in self.a_neg))

    def phi(self, w):
        out = self.a1 * w + self.a0
        for k, a in enumerate(self.a_neg, start=1):
            out = out + a * w ** (-k)
        return out

    def _dphi(self, w, order):
        if order == 1:
            out = np.full(np.shape(w), self.a1, dtype=complex)
            for k, a in enumerate(self.a_neg, start=1):
                out = out - k * a * w ** (-k - 1)
            return out
        out = np.zeros(np.shape(w), dtype=complex)
        for k, a in enumerate(self.a_neg, start=1):
            out = out + k * (k + 1) * a * w ** (-k - 2)
        return out

    def position(self, t):
        return self.phi(np.exp(1j * np.asarray(t, dtype=float)))

    def derivative(self, t):
        w = np.exp(1j * np.asarray(t, dtype=float))
        return 1j * w * self._dphi(w, 1)

    def second_derivative(self, t):
        w = np.exp(1j * np.asarray(t, dtype=float))
        return -w * self._dphi(w, 1) - w**2 * self._dphi(w, 2)

    def transformed(self, scale, shift):
        return LaurentCurve(scale * self.a1, scale * self.a0 + shift,
                            tuple(scale * a for a in self.a_neg))

    def to_dict(self):
        return {"kind": self.kind, "a1": self.a1, "a0": [self.a0.real, self.a0.imag],
                "a_neg": [[a.real, a.imag] for a in self.a_neg]}


def curve_from_dict(data: dict) -> Curve:
    """Build a curve from its JSON description (see ``config.CURVE_SCHEMA``)."""
    kind = data.get("kind")
    center = data.get("center", 0.0)
    try:
        if kind == "circle":
            curve = Circle(center, data["radius"])
        elif kind == "ellipse":
            curve = Ellipse(center, tuple(data["semi_axes"]), data.get("rotation", 0.0))
        elif kind == "rounded_rectangle":
            curve = RoundedRectangle(center, data["width"], data["height"],
                                     data.get("corner_radius"), data.get("rotation", 0.0))
        elif kind == "trig_polynomial":
            curve = TrigPolynomial(center, data["r0"], tuple(data.get("cos", ())),
                                   tuple(data.get("sin", ())), data.get("rotation", 0.0))
        elif kind == "laurent_map":
            curve = LaurentCurve(data["a1"], data.get("a0", 0.0), tuple(data.get("a_neg", ())))
        else:
            raise InvalidCurveParameters(f"unknown curve kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidCurveParameters(f"bad parameters for {kind!r} curve: {exc}") from exc
    curve.validate()
    return curve


@dataclass(frozen=True)
class RescaleMap:
    """Affine map ``z -> scale*z + shift`` (scale > 0)."""

    scale: float = 1.0
    shift: complex = 0.0

    @property
    def is_identity(self) -> bool:
        return self.scale == 1.0 and self.shift == 0.0

    def forward(self, z):
        return self.scale * np.asarray(z) + self.shift

    def inverse(self, z):
        return (np.asarray(z) - self.shift) / self.scale


def _diameter(points: np.ndarray) -> float:
    d = np.abs(points[:, None] - points[None, :])
    return float(d.max())


@dataclass(frozen=True)
class Scene:
    outer: Curve
    cavities: tuple[Curve, ...] = ()
    rescale: RescaleMap = field(default_factory=RescaleMap)

    @property
    def curves(self) -> tuple[Curve, ...]:
        return (self.outer,) + tuple(self.cavities)

    def diameter(self) -> float:
        return _diameter(self.outer.polygon(512))


def _check_layout(outer: Curve, cavities: Sequence[Curve]) -> None:
    polys = []
    for cav in cavities:
        z = cav.polygon()
        polys.append(Polygon(np.column_stack([z.real, z.imag])))
    for i in range(len(polys)):
        for j in range(i + 1, len(polys)):
            if polys[i].distance(polys[j]) <= 0.0:
                raise OverlappingCavities(f"cavities {i} and {j} intersect")
    z = outer.polygon()
    outer_poly = Polygon(np.column_stack([z.real, z.imag]))
    for k, poly in enumerate(polys):
        if not outer_poly.contains(poly) or outer_poly.exterior.distance(poly) <= 0.0:
            raise CavityTouchesOuter(f"cavity {k} is not strictly inside the outer boundary")


def build_scene(outer: Curve, cavities: Sequence[Curve] = (), *, target_diameter: float = 0.9) -> Scene:
    """Validate a cavity layout and rescale it so the outer diameter is < 1.

    When rescaling is needed, the outer curve is also centred on the origin
    (midpoint of its bounding box).
    """
    outer.validate()
    for cav in cavities:
        cav.validate()
    _check_layout(outer, cavities)
    diam = _diameter(outer.polygon(512))
    rescale = RescaleMap()
    if diam >= 1.0:
        z = outer.polygon(512)
        mid = complex(0.5 * (z.real.min() + z.real.max()), 0.5 * (z.imag.min() + z.imag.max()))
        s = target_diameter / diam
        rescale = RescaleMap(s, -s * mid)
        outer = outer.transformed(rescale.scale, rescale.shift)
        cavities = [c.transformed(rescale.scale, rescale.shift) for c in cavities]
    return Scene(outer, tuple(cavities), rescale)


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    """Stacked trapezoidal discretization of a list of curves.

    Arrays are flat over all nodes; ``offsets[k]:offsets[k+1]`` indexes the
    nodes of ``curves[k]``.  ``normals`` point out of the region each curve
    encloses.
    """

    curves: tuple[Curve, ...]
    counts: tuple[int, ...]
    t: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    speed: np.ndarray
    normals: np.ndarray
    curvature: np.ndarray
    weights: np.ndarray
    curve_id: np.ndarray
    offsets: np.ndarray

    @property
    def size(self) -> int:
        return int(self.offsets[-1])

    @property
    def n_curves(self) -> int:
        return len(self.curves)

    def slice(self, k: int) -> slice:
        return slice(int(self.offsets[k]), int(self.offsets[k + 1]))

    def flat_index(self, k: int, i: int) -> int:
        return int(self.offsets[k]) + i

    def node_index(self, flat: int) -> tuple[int, int]:
        k = int(self.curve_id[flat])
        return k, flat - int(self.offsets[k])

    def spacing(self, k: int) -> float:
        """Largest arclength step on curve ``k``."""
        return float(self.weights[self.slice(k)].max())

    def perimeter(self, k: int) -> float:
        return float(self.weights[self.slice(k)].sum())

    def subgrid(self, ids: Sequence[int]) -> "BoundaryGrid":
        ids = list(ids)
        idx = np.concatenate([np.arange(self.offsets[k], self.offsets[k + 1]) for k in ids]) if ids else np.zeros(0, int)
        counts = tuple(self.counts[k] for k in ids)
        new_id = np.concatenate([np.full(self.counts[k], j) for j, k in enumerate(ids)]) if ids else np.zeros(0, int)
        return BoundaryGrid(
            curves=tuple(self.curves[k] for k in ids), counts=counts, t=self.t[idx],
            points=self.points[idx], tangents=self.tangents[idx], speed=self.speed[idx],
            normals=self.normals[idx], curvature=self.curvature[idx], weights=self.weights[idx],
            curve_id=new_id, offsets=np.concatenate([[0], np.cumsum(counts)]).astype(int),
        )


def sample_curves(curves: Sequence[Curve], nodes_per_curve: int | Sequence[int]) -> BoundaryGrid:
    if isinstance(nodes_per_curve, (int, np.integer)):
        counts = [int(nodes_per_curve)] * len(curves)
    else:
        counts = [int(m) for m in nodes_per_curve]
        if len(counts) != len(curves):
            raise ValueError("one node count per curve is required")
    for m in counts:
        if m % 2 or m < 16:
            raise OddNodeCount(f"nodes per curve must be even and >= 16, got {m}")
    ts, zs, ds, kap, ids = [], [], [], [], []
    for k, (curve, m) in enumerate(zip(curves, counts)):
        t = TWO_PI * (np.arange(m) / m)
        ts.append(t)
        zs.append(curve.position(t))
        ds.append(curve.derivative(t))
        kap.append(curve.curvature(t))
        ids.append(np.full(m, k))
    t = np.concatenate(ts) if ts else np.zeros(0)
    d = np.concatenate(ds) if ds else np.zeros(0, complex)
    speed = np.abs(d)
    per_node = np.concatenate([np.full(m, TWO_PI / m) for m in counts]) if counts else np.zeros(0)
    return BoundaryGrid(
        curves=tuple(curves), counts=tuple(counts), t=t,
        points=np.concatenate(zs) if zs else np.zeros(0, complex),
        tangents=d, speed=speed, normals=-1j * d / speed,
        curvature=np.concatenate(kap) if kap else np.zeros(0),
        weights=per_node * speed,
        curve_id=np.concatenate(ids) if ids else np.zeros(0, int),
        offsets=np.concatenate([[0], np.cumsum(counts)]).astype(int),
    )


def sample_grid(scene: Scene, nodes_per_curve: int | Sequence[int]) -> BoundaryGrid:
    """Grid over the outer curve (index 0) followed by the cavities."""
    return sample_curves(scene.curves, nodes_per_curve)
