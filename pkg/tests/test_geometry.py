import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from calderon_cavities.errors import (
    CavityTouchesOuter,
    InvalidCurveParameters,
    OddNodeCount,
    OverlappingCavities,
    SelfIntersectingMap,
)
from calderon_cavities.geometry import (
    Circle,
    Ellipse,
    LaurentCurve,
    RescaleMap,
    RoundedRectangle,
    TrigPolynomial,
    build_scene,
    clover,
    curve_from_dict,
    sample_curves,
    sample_grid,
)

ALL_CURVES = [
    Circle(0.1 + 0.2j, 0.3),
    Ellipse(-0.1, (0.3, 0.1), 0.7),
    RoundedRectangle(0.05j, 0.4, 0.2, 0.05, 0.2),
    TrigPolynomial(0.0, 0.2, (0.0, 0.02, 0.03), (0.01,)),
    clover(),
    LaurentCurve(0.2, 0.1, (0.05j, 0.01)),
]


def test_identity_rescale_for_small_domain():
    scene = build_scene(Circle(0, 0.45), [Circle(0.1, 0.05)])
    assert scene.rescale.is_identity
    assert scene.cavities[0] == Circle(0.1, 0.05)


def test_large_domain_is_rescaled():
    scene = build_scene(Circle(0, 2.0), [Circle(0.5, 0.3)])
    s = scene.rescale.scale
    assert s == pytest.approx(0.9 / 4.0, rel=1e-6)
    assert scene.diameter() < 1.0
    assert scene.cavities[0].radius == pytest.approx(0.3 * s)
    assert scene.cavities[0].center == pytest.approx(scene.rescale.forward(0.5))


def test_overlapping_cavities_rejected():
    with pytest.raises(OverlappingCavities):
        build_scene(Circle(0, 0.45), [Circle(0.1, 0.2), Circle(0.25, 0.2)])


def test_cavity_touching_outer_rejected():
    with pytest.raises(CavityTouchesOuter):
        build_scene(Circle(0, 0.45), [Circle(0.3, 0.2)])


def test_invalid_parameters():
    with pytest.raises(InvalidCurveParameters):
        Circle(0, -1.0)
    with pytest.raises(InvalidCurveParameters):
        TrigPolynomial(0, 0.1, (0.2,))
    with pytest.raises(SelfIntersectingMap):
        LaurentCurve(0.1, 0, (0.0, 0.09)).validate()


def test_odd_or_small_node_count():
    scene = build_scene(Circle(0, 0.45))
    with pytest.raises(OddNodeCount):
        sample_grid(scene, 65)
    with pytest.raises(OddNodeCount):
        sample_grid(scene, 8)


def test_circle_grid():
    grid = sample_curves([Circle(0, 0.3)], 64)
    assert np.allclose(np.abs(grid.points), 0.3, atol=1e-15)
    assert np.allclose(grid.weights, 2 * math.pi * 0.3 / 64, rtol=1e-14)
    assert np.allclose(grid.normals, grid.points / 0.3, atol=1e-14)


def test_ellipse_perimeter_matches_adaptive_quadrature():
    e = Ellipse(0, (0.3, 0.1))
    grid = sample_curves([e], 128)
    exact, _ = quad(lambda t: abs(e.derivative(t)), 0, 2 * math.pi, epsabs=0, epsrel=1e-13, limit=200)
    assert grid.weights.sum() == pytest.approx(exact, rel=1e-10)


def test_rounded_rectangle_curvature_bound():
    rr = RoundedRectangle(0, 0.4, 0.2, 0.05)
    grid = sample_curves([rr], 256)
    assert np.abs(grid.curvature).max() <= 1 / 0.05 + 1e-6
    assert grid.weights.sum() == pytest.approx(2 * (0.3 + 0.1) + 2 * math.pi * 0.05, rel=1e-12)


@pytest.mark.parametrize("curve", ALL_CURVES, ids=lambda c: c.kind)
def test_curve_invariants(curve):
    curve.validate()
    grid = sample_curves([curve], 256)
    assert np.allclose(np.abs(grid.normals), 1.0, atol=1e-12)
    assert curve.signed_area(256) > 0
    # Nested grids: doubling M keeps shared nodes bit-identical.
    fine = sample_curves([curve], 512)
    assert np.array_equal(fine.points[::2], grid.points)


def test_areas_against_closed_forms():
    assert Circle(0, 0.3).signed_area(256) == pytest.approx(math.pi * 0.09, rel=1e-8)
    assert Ellipse(0.2, (0.3, 0.1), 1.0).signed_area(256) == pytest.approx(math.pi * 0.03, rel=1e-8)


@pytest.mark.parametrize("curve", ALL_CURVES, ids=lambda c: c.kind)
def test_curve_dict_roundtrip(curve):
    again = curve_from_dict(curve.to_dict())
    t = np.linspace(0, 2 * math.pi, 17)
    assert np.allclose(again.position(t), curve.position(t), atol=1e-15)


@given(scale=st.floats(0.05, 20.0), sx=st.floats(-5, 5), sy=st.floats(-5, 5))
@settings(max_examples=50, deadline=None)
def test_rescale_roundtrip(scale, sx, sy):
    rm = RescaleMap(scale, complex(sx, sy))
    z = sample_curves([Ellipse(0.1, (0.3, 0.2))], 32).points
    assert np.allclose(rm.inverse(rm.forward(z)), z, atol=1e-14 * (1 + abs(complex(sx, sy)) / scale))


def test_derivatives_match_finite_differences():
    t = np.linspace(0.1, 6.0, 9)
    h = 1e-5
    for curve in ALL_CURVES:
        fd1 = (curve.position(t + h) - curve.position(t - h)) / (2 * h)
        fd2 = (curve.derivative(t + h) - curve.derivative(t - h)) / (2 * h)
        scale = np.abs(curve.derivative(t)).max()
        assert np.abs(fd1 - curve.derivative(t)).max() < 1e-7 * scale, curve.kind
        assert np.abs(fd2 - curve.second_derivative(t)).max() < 1e-5 * max(scale, 1), curve.kind


def test_grid_index_maps():
    grid = sample_curves([Circle(0, 0.4), Circle(0.1, 0.05), Circle(-0.2, 0.05)], [64, 32, 16])
    assert grid.size == 112 and grid.n_curves == 3
    for k, m in enumerate([64, 32, 16]):
        for i in (0, m - 1):
            flat = grid.flat_index(k, i)
            assert grid.node_index(flat) == (k, i)
