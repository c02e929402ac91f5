import math

import numpy as np
import pytest

from calderon_cavities.errors import DisksOverlap, OracleNotApplicable, SelfIntersectingMap
from calderon_cavities.forward import assemble_dtn
from calderon_cavities.geometry import (
    Circle,
    Ellipse,
    LaurentCurve,
    RoundedRectangle,
    build_scene,
    clover,
    sample_curves,
)
from calderon_cavities.moments import extract_moments
from calderon_cavities.oracles import (
    LaurentMap,
    build_two_disk_series,
    conformal_moments,
    kappa_cross_form,
    kappa_ratio_form,
    oracle_moments,
    scene_oracle_kind,
    small_inclusion_measure,
    two_disk_double_layer,
    two_disk_measure,
    write_series_csv,
)

from conftest import OUTER_R


# -- conformal moments --------------------------------------------------------

def test_disk_map():
    rho, z0 = 0.08, 0.15 + 0.1j
    tau = conformal_moments(LaurentMap(rho, z0), 6).values
    assert np.allclose(tau, 4 * math.pi * rho**2 * z0 ** np.arange(7), rtol=1e-13, atol=0)


def test_ellipse_map():
    a1, am1 = 0.1, 0.03 * np.exp(0.7j)
    tau = conformal_moments(LaurentMap(a1, 0.0, (am1,)), 4).values
    assert tau[0] == pytest.approx(4 * math.pi * a1**2, rel=1e-13)
    assert abs(tau[1]) < 1e-15
    # Only the w^1 term 3 a1^2 a_{-1} of phi^3 survives: (2 a1 / 3) * 2 pi * 3 a1^2 a_{-1}.
    assert tau[2] == pytest.approx(4 * math.pi * a1**3 * am1, rel=1e-12)


def test_m_max_zero_positive():
    tau = conformal_moments(LaurentMap(0.2, 0.1 - 0.3j, (0.05, 0.01j)), 0).values
    assert len(tau) == 1 and tau[0].real == pytest.approx(4 * math.pi * 0.04, rel=1e-13)


def test_conformal_moments_resolution_independent():
    phi = LaurentMap(0.12, 0.05j, (0.03, -0.01j, 0.004))
    a = conformal_moments(phi, 8).values
    b = conformal_moments(phi, 8, nodes=1024).values
    assert np.abs(a - b).max() < 1e-12 * np.abs(a).max()


def test_map_from_ellipse_matches_shape():
    e = Ellipse(0.1 - 0.05j, (0.12, 0.06), 0.4)
    phi = LaurentMap.from_curve(e)
    w = np.exp(1j * np.linspace(0, 2 * np.pi, 400, endpoint=False))
    # Image points satisfy the ellipse equation in the rotated frame.
    loc = (phi(w) - e.center) * np.exp(-0.4j)
    assert np.allclose((loc.real / 0.12) ** 2 + (loc.imag / 0.06) ** 2, 1.0, atol=1e-13)


def test_map_validation():
    with pytest.raises(SelfIntersectingMap):
        LaurentMap(0.1, 0.0, (0.1,)).validate()
    with pytest.raises(SelfIntersectingMap):
        LaurentMap(0.1, 0.0, (0.0, 0.0, 0.08)).validate()
    with pytest.raises(SelfIntersectingMap):
        LaurentMap(-1.0)
    with pytest.raises(OracleNotApplicable):
        LaurentMap.from_curve(clover())


def test_laurent_scene_matches_pipeline():
    cav = LaurentCurve(0.1, 0.03 - 0.02j, (0.02, 0.008j))
    scene = build_scene(Circle(0, OUTER_R), [cav])
    tau = extract_moments(assemble_dtn(scene, nodes_per_curve=256), 5).values[:9]
    ref = conformal_moments(LaurentMap.from_curve(scene.cavities[0]), 8).values
    assert (np.abs(tau - ref) / np.abs(ref)).max() < 1e-4


# -- two disks ----------------------------------------------------------------

@pytest.fixture(scope="module")
def unit_series():
    return build_two_disk_series(0.0, 0.25, 1.0, 0.25, tol=1e-60)


def test_unit_example(unit_series):
    s = unit_series
    assert s.Lambda1 == pytest.approx(1 / 16) and s.Lambda2 == pytest.approx(1 / 16)
    assert s.Lambda == pytest.approx(0.75, rel=1e-15)
    l1, l2 = s.lambda_limits()
    assert l1 == pytest.approx((1 + math.sqrt(0.75)) / 2, rel=1e-15) == pytest.approx(0.9330127, rel=1e-7)
    assert abs(s.lam1[-1] - l1) < 1e-12 and abs(s.lam2[-1] - l2) < 1e-12
    assert s.kappa1[1] == pytest.approx(0.125, rel=1e-15)
    assert s.kappa1[2] == pytest.approx(-0.0078125, rel=1e-15)
    assert np.array_equal(s.lam1, s.lam2)


def test_lambda_fixed_point():
    s = build_two_disk_series(0.1 + 0.2j, 0.07, -0.15, 0.11)
    l1, l2 = s.lambda_limits()
    assert abs(1 - s.Lambda2 / (1 - s.Lambda1 / l1) - l1) < 1e-12
    assert abs(1 - s.Lambda1 / (1 - s.Lambda2 / l2) - l2) < 1e-12
    assert abs(s.lam1[-1] - l1) < 1e-12 and abs(s.lam2[-1] - l2) < 1e-12


@pytest.mark.parametrize("cfg", [(0.0, 0.25, 1.0, 0.25), (0.1, 0.06, 0.35, 0.09),
                                 (0.2j, 0.1, 0.3 - 0.1j, 0.15)])
def test_kappa_routes_agree(cfg):
    s = build_two_disk_series(*cfg, tol=1e-200)
    assert s.n_terms > 42
    direct = s.kappa1[:42]
    for other in (kappa_ratio_form(s)[:42], kappa_cross_form(s)[:42]):
        rel = np.abs(other[1:] - direct[1:]) / np.abs(direct[1:])
        assert rel.max() < 1e-12


@pytest.mark.parametrize("cfg", [(0.0, 0.25, 1.0, 0.25), (0.1, 0.06, 0.35, 0.09),
                                 (0.2j, 0.1, 0.3 - 0.1j, 0.15)])
def test_series_invariants(cfg):
    s = build_two_disk_series(*cfg)
    z1, r1, z2, r2 = cfg
    assert np.all(np.abs(s.zs1 - z1) < r1) and np.all(np.abs(s.zs2 - z2) < r2)
    lower1 = max(1 - math.sqrt(s.Lambda2), 0.0)
    l1, l2 = s.lambda_limits()
    assert lower1 < l1
    assert np.all(s.lam1 > l1 - 1e-15) and np.all(s.lam1 <= 1)
    assert np.all(s.lam2 > l2 - 1e-15) and np.all(s.lam2 <= 1)
    assert 0 < s.delta < 1
    # Per-index fitted rate against the two-step asymptotic ratio.
    assert s.delta == pytest.approx(math.sqrt(s.theoretical_delta()), rel=0.05)
    size = np.abs(s.kappa1[1:]) + np.abs(s.kappa2[1:])
    n = np.arange(1, len(size) + 1)
    assert np.all(size <= 1.5 * size[0] / s.delta * s.delta**n)


def test_leading_atom():
    s = build_two_disk_series(0.1, 0.06, 0.35, 0.09)
    meas = two_disk_measure(s)
    assert meas.locations[0] == 0.1 and meas.weights[0] == pytest.approx(4 * math.pi * 0.06**2)
    assert meas.total_mass.real > 4 * math.pi * (0.06**2 + 0.09**2)


def test_widely_separated_disks():
    meas = two_disk_measure(build_two_disk_series(0.0, 0.01, 5.0, 0.02))
    lead = {0.0: 4 * math.pi * 1e-4, 5.0: 4 * math.pi * 4e-4}
    for z, c in zip(meas.locations, meas.weights):
        if z in lead:
            assert c == pytest.approx(lead[z], rel=1e-12)
        else:
            assert abs(c) < 1e-6


def test_disks_overlap():
    with pytest.raises(DisksOverlap):
        build_two_disk_series(0.0, 0.3, 0.5, 0.25)
    with pytest.raises(DisksOverlap):
        build_two_disk_series(0.0, 0.0, 0.5, 0.25)


def test_series_double_layer_identity():
    s = build_two_disk_series(-0.1 + 0.05j, 0.08, 0.15 - 0.02j, 0.1)
    grid = sample_curves([Circle(s.z1, s.rho1), Circle(s.z2, s.rho2)], 256)
    pts1 = s.z1 + 0.5 * s.rho1 * np.exp(1j * np.linspace(0, 6, 7))
    pts2 = s.z2 + 0.4 * s.rho2 * np.exp(1j * np.linspace(0, 6, 7))
    assert np.abs(two_disk_double_layer(s, grid, pts1) - (pts1 - s.z1)).max() < 1e-10
    assert np.abs(two_disk_double_layer(s, grid, pts2) - (pts2 - s.z2)).max() < 1e-10


def test_two_disk_pipeline_agreement():
    scene = build_scene(Circle(0, OUTER_R), [Circle(-0.12 + 0.05j, 0.07), Circle(0.15 - 0.08j, 0.1)])
    tau = extract_moments(assemble_dtn(scene, nodes_per_curve=256), 5).values[:9]
    ref = oracle_moments(scene, 9).values
    assert (np.abs(tau - ref) / np.abs(ref)).max() < 1e-4
    assert tau[0].real == pytest.approx(ref[0].real, rel=1e-4)


def test_series_csv(tmp_path):
    s = build_two_disk_series(0.1, 0.06, 0.35, 0.09)
    write_series_csv(tmp_path / "s.csv", s)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[2].startswith("n,lambda1,lambda2") and len(lines) == 3 + s.n_terms


# -- small inclusions and dispatch -------------------------------------------

def test_small_inclusion_measure():
    one = small_inclusion_measure(0.1j, 0.01)
    assert one.locations[0] == 0.1j and one.weights[0] == pytest.approx(2 * math.pi * 1e-4)
    two = small_inclusion_measure([0.1, -0.2], [0.5, 1.0], eps=0.02)
    assert np.allclose(two.weights, 2 * math.pi * np.array([0.01, 0.02]) ** 2)
    assert len(small_inclusion_measure([0.1], [0.5], eps=0.0)) == 0
    exact = small_inclusion_measure([0.1], [0.01], mass_constant=4 * math.pi)
    assert exact.weights[0] == pytest.approx(4 * math.pi * 1e-4)


def test_oracle_dispatch():
    outer = Circle(0, OUTER_R)
    assert scene_oracle_kind(build_scene(outer, [Ellipse(0, (0.1, 0.05))])) == "conformal"
    assert scene_oracle_kind(build_scene(outer, [Circle(-0.2, 0.05), Circle(0.2, 0.05)])) == "two_disk"
    with pytest.raises(OracleNotApplicable, match="conjecture"):
        scene_oracle_kind(build_scene(outer, [clover(0, 0.15, 0.2)]))
    with pytest.raises(OracleNotApplicable):
        scene_oracle_kind(build_scene(outer, [RoundedRectangle(0, 0.2, 0.1, 0.02)]))
    with pytest.raises(OracleNotApplicable):
        scene_oracle_kind(build_scene(outer, [Circle(-0.2, 0.05), Circle(0.2, 0.05), Circle(0.0, 0.05)]))
