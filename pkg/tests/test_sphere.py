import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from singcot.cotangent_model import verify_commutation
from singcot.errors import EpsilonOutOfRange
from singcot.geometry import PointRef, chart_to, fd_jacobian, overlap_samples, transition_jacobian
from singcot.normal_forms import classify_fixed_point
from singcot.sphere import (
    band_gluing,
    build_glued_sphere_system,
    build_profile,
    build_sphere_system,
    pole_gluing,
    profile_check,
    sphere_charts,
)

PI = math.pi
EPS = PI / 16


@pytest.fixture(scope="module")
def h():
    return build_profile(EPS)


def test_profile_examples(h):
    assert h(-PI / 4) == 0.0
    assert h(-PI / 4 + EPS / 2) == pytest.approx(-EPS / 2, abs=1e-15)
    assert h(0.0) < 0


@pytest.mark.parametrize("eps", [0.0, -0.1, PI / 8, PI / 4, 0.5])
def test_profile_rejects_epsilon(eps):
    with pytest.raises(EpsilonOutOfRange):
        build_profile(eps)


def test_profile_zones(h):
    for phi in np.linspace(-PI / 2 + 1e-3, -PI / 2 + EPS, 20)[:-1]:
        assert h(phi) == pytest.approx(-math.cos(phi) / math.sin(phi), rel=1e-12)
    for phi in np.linspace(PI / 2 - EPS, PI / 2 - 1e-3, 20)[1:]:
        assert h(phi) == pytest.approx(math.cos(phi) / math.sin(phi), rel=1e-12)
    for phi in np.linspace(-PI / 4 - EPS, -PI / 4 + EPS, 21)[1:-1]:
        assert h(phi) == pytest.approx(-(phi + PI / 4), abs=1e-15)
    for phi in np.linspace(PI / 4 - EPS, PI / 4 + EPS, 21)[1:-1]:
        assert h(phi) == pytest.approx(phi - PI / 4, abs=1e-15)


@pytest.mark.parametrize("eps", [0.05, PI / 16, PI / 10, 0.39])
def test_profile_invariants(eps):
    rep = profile_check(build_profile(eps))
    assert rep["passed"]
    assert rep["max_abs_at_zeros"] == 0.0
    assert rep["min_abs_away_from_zeros"] >= 1e-6
    assert rep["sign_pattern"] == [1, -1, 1]


def test_profile_is_c2_across_seams(h):
    d = 1e-4
    for x in h.seams():
        second = lambda y: (h(y + d) - 2 * h(y) + h(y - d)) / d**2
        assert abs(second(x + 2 * d) - second(x - 2 * d)) <= 1e-3 + abs(h.d2(x + 2 * d) - h.d2(x - 2 * d))
        assert abs(h.d2(x + 1e-9) - h.d2(x - 1e-9)) <= 1e-3
        assert abs(h.d1(x + 1e-9) - h.d1(x - 1e-9)) <= 1e-6


@given(st.floats(-PI / 2 + 1e-3, PI / 2 - 1e-3))
def test_profile_derivatives_match_fd(phi):
    h = build_profile(EPS)
    d = 1e-6
    assert h.d1(phi) == pytest.approx((h(phi + d) - h(phi - d)) / (2 * d), abs=1e-4 * max(1.0, abs(h.d1(phi))))
    assert h.d2(phi) == pytest.approx((h.d1(phi + d) - h.d1(phi - d)) / (2 * d), abs=1e-3 * max(1.0, abs(h.d2(phi))))


def test_profile_table(h):
    rows = h.table(1e-2)
    assert rows[0][0] == pytest.approx(-PI / 2) and rows[-1][0] == pytest.approx(PI / 2)
    assert all(len(r) == 3 for r in rows)


def test_sphere_function_examples():
    s = build_sphere_system(EPS)
    f, g = s.functions["T*PM"]
    assert f([1.0, 0.2, 2.0, -1.0]) == 2.0
    fv1, gv1 = s.functions["T*V1"]
    for fiber in [(0.0, 0.0), (2.0, -1.0), (0.5, 0.5)]:
        assert gv1([0.3, 0.0, *fiber]) == 0.0
    assert s.report["representatives_max_error"] <= 1e-9


def test_polar_to_cartesian_near_south_pole(sphere):
    th, ph = 0.0, -PI / 2 + 0.1
    q = chart_to(sphere.atlas, PointRef.of("T*PS", (th, ph, 0.0, 0.0)), "T*U1")
    np.testing.assert_allclose(q.coords[:2], [math.cos(ph) * math.cos(th), math.cos(ph) * math.sin(th)], atol=1e-15)
    back = chart_to(sphere.atlas, q, "T*PS")
    np.testing.assert_allclose(back.array, [th, ph, 0.0, 0.0], atol=1e-10)


def test_polar_cartesian_jacobian_matches_fd(sphere):
    tm = sphere.atlas.transition("T*PS", "T*U1")
    zs = overlap_samples(sphere.atlas, "T*PS", "T*U1", 50, seed=5)
    assert len(zs) == 50
    for z in zs:
        J = transition_jacobian(sphere.atlas, "T*PS", "T*U1", z)
        np.testing.assert_allclose(J, fd_jacobian(tm.forward, z), atol=1e-5)


def test_pole_gluing_examples(sphere):
    g = pole_gluing()
    assert g.is_exactly_symplectic()
    z = np.array([1.0, 2.0, 3.0, 4.0])
    w = g(z)
    np.testing.assert_array_equal(w, [-3.0, -4.0, 1.0, 2.0])
    f1, f2 = sphere.functions["T*U1"][0], sphere.functions["T*U2"][0]
    assert f1(z) == -2.0 and f2(w) == -2.0


def test_band_gluing_examples(sphere):
    g = band_gluing()
    assert g.is_exactly_symplectic()
    z = np.array([0.3, 0.1, 2.0, -1.5])
    w = g(z)
    np.testing.assert_array_equal(w, [0.3, -1.5, 2.0, -0.1])
    assert -z[1] * z[3] == pytest.approx(0.15) and w[1] * w[3] == pytest.approx(0.15)
    small = np.array([0.3, 0.05, 2.0, -0.08])
    (f1, g1), (f2, g2) = sphere.functions["T*V1"], sphere.functions["T*V2"]
    assert g2(g(small)) == pytest.approx(g1(small), abs=1e-15)
    assert f2(g(small)) == f1(small) == 2.0


def test_glued_sphere_reports(sphere):
    rep = sphere.report
    assert rep["atlas"]["passed"]
    assert rep["atlas"]["max_jacobian_error"] <= 1e-5
    for row in rep["descent"]:
        assert row["n_samples"] == 1000
        assert max(row["max_residual"]) <= 1e-12
    assert {g.name for g in sphere.gluings} == {"pole", "band"}


def test_glued_sphere_errors_and_second_epsilon():
    with pytest.raises(EpsilonOutOfRange):
        build_glued_sphere_system(PI / 4)
    s = build_glued_sphere_system(PI / 10, descent_tol=1e-14)
    assert s.report["atlas"]["passed"]


def test_sphere_commutation(sphere):
    rep = verify_commutation(sphere, 10_000)
    assert rep.passed
    assert {p["chart"] for p in rep.pairs} == {c.id for c in sphere_charts(EPS)}
    assert all(p["n_samples"] == 10_000 for p in rep.pairs)


def test_scan_point_examples(sphere):
    fs = sphere.functions["T*U1"]
    assert classify_fixed_point(fs, np.zeros(4)).as_tuple() == (0, 0, 1)
    D = sphere.differentials(PointRef.of("T*V1", (0.4, 0.0, 0.0, 0.0)))
    assert np.linalg.matrix_rank(D, tol=1e-8) == 1
    D = sphere.differentials(PointRef.of("T*PM", (0.4, 0.0, 0.0, 0.0)))
    assert np.linalg.matrix_rank(D, tol=1e-8) == 2


def test_singular_scan(sphere_scan):
    assert sphere_scan.passed
    (point,) = sphere_scan.focus_points
    (circle,) = sphere_scan.hyperbolic_circles
    assert point.leaf.as_tuple() == (0, 0, 1, 0, 0)
    assert circle.leaf.as_tuple() == (0, 1, 0, 1, 0)
    assert circle.closed_orbit
    assert len(circle.points) >= 20
    d = sphere_scan.to_dict()
    assert d["n_components"] == 2
