import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from singcot.cotangent_model import build_hyperbolic_loop, build_local_system
from singcot.dynamics import (
    commuting_flows_check,
    conservation_report,
    integrate_flow,
    is_regular,
    midpoint_step,
    project_to_level,
    sample_level,
)
from singcot.errors import LeftAtlas, NoConvergence, NotRegular, SeedOffLevel
from singcot.geometry import PointRef, fd_jacobian
from singcot.symplectic import ScalarField, poisson_matrix, quadratic_field

SPHERE_START = PointRef.of("T*PM", (0.3, 0.0, 1e-4, 1e-5))


@pytest.fixture(scope="module")
def hyp():
    return build_local_system("h", radius=5.0, glued=False)


def chart_of(system):
    return sorted(system.functions)[0]


def midpoint_factor(h):
    # implicit midpoint on q' = q: q_{k+1} = q_k (1 + h/2) / (1 - h/2)
    return (1 + h / 2) / (1 - h / 2)


def test_regular_translation():
    s = build_local_system("r", radius=5.0)
    tr = integrate_flow(s, 0, PointRef.of(chart_of(s), (0.0, 1.0)), 3.0, 1e-3)
    np.testing.assert_allclose(tr.end.array, [3.0, 1.0], atol=1e-12)
    assert len(tr.samples) == 3001


def test_hyperbolic_matches_discrete_oracle(hyp):
    c = chart_of(hyp)
    tr = integrate_flow(hyp, 0, PointRef.of(c, (1.0, 1.0)), 1.0, 1e-3)
    k = midpoint_factor(1e-3) ** 1000
    np.testing.assert_allclose(tr.end.array, [k, 1 / k], rtol=1e-12)
    # distance to the exact flow is the O(h^2) truncation e h^2 / 12
    err = np.max(np.abs(tr.end.array - [math.e, 1 / math.e]))
    assert err == pytest.approx(math.e * 1e-6 / 12, rel=1e-2)


def test_hyperbolic_conservation(hyp):
    tr = integrate_flow(hyp, 0, PointRef.of(chart_of(hyp), (1.0, 1.0)), 1.0, 1e-3)
    rep = conservation_report(hyp, tr, flowed=0)
    assert rep.energy_drift <= 1e-9
    assert all(d >= 0 for d in rep.drifts)


def test_zero_length_trajectory(hyp):
    tr = integrate_flow(hyp, 0, PointRef.of(chart_of(hyp), (1.0, 1.0)), 0.0, 1e-3)
    assert len(tr.samples) == 1
    assert conservation_report(hyp, tr).drifts == [0.0]


def test_fixed_point_is_constant():
    s = build_local_system("ff")
    c = chart_of(s)
    tr = integrate_flow(s, 1, PointRef.of(c, (0, 0, 0, 0)), 1.0, 1e-2)
    assert all(p.coords == (0.0, 0.0, 0.0, 0.0) for _, p in tr.samples)


def test_bad_step_and_start(hyp):
    with pytest.raises(ValueError):
        integrate_flow(hyp, 0, PointRef.of(chart_of(hyp), (1.0, 1.0)), 1.0, 0.0)
    with pytest.raises(LeftAtlas):
        integrate_flow(hyp, 0, PointRef.of(chart_of(hyp), (9.0, 1.0)), 1.0, 1e-2)


def test_leaving_the_atlas(hyp):
    start = PointRef.of(chart_of(hyp), (1.0, 1.0))
    with pytest.raises(LeftAtlas):
        integrate_flow(hyp, 0, start, 3.0, 1e-2)
    tr = integrate_flow(hyp, 0, start, 3.0, 1e-2, stop_on_exit=True)
    assert tr.left_atlas
    assert tr.samples[-1][0] < 3.0


def test_no_convergence():
    f = ScalarField(
        "c",
        lambda z: z[0] ** 4 + z[1] ** 4,
        lambda z: 4 * z**3,
        lambda z: np.diag(12 * z**2),
    )
    with pytest.raises(NoConvergence):
        midpoint_step(f, [3.0, 3.0], 0.5, max_iter=1)


@given(st.floats(1e-4, 0.1), st.floats(-2, 2), st.floats(-2, 2))
def test_midpoint_step_linear_oracle(h, q, p):
    f = quadratic_field(np.array([[0.0, 1.0], [1.0, 0.0]]))
    k = midpoint_factor(h)
    np.testing.assert_allclose(midpoint_step(f, [q, p], h), [q * k, p / k], rtol=1e-11, atol=1e-13)


def test_integrator_is_symplectic(hyp):
    c = chart_of(hyp)
    phi = lambda z: integrate_flow(hyp, 0, PointRef.of(c, z), 1.0, 1e-3).end.array
    D = fd_jacobian(phi, np.array([1.0, 1.0]))
    J = poisson_matrix(1)
    assert np.max(np.abs(D.T @ J @ D - J)) <= 1e-6


def test_reversibility(hyp):
    c = chart_of(hyp)
    fwd = integrate_flow(hyp, 0, PointRef.of(c, (0.7, -1.2)), 1.0, 1e-3).end
    back = integrate_flow(hyp, 0, fwd, -1.0, 1e-3).end
    np.testing.assert_allclose(back.array, [0.7, -1.2], atol=1e-8)


def test_error_is_second_order(hyp):
    c = chart_of(hyp)
    errs = []
    for h in [4e-3, 2e-3, 1e-3]:
        end = integrate_flow(hyp, 0, PointRef.of(c, (1.0, 1.0)), 1.0, h).end.array
        errs.append(np.max(np.abs(end - [math.e, 1 / math.e])))
    for a, b in zip(errs, errs[1:]):
        assert 3.5 <= a / b <= 4.5


def test_loop_switches_use_registered_maps():
    loop = build_hyperbolic_loop(glued=True)
    tr = integrate_flow(loop, 0, PointRef.of("T*W0", (0.15, 0.0)), 20.0, 1e-2)
    assert not tr.left_atlas and tr.switches
    assert tr.switches[0][1:] == ("T*W0", "T*R1")
    chain = [s[1:] for s in tr.switches]
    assert all(x[1] == y[0] for x, y in zip(chain, chain[1:]))
    assert chain[-1][1] == tr.end.chart
    for _, a, b in tr.switches:
        assert loop.atlas.transition(a, b) is not None
    assert conservation_report(loop, tr).drifts[0] <= 1e-12


def test_sphere_flow_conserves(sphere):
    tr = integrate_flow(sphere, 0, SPHERE_START, 10.0, 1e-3)
    rep = conservation_report(sphere, tr, flowed=0)
    assert rep.drifts[1] <= 1e-8


def test_sphere_g_flow_crosses_band_gluing(sphere):
    tr = integrate_flow(sphere, 1, SPHERE_START, 10.0, 1e-3)
    assert ("T*V1", "T*V2") in [s[1:] for s in tr.switches] or ("T*V2", "T*V1") in [s[1:] for s in tr.switches]
    for _, a, b in tr.switches:
        assert sphere.atlas.transition(a, b) is not None
    assert max(conservation_report(sphere, tr, flowed=1).drifts) <= 1e-8


def test_commuting_flows(sphere):
    same = commuting_flows_check(sphere, SPHERE_START, 1, 1, 0.5, 0.5)
    assert same["distance"] == 0.0
    rep = commuting_flows_check(sphere, SPHERE_START, 0, 1, 1.0, 1.0)
    assert rep["passed"] and rep["distance"] <= 1e-6
    with pytest.raises(NotRegular):
        commuting_flows_check(sphere, PointRef.of("T*U1", (0, 0, 0, 0)), 0, 1, 1.0, 1.0)


def test_perturbed_pair_fails_commutation():
    s = build_local_system("r*r", radius=5.0)
    c = chart_of(s)
    f1, f2 = s.functions[c]
    Q = np.zeros((4, 4))
    Q[0, 0] = 1.0  # p2 + q1^2 / 2 no longer commutes with p1
    bad = dataclasses.replace(s, functions={c: [f1, f2 + quadratic_field(Q, chart=c)]})
    rep = commuting_flows_check(bad, PointRef.of(c, (0.0, 0.0, 0.5, 0.5)), 0, 1, 1.0, 1.0)
    assert rep["distance"] > 1e-3 and not rep["passed"]
    good = commuting_flows_check(s, PointRef.of(c, (0.0, 0.0, 0.5, 0.5)), 0, 1, 1.0, 1.0)
    assert good["distance"] <= 1e-12


def test_is_regular(sphere):
    assert is_regular(sphere, SPHERE_START)
    assert not is_regular(sphere, PointRef.of("T*V1", (0.1, 0.0, 0.0, 0.0)))


def test_projection_reaches_level():
    s = build_local_system("ff")
    p = project_to_level(s, PointRef.of(chart_of(s), (0.3, 0.2, 0.1, 0.05)), [0.0, 0.0])
    assert np.max(np.abs(s.values(p))) <= 1e-10


def test_properness_contrast():
    seed = [PointRef.of("T*W0", (0.0, 0.15))]
    unglued = sample_level(build_hyperbolic_loop(glued=False), [0.0], seed, budget=10_000)
    glued = sample_level(build_hyperbolic_loop(glued=True), [0.0], seed, budget=10_000)
    assert unglued.boundary_hit
    assert not glued.boundary_hit and glued.steps_used == unglued.steps_used == 10_000
    assert glued.level_residual <= 1e-10


def test_sphere_regular_level_is_bounded(sphere):
    p = PointRef.of("T*PM", (0.3, 0.0, 1e-6, 1e-6))
    res = sample_level(sphere, sphere.values(p), [p], budget=4000)
    assert not res.boundary_hit
    assert res.level_residual <= 1e-9


def test_seed_off_level():
    with pytest.raises(SeedOffLevel):
        sample_level(build_hyperbolic_loop(glued=False), [100.0], [PointRef.of("T*W0", (0.1, 0.1))], budget=10)


def test_sample_level_is_deterministic():
    loop = build_hyperbolic_loop(glued=True)
    seed = [PointRef.of("T*W0", (0.0, 0.15))]
    a = sample_level(loop, [0.0], seed, budget=500, seed=3)
    b = sample_level(loop, [0.0], seed, budget=500, seed=3)
    assert a.points == b.points
