import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from singcot.errors import (
    DegenerateSpectrum,
    EllipticFactorUnsupported,
    NotCritical,
    ParseError,
    SequenceInvalid,
    UnknownLabel,
)
from singcot.normal_forms import (
    LeafType,
    LocalModel,
    SubspaceRep,
    branch_chart,
    branch_count,
    classify_fixed_point,
    classify_model,
    enumerate_branches,
    leaf_type_valid,
    model_functions,
    principal_angles,
    spectrum_pattern,
    tangent_plane_limit,
)
from singcot.symplectic import fd_gradient, poisson_bracket, quadratic_field

MODELS = ["r", "e", "h", "ff", "h*ff", "h*h*r", "e*h", "ff*ff", "r*e*h*ff"]
GLUABLE = ["r", "h", "ff", "h*ff", "h*h*r", "ff*r"]

model_strategy = st.lists(st.sampled_from(["r", "e", "h", "ff"]), min_size=1, max_size=4).map("*".join)


def test_parse_round_trip():
    m = LocalModel.parse("h * FF * r")
    assert str(m) == "h*ff*r"
    assert m.n == 4
    for bad in ["", "x", "h**ff", "hh"]:
        with pytest.raises(ParseError):
            LocalModel.parse(bad)


def test_model_function_values():
    (h,) = model_functions(LocalModel.parse("h"))
    assert h([2.0, 3.0]) == 6.0
    h1, h2 = model_functions(LocalModel.parse("ff"))
    # (x1, y1, x2, y2) = (1, 3, 2, 4) in the pairing order, i.e. phase point (x1, x2, y1, y2) = (1, 2, 3, 4)
    assert h2([1.0, 2.0, 3.0, 4.0]) == 1 * 4 - 3 * 2
    assert h1([1.0, 2.0, 3.0, 4.0]) == 1 * 3 + 2 * 4
    (r,) = model_functions(LocalModel.parse("r"))
    assert r([0.0, 5.0]) == 5.0
    (e,) = model_functions(LocalModel.parse("e"))
    assert e([1.0, 2.0]) == 5.0


@pytest.mark.parametrize("text", MODELS)
def test_model_functions_commute(text):
    m = LocalModel.parse(text)
    fs = model_functions(m)
    assert len(fs) == m.n
    rng = np.random.default_rng(1)
    for z in rng.uniform(-2, 2, size=(1000, 2 * m.n)):
        for f, g in itertools.combinations(fs, 2):
            assert abs(poisson_bracket(f, g, z)) <= 1e-10


@pytest.mark.parametrize("text", MODELS)
def test_model_gradients_match_fd(text):
    m = LocalModel.parse(text)
    rng = np.random.default_rng(2)
    for f in model_functions(m):
        for z in rng.uniform(-2, 2, size=(20, 2 * m.n)):
            np.testing.assert_allclose(f.grad(z), fd_gradient(f, z), atol=1e-5)


@pytest.mark.parametrize(
    "text,expected", [("h", (0, 1, 0)), ("e", (1, 0, 0)), ("ff", (0, 0, 1)), ("h*ff", (0, 1, 1)), ("r", (0, 0, 0)), ("e*h*r", (1, 1, 0))]
)
def test_classify_models(text, expected):
    assert classify_model(LocalModel.parse(text)).as_tuple() == expected


def test_hyperbolic_spectrum_is_plus_minus_c():
    (h,) = model_functions(LocalModel.parse("h"))
    from singcot.symplectic import poisson_matrix

    c = 1.7
    lam = np.sort(np.linalg.eigvals(poisson_matrix(1) @ (c * h.hess([0, 0]))).real)
    np.testing.assert_allclose(lam, [-c, c])


@pytest.mark.parametrize("text,expected", [("e", (1, 0, 0)), ("h", (0, 1, 0)), ("ff", (0, 0, 1))])
def test_pure_models_classify_every_seed(text, expected):
    m = LocalModel.parse(text)
    hits = sum(classify_model(m, trials=1, seed=s).as_tuple() == expected for s in range(100))
    assert hits == 100


def test_classify_errors():
    (r,) = model_functions(LocalModel.parse("r"))
    with pytest.raises(NotCritical):
        classify_fixed_point([r], [0.0, 0.0])
    # c1 xy + c2 (x^2 + y^2)/2 is hyperbolic iff |c1| > |c2|: the pattern flips between trials
    xy = quadratic_field(np.array([[0.0, 1.0], [1.0, 0.0]]))
    circle = quadratic_field(np.eye(2))
    outcomes = []
    for seed in range(20):
        try:
            outcomes.append(classify_fixed_point([xy, circle], [0.0, 0.0], trials=2, seed=seed).as_tuple())
        except DegenerateSpectrum:
            outcomes.append(None)
    assert None in outcomes and (0, 1, 0) in outcomes and (1, 0, 0) in outcomes
    with pytest.raises(DegenerateSpectrum):
        spectrum_pattern(np.array([1.0, 2.0, 3.0]))


def test_leaf_type_examples():
    assert leaf_type_valid(LeafType(0, 0, 1, 0, 0), 2)
    assert leaf_type_valid(LeafType(1, 1, 0, 0, 0), 2)
    assert not leaf_type_valid(LeafType(0, 1, 0, 0, 1), 1)


def test_branch_examples():
    assert len(enumerate_branches(LocalModel.parse("h*ff"))) == 4
    assert enumerate_branches(LocalModel.parse("r*r")) == [("R", "R")]
    assert ["".join(b) for b in enumerate_branches(LocalModel.parse("h*h"))] == ["XX", "XY", "YX", "YY"]


@given(model_strategy)
def test_branch_count_property(text):
    m = LocalModel.parse(text)
    labels = enumerate_branches(m)
    assert len(labels) == branch_count(m) == 2 ** (text.split("*").count("h") + text.split("*").count("ff"))
    assert labels == sorted(set(labels))


def test_branch_chart_examples():
    h = LocalModel.parse("h")
    bc = branch_chart(h, ("Y",))
    np.testing.assert_array_equal(bc.immersion([0.7]), [0.0, 0.7])
    np.testing.assert_array_equal(bc.plane.frame[:, 0], [0.0, 1.0])
    ff = LocalModel.parse("ff")
    bc = branch_chart(ff, ("X",))
    np.testing.assert_array_equal(bc.immersion([0.2, 0.3]), [0.2, 0.3, 0.0, 0.0])
    r = LocalModel.parse("r")
    np.testing.assert_array_equal(branch_chart(r, ("R",)).immersion([0.4]), [0.4, 0.0])


def test_branch_chart_errors():
    with pytest.raises(UnknownLabel):
        branch_chart(LocalModel.parse("h"), ("R",))
    with pytest.raises(EllipticFactorUnsupported):
        branch_chart(LocalModel.parse("e"), ("E",))


@pytest.mark.parametrize("text", GLUABLE)
def test_branches_lie_in_level(text):
    m = LocalModel.parse(text)
    fs = model_functions(m)
    rng = np.random.default_rng(3)
    for label in enumerate_branches(m):
        bc = branch_chart(m, label)
        for c in rng.uniform(-1, 1, size=(50, m.n)):
            z = bc.immersion(c)
            assert max(abs(f(z)) for f in fs) <= 1e-12


@pytest.mark.parametrize("text", ["h", "ff", "h*ff", "h*h"])
def test_distinct_branches_are_distinguishable(text):
    m = LocalModel.parse(text)
    planes = [branch_chart(m, lab).plane for lab in enumerate_branches(m)]
    for a, b in itertools.combinations(planes, 2):
        assert np.max(principal_angles(a, b)) >= math.pi / 4


def test_subspace_rep_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        SubspaceRep(np.array([[1.0], [1.0]]))
    s = SubspaceRep.span(np.array([[1.0], [1.0]]))
    assert s.k == 1


def test_tangent_limit_examples():
    h = LocalModel.parse("h")
    rep = tangent_plane_limit(h, ("Y",), [1e-1, 1e-2, 1e-3])
    assert rep.passed and max(rep.angles) == 0.0
    ff = LocalModel.parse("ff")
    rep = tangent_plane_limit(ff, ("X",), [1e-1, 1e-2, 1e-3])
    assert rep.passed and rep.angles[-1] <= 1e-4


def test_tangent_limit_mixed_bounded_by_factors():
    hf = LocalModel.parse("h*ff")
    for label in enumerate_branches(hf):
        mixed = tangent_plane_limit(hf, label, [1e-1, 1e-2, 1e-3])
        h_part = tangent_plane_limit(LocalModel.parse("h"), label[:1], [1e-1, 1e-2, 1e-3])
        ff_part = tangent_plane_limit(LocalModel.parse("ff"), label[1:], [1e-1, 1e-2, 1e-3])
        for a, b, c in zip(mixed.angles, h_part.angles, ff_part.angles):
            assert a <= max(b, c) + 1e-12


def test_tangent_limit_sequence_errors():
    h = LocalModel.parse("h")
    for bad in [[], [1e-2, 1e-1], [1e-1, 0.0], [1e-1, 1e-1]]:
        with pytest.raises(SequenceInvalid):
            tangent_plane_limit(h, ("X",), bad)
