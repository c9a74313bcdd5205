from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toruslab.cone_analysis import fd_jacobian
from toruslab.torus_core import DomainError, torus_diff
from toruslab.torus_maps import (
    EXPANSION,
    ConstructionParams,
    FHat,
    SurgeryMap,
    build_maps,
    describe,
    map_A,
    surgery_support_radius,
    validate_params,
)


def test_defaults_validate(params2, params3):
    assert validate_params(params2).ok
    assert validate_params(params3).ok
    assert surgery_support_radius(params2) < params2.r


def test_validation_rejects_delta_equal_two_theta():
    rep = validate_params(ConstructionParams(theta=0.02, delta=0.04))
    assert not rep.ok
    assert [c.name for c in rep.failures()] == ["0 < delta < 2 theta"]


def test_validation_rejects_overlapping_cubes_and_big_a0():
    assert not validate_params(ConstructionParams(epsilon=0.02)).ok
    assert not validate_params(ConstructionParams(a0=1e-3)).ok


def test_large_kappa_is_informational():
    rep = validate_params(ConstructionParams(kappa=2.9))
    assert rep.ok
    assert any("kappa" in c.name for c in rep.info)


def test_params_roundtrip(params2):
    assert ConstructionParams.from_dict(params2.to_dict()) == params2


def test_map_A_oracle():
    np.testing.assert_allclose(map_A([1 / 28, 0.3]), [0.5, 0.3])
    np.testing.assert_allclose(map_A([0.1, 0.2, -0.7]), [-0.6, 0.8, -0.7], atol=1e-15)


def test_f_equals_A_off_the_cubes(maps2):
    rng = np.random.default_rng(0)
    x = np.column_stack([rng.uniform(0.3, 0.9, 500), rng.uniform(-1, 1, 500)])
    np.testing.assert_array_equal(maps2["f"](x), maps2["A"](x))


def test_f_is_fhat_on_the_thin_cubes(params2, maps2):
    fh = FHat(params2)
    rng = np.random.default_rng(1)
    x = np.column_stack([rng.uniform(-1 / 28, 1 / 28, 200), rng.uniform(-1, 1, 200)])
    np.testing.assert_allclose(maps2["f"](x), fh(x), atol=1e-15)
    with pytest.raises(DomainError):
        fh(np.array([[0.5, 0.0]]))


def test_F_equals_f_outside_the_ball(params2, maps2):
    rng = np.random.default_rng(2)
    x = rng.uniform(-1, 1, (5000, 2))
    far = np.linalg.norm(torus_diff(x, params2.point_p), axis=1) >= params2.r
    np.testing.assert_array_equal(maps2["F"](x[far]), maps2["f"](x[far]))


def test_fixed_fibers(maps2):
    np.testing.assert_allclose(maps2["f"]([0.0, 1.0]), [0.0, -1.0])
    np.testing.assert_allclose(maps2["f"]([2 / 13, 2 / 13]), [2 / 13, 2 / 13], atol=1e-14)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_exact_determinants(n):
    P = ConstructionParams(n=n).resolved()
    F = SurgeryMap(P)
    d = Fraction(P.delta)
    base = [Fraction(c) for c in P.point_p][:-1]
    scale = Fraction(EXPANSION) ** (n - 1)
    assert F.det_exact(base + [Fraction(1, 4) + d / 4]) == Fraction(5, 2) * scale
    assert F.det_exact(base + [Fraction(1, 4) + d / 8]) == -scale
    assert F.det_exact(base + [Fraction(1, 4)]) == 0
    # float closed form agrees
    assert F.det(P.q1()) == pytest.approx(2.5 * 14.0 ** (n - 1), rel=1e-12)
    assert F.det(P.q2()) == pytest.approx(-(14.0 ** (n - 1)), rel=1e-12)


def test_det_constant_away_from_the_construction(params2, maps2):
    rng = np.random.default_rng(3)
    x = np.column_stack([rng.uniform(0.4, 0.9, 2000), rng.uniform(-1, 1, 2000)])
    np.testing.assert_allclose(maps2["F"].det(x), 14.0)


def test_closed_form_det_matches_matrix_det(params2, maps2):
    rng = np.random.default_rng(4)
    d = rng.standard_normal((1000, 2))
    x = params2.point_p + params2.r * d / np.linalg.norm(d, axis=1, keepdims=True) * rng.random((1000, 1))
    J = maps2["F"].jacobian(x)
    np.testing.assert_allclose(maps2["F"].det(x), np.linalg.det(J), rtol=1e-10, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1, 0.99), st.floats(-1, 0.99))
def test_jacobian_property_f(a, b):
    maps = build_maps(ConstructionParams().resolved())
    x = np.array([a, b])
    J = maps["f"].jacobian(x)
    Jf = fd_jacobian(maps["f"], x, 1e-6)
    assert np.max(np.abs(J - Jf)) <= 1e-3 * max(np.abs(J).max(), 1)
    assert J[0, 0] == EXPANSION and J[0, 1] == 0


def test_describe_is_json_ready(params2):
    import json

    d = describe(params2)
    json.dumps(d)
    assert d["derived"]["q1"][1] == pytest.approx(0.25 + params2.delta / 4)
