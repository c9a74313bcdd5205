import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toruslab.circle_ifs import (
    SHIFT_G2,
    IFSFamily,
    IdentityCircleMap,
    a0_for_budget,
    build_ifs,
    build_pl_map,
    c1_gap_to_identity,
    check_minimality,
    contraction_cover_check,
    inverse_branch,
    make_g2,
    smooth_pl_map,
)
from toruslab.torus_core import DomainError, torus_diff, wrap

A = 1 / 27


@pytest.fixture(scope="module")
def literal():
    return build_ifs(k=1.0)


@pytest.fixture(scope="module")
def conjugate():
    return build_ifs(k=1.0, conjugate=True)


def test_pl_map_oracle():
    g = build_pl_map(A)
    s = (2 - 3 * A) / (2 - 2 * A)
    assert g(A) == pytest.approx(1.5 * A)
    assert g(-A) == pytest.approx(-1.5 * A)
    assert g(0.0) == 0.0
    assert g(-1.0) == -1.0
    assert g(0.5) == pytest.approx(1.5 * A + s * (0.5 - A))
    assert g.sup_gap() == pytest.approx(A / 2)


def test_pl_map_domain():
    with pytest.raises(DomainError):
        build_pl_map(0.7)


def test_smooth_map_is_c1_and_monotone():
    g = smooth_pl_map(build_pl_map(A))
    x = np.linspace(-1, 1, 400_001)
    d = g.derivative(x)
    assert d.min() > 0
    assert d.max() <= 1.5 + 1e-15
    # derivative is continuous: no jumps larger than the fillet slope allows
    assert np.max(np.abs(np.diff(d))) < 1e-2
    # numerical derivative agrees away from nothing in particular
    h = 1e-7
    fd = torus_diff(g(x + h), g(x - h)) / (2 * h)
    assert np.max(np.abs(fd - d)) < 1e-3


def test_smooth_map_fixed_points():
    g = smooth_pl_map(build_pl_map(A))
    assert g(0.0) == 0.0
    assert g(-1.0) == -1.0


def test_literal_g2_is_a_pure_argument_shift(literal):
    g1, g2 = literal.generators
    x = np.linspace(-1, 1, 1001)
    np.testing.assert_allclose(g2(x), g1(wrap(x - SHIFT_G2)), atol=1e-15)
    # no fixed points: displacement stays near -2/13
    assert np.max(np.abs(g2.displacement(x) + SHIFT_G2)) <= A / 2 + 1e-12


def test_conjugate_g2_fixed_points(conjugate):
    _, g2 = conjugate.generators
    assert g2(2 / 13) == pytest.approx(2 / 13, abs=1e-15)
    assert g2(wrap(15 / 13)) == pytest.approx(-11 / 13, abs=1e-15)
    assert g2.sup_gap == pytest.approx(A / 2)


def test_certified_gap_dominates_sweep(conjugate):
    for g in conjugate.generators:
        x = np.linspace(-1, 1, 2_000_001)
        assert np.max(np.abs(g.displacement(x))) <= g.sup_gap + 1e-15
    gap, der = c1_gap_to_identity(IdentityCircleMap())
    assert gap == 0.0 and der == 1.0


def test_a0_budget():
    assert a0_for_budget(1.0) == pytest.approx(1 / 27)
    assert a0_for_budget(1e-4) == pytest.approx(9e-5)
    with pytest.raises(DomainError):
        a0_for_budget(0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 0.999999), st.booleans())
def test_inverse_branch_roundtrip(y, conj):
    g = build_ifs(k=1.0, conjugate=conj).generators[1]
    x = inverse_branch(g, y)
    assert abs(torus_diff(g(x), y)) < 1e-11


def test_quadratic_table_reproduces_map(conjugate):
    for g in conjugate.generators:
        e, c = g.quadratic_table()
        z = np.linspace(-1, 1, 100_001)[:-1]
        i = np.searchsorted(e, z, side="right") - 1
        t = z - e[i]
        np.testing.assert_allclose(c[i, 0] + c[i, 1] * t + c[i, 2] * t * t, g._base(z), atol=1e-15)


def test_expanding_and_contraction_regions():
    g = smooth_pl_map(build_pl_map(A))
    start, length = g.expanding_arc()
    assert start < 0 < start + length
    assert length < 2 * A + 2 * g.band
    c0, cl = g.contraction_region()
    assert cl == pytest.approx(2 - length)


def test_literal_family_minimal_on_examples(literal):
    for center in (-0.7, 0.1, 0.5, 0.93):
        res = check_minimality(literal, (center, 0.02), max_steps=200)
        assert res.covered, res.reason
        assert res.measure_history[-1] == pytest.approx(2.0)
        assert all(b >= a - 1e-12 for a, b in zip(res.measure_history, res.measure_history[1:]))


def test_full_arc_is_covered_at_step_zero(literal):
    res = check_minimality(literal, (0.0, 2.0))
    assert res.covered and res.steps == 0


def test_conjugate_family_is_not_minimal(conjugate):
    # arc between repeller 0 and attractor 1 of g1 that avoids [1, 15/13]:
    # its complement is forward invariant, so the preimage union stalls
    res = check_minimality(conjugate, (0.5, 0.02), max_steps=400)
    assert not res.covered
    assert res.reason == "union stopped growing"


def test_contraction_cover(literal):
    rep = contraction_cover_check(literal, 1e-4, 1e-3)
    assert rep["pass"]
    assert rep["worst_min_derivative"] < 0.999


def test_identity_pair_fails_cover():
    ident = IdentityCircleMap()
    fam = IFSFamily((ident, ident))
    assert not contraction_cover_check(fam, 1e-3, 1e-3)["pass"]


def test_make_g2_keeps_shape():
    g1 = smooth_pl_map(build_pl_map(A))
    g2 = make_g2(g1, conjugate=True)
    assert g2.sup_derivative == g1.sup_derivative
    assert g2.shift == pytest.approx(SHIFT_G2)
