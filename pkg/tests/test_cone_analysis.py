import numpy as np
import pytest

from toruslab import cone_analysis as ca
from toruslab.perturbations import apply, make_perturbation
from toruslab.torus_core import ConeSpec, DomainError


def test_fd_jacobian_of_A(maps2):
    J = ca.fd_jacobian(maps2["A"], np.array([0.3, -0.2]))
    np.testing.assert_allclose(J, np.diag([14.0, 1.0]), atol=1e-8)
    with pytest.raises(DomainError):
        ca.fd_jacobian(maps2["A"], np.zeros(2), h=1e-2)


def test_cone_report_for_A_is_exact(maps2, params2):
    rep = ca.verify_cone_invariance(maps2["A"], ConeSpec(params2.kappa, 1), 500)
    assert rep.worst_ratio == pytest.approx(params2.kappa / 14)
    assert rep.worst_expansion == pytest.approx(14 / np.sqrt(1 + params2.kappa ** 2), rel=1e-3)
    assert rep.passed


def test_cone_report_independent_of_tasks(maps2, params2):
    cone = ConeSpec(params2.kappa, 1)
    a = ca.verify_cone_invariance(maps2["F"], cone, 2000, seed=5, tasks=1).to_dict()
    b = ca.verify_cone_invariance(maps2["F"], cone, 2000, seed=5, tasks=4).to_dict()
    assert a == b


def test_cone_fails_for_a_shearing_perturbation(maps2, params2):
    # a large fiber perturbation destroys the cone estimate and is reported with a witness
    m = apply(maps2["f"], make_perturbation(0, 10.0))
    rep = ca.verify_cone_invariance(m, ConeSpec(params2.kappa, 1), 1000)
    assert not rep.passed
    assert len(rep.witness_point) == 2 and len(rep.witness_vector) == 2


def test_stratified_points_cover_strata(params2):
    pts = ca.stratified_points(2, 4000, np.random.default_rng(0), params2)
    in_ball = np.linalg.norm(pts - params2.point_p, axis=1) < params2.r
    near_cubes = np.abs(pts[:, 0]) < 0.05
    assert in_ball.mean() > 0.2 and near_cubes.mean() > 0.1


def test_fixed_points_inventory(maps2):
    seeds = ca.fixed_point_seeds(2)
    found = ca.find_and_classify_fixed_points(maps2["F"], [s for s, _ in seeds.values()])
    assert [fp.kind for fp in found] == [k for _, k in seeds.values()]
    assert all(fp.residual <= 1e-9 for fp in found)
    np.testing.assert_allclose(found[1].point, [2 / 13, -11 / 13], atol=1e-12)


def test_classify():
    assert ca.classify([0.5, 14]) == "saddle"
    assert ca.classify([1.5, 14]) == "repeller"
    assert ca.classify([0.2, 0.3]) == "attractor"
    assert ca.classify([1.0, 14]) == "nonhyperbolic"


def test_disk_growth(maps2):
    rep = ca.disk_growth_check(maps2["f"], [0.5, 0.3], 0.01, 3)
    assert rep.passed
    assert rep.ratios[0] >= 4
    assert rep.estimates[0] == pytest.approx(0.01, abs=0.003)


def test_blender_covering_exact():
    rep = ca.blender_covering_check()
    assert rep["pass"] and all(rep["checks"].values())
    bad = ca.blender_covering_check(epsilon=0.05)
    assert not bad["pass"] and bad["reason"].startswith("precondition")


def test_invariant_circles_for_f(maps2):
    for branch, c in ((0, 0.0), (1, 2 / 13)):
        circ = ca.invariant_circle_approx(maps2["f"], depth=5, fibers=100, branch=branch)
        assert not circ.flagged.any()
        assert circ.max_horizontal_deviation <= 14.0 ** -5
        assert ca.invariance_defect(maps2["f"], circ) <= 14.0 ** -5


def test_inverse_branch_map_roundtrip(maps2):
    w = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    for branch in (0, 1):
        z, ok = ca.inverse_branch_map(maps2["F"], w, branch)
        assert ok.all()
        np.testing.assert_allclose(maps2["F"](z), w, atol=1e-11)


def test_tabulated_circle_map_inverse():
    x = np.linspace(-1, 1, 801)[:-1]
    g = ca.TabulatedCircleMap(x, np.mod(x + 0.3 + 0.05 * np.sin(np.pi * x) + 1, 2) - 1)
    y = np.linspace(-0.99, 0.99, 37)
    np.testing.assert_allclose(g(g.inverse(y)), y, atol=1e-4)


def test_preimage_projection_full_box_is_immediate(maps2):
    res = ca.preimage_projection_cover(maps2["f"], (0.0, 2.0))
    assert res.covered and res.steps == 0


def test_preimage_projection_grows(maps2):
    res = ca.preimage_projection_cover(maps2["f"], (1.0, 0.05), max_depth=50, fibers=400)
    assert res.measure_history[-1] > res.measure_history[0]
