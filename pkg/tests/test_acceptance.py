"""Acceptance criteria at their stated tolerances. Run with ``pytest tests/test_acceptance.py -v``."""

from fractions import Fraction

import numpy as np
import pytest

from toruslab import cone_analysis as ca
from toruslab import suites
from toruslab.perturbations import apply, make_perturbation
from toruslab.torus_core import ConeSpec
from toruslab.torus_maps import ConstructionParams, build_maps, build_phi, build_psi


def _params(n):
    return ConstructionParams(n=n).resolved()


def test_determinant_identities(verdict):
    res = suites.suite_determinants(_params(2), dims=(2, 3, 4, 5))
    worst = max(v["fd_relative_error"] for r in res["by_dimension"].values()
                for k, v in r.items() if k in ("q1", "q2"))
    assert verdict(1, res["pass"], f"det at q1, q2 exact for n=2..5, worst FD relative error {worst:.2e}")


def test_critical_point_at_p(verdict):
    P = _params(2)
    phi, psi = build_phi(P), build_psi(P)
    val = 1 - phi.exact_derivative(Fraction(1, 4)) * psi.exact(Fraction(1, 16))
    F = build_maps(P)["F"]
    det_p = F.det_exact([Fraction(c) for c in P.point_p])
    assert verdict(2, val == 0 and det_p == 0, f"1 - phi'(1/4) psi(1/16) = {val}, det at p = {det_p}")


@pytest.mark.parametrize("n", [2, 3])
def test_cone_invariance(verdict, n):
    P = _params(n)
    res = suites.suite_cones(P, seed=0, tasks=8, points=10_000)
    f, F = res["maps"]["f"], res["maps"]["F"]
    ok = f["pass"] and F["pass"] and f["samples"] >= 10 ** 5
    assert verdict(3, ok, f"n={n} worst ratio f {f['worst_ratio']:.4g} (<= {f['bound']:.4g}), "
                          f"F {F['worst_ratio']:.4g} (< {F['bound']:.4g})")


@pytest.mark.parametrize("n", [2, 3])
def test_expansion(verdict, n):
    res = suites.suite_expansion(_params(n), seed=1, tasks=8, samples=100_000)
    f, F = res["maps"]["f"], res["maps"]["F"]
    ok = res["pass"] and min(f["samples"], F["samples"]) >= 10 ** 5
    assert verdict(4, ok, f"n={n} min expansion f {f['worst_expansion']:.4f}, F {F['worst_expansion']:.4f} (> 4)")


@pytest.mark.parametrize("n", [2, 3])
def test_inradius_growth(verdict, n):
    res = suites.suite_disks(_params(n), radius=0.01, iterations=3)
    runs = res["runs"].values()
    # steps that end in a fully covered head torus pass by saturation
    growth = [q for r in runs for q, sat in zip(r["ratios"], r["saturated"]) if not sat]
    n_sat = sum(sat for r in runs for sat in r["saturated"])
    worst = min(growth) if growth else float("nan")
    assert verdict(5, res["pass"], f"n={n} {len(res['runs'])} disks under f and F, worst unsaturated factor "
                                   f"{worst:.3g} (>= 4), {n_sat} steps saturated")


def test_blender_covering(verdict):
    res = suites.suite_blender(_params(2))
    assert verdict(6, res["pass"], f"exact inclusions at eps=1/1400: {sum(res['checks'].values())}/{len(res['checks'])}")


def test_ifs_minimality(verdict):
    res = suites.suite_ifs(_params(2), seed=0, arcs=100, min_length=0.02, max_steps=200)
    cov = res["contraction_cover"]
    assert verdict(7, res["pass"], f"{res['covered']}/100 arcs covered, max {res['max_steps_used']} steps; "
                                   f"contraction cover {'ok' if cov['pass'] else 'failed'}")


@pytest.mark.parametrize("n", [2, 3])
def test_persistence(verdict, n):
    res = suites.experiment_persist(_params(n), seed=0, count=200, size=0.5, tasks=8)
    worst = max(abs(w["det"]) for w in res["witnesses"]) if res["witnesses"] else float("nan")
    ok = res["pass"] and not res["failures"] and len(res["witnesses"]) == 200
    assert verdict(8, ok, f"n={n} 200 perturbations, {len(res['failures'])} failures, "
                          f"worst |det| {worst:.2e} (<= {1e-8 * 14.0 ** (n - 1):.1e})")


def test_fixed_point_inventory(verdict):
    res = suites.suite_fixed_points(_params(2))
    fps = res["fixed_points"].values()
    kinds = "/".join(r["kind"] for r in fps)
    worst = max(r["residual"] for r in fps)
    assert verdict(9, res["pass"], f"kinds {kinds}, worst residual {worst:.1e}")


def test_jacobian_oracle(verdict):
    res = suites.suite_jacobians(_params(2), seed=0, points=1000, h=1e-6)
    errs = ", ".join(f"{k} {v['max_relative_error']:.1e}" for k, v in res["maps"].items())
    assert verdict(10, res["pass"], f"1000 points per map, max relative error {errs} (<= 1e-5)")


def test_transitivity_evidence(verdict):
    res = suites.experiment_density(_params(2), seed=0, seeds=5, steps=10 ** 7, grid=100, tasks=8)
    fr = ", ".join(f"{r['fraction']:.3f}" for r in res["F"])
    assert verdict(11, res["pass"], f"F box fractions [{fr}], {res['seeds_meeting_target']}/5 >= 0.95 (need 4); "
                                    f"control A {res['control_A']['fraction']:.4f} (<= 0.011)")


@pytest.mark.parametrize("n", [2, 3])
def test_robust_cone_field(verdict, n):
    P = _params(n)
    maps = build_maps(P)
    cone = ConeSpec(P.kappa, n - 1)
    bounds = {"f": (5 * P.kappa / 14 + 1e-9, True), "F": (P.kappa, False)}
    worst_ratio, worst_exp, failures = 0.0, np.inf, []
    for seed in range(10):
        field = make_perturbation(seed, 0.05, n=n)
        for k in ("f", "F"):
            m = apply(maps[k], field)
            b, inc = bounds[k]
            cr = ca.verify_cone_invariance(m, cone, 10_000, 10, seed=seed, tasks=8, bound=b, inclusive=inc)
            ex = ca.verify_expansion(m, cone, 100_000, seed=seed + 100, tasks=8, bound=b, inclusive=inc)
            worst_ratio = max(worst_ratio, cr.worst_ratio / b)
            worst_exp = min(worst_exp, ex.worst_expansion)
            if not (cr.passed and ex.passed and ex.worst_expansion > 4):
                failures.append((seed, k))
    assert verdict(12, not failures, f"n={n} 10 perturbations of size 0.05, {len(failures)} failures, "
                                     f"worst ratio/bound {worst_ratio:.3f}, min expansion {worst_exp:.3f}")
