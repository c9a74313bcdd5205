"""Verification suites and experiments shared by the CLI and the acceptance tests.

Every function takes resolved construction parameters and returns a
JSON-ready dict with a boolean "pass" entry.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import cone_analysis as ca
from . import orbit_lab as ol
from . import singular as sg
from .circle_ifs import build_ifs, c1_gap_to_identity, check_minimality, contraction_cover_check
from .torus_core import ConeSpec, standard_cubes
from .torus_maps import EXPANSION, ConstructionParams, SurgeryMap, build_maps, build_phi, build_psi, build_torus_ifs, build_u


def suite_ifs(P: ConstructionParams, seed: int = 0, arcs: int = 100, min_length: float = 0.02,
              max_steps: int = 200, **_) -> dict:
    """Greedy preimage coverage for random arcs plus the contraction-region cover,
    on the standalone family (k = 1). The torus fiber family is reported too."""
    fam = build_ifs(k=1.0)
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-1, 1, arcs)
    lengths = rng.uniform(min_length, 4 * min_length, arcs)
    runs = [check_minimality(fam, (float(c), float(L)), max_steps=max_steps) for c, L in zip(centers, lengths)]
    steps = [r.steps for r in runs]
    cover = contraction_cover_check(fam, 1e-4, 1e-3)
    torus_fam = build_torus_ifs(P)
    gaps = [c1_gap_to_identity(g) for g in torus_fam.generators]
    ok = all(r.covered for r in runs) and cover["pass"]
    return {
        "pass": bool(ok),
        "arcs": arcs,
        "covered": int(sum(r.covered for r in runs)),
        "max_steps_used": int(max(steps)),
        "failures": [(float(c), float(L), r.reason) for c, L, r in zip(centers, lengths, runs) if not r.covered],
        "contraction_cover": cover,
        "torus_fiber_family": {
            "a0": P.a0,
            "sup_gap": [g[0] for g in gaps],
            "sup_derivative": [g[1] for g in gaps],
            "gap_within_budget": bool(all(g[0] < P.k / 2 + 1e-15 for g in gaps)),
        },
    }


def suite_profiles(P: ConstructionParams, seed: int = 0, **_) -> dict:
    """Plateau and support of u, the gradient bound m_b, and the pinned values of phi, psi."""
    u, grad = build_u(P)
    rng = np.random.default_rng(seed)
    n1 = P.n - 1
    cubes = standard_cubes(n1, P.epsilon)
    checks = {}
    for name in ("K0", "K1"):
        c = cubes[name]
        x = c.lo + rng.random((2000, n1)) * (c.hi - c.lo)
        checks[f"u = 1 on {name}"] = bool(np.all(np.abs(u(x) - 1) < 1e-15))
    x = rng.uniform(-1, 1, (20000, n1))
    off = ~(cubes["K0eps"].contains(x) | cubes["K1eps"].contains(x))
    checks["u = 0 off K^eps"] = bool(np.all(u(x[off]) == 0))
    # gradient bound, sampled inside the transition shells
    xs = []
    for name in ("K0eps", "K1eps"):
        c = cubes[name]
        xs.append(c.lo + rng.random((20000, n1)) * (c.hi - c.lo))
    xs = np.vstack(xs)
    gmax = float(np.max(np.linalg.norm(grad(xs), axis=-1)))
    checks["sup|grad u| <= m_b"] = gmax <= P.m_b * (1 + 1e-12)
    phi, psi = build_phi(P), build_psi(P)
    checks["phi(1/4) = 0"] = phi.exact(Fraction(1, 4)) == 0
    checks["phi'(1/4) = 1/2"] = phi.exact_derivative(Fraction(1, 4)) == Fraction(1, 2)
    checks["psi(1/16) = 2"] = psi.exact(Fraction(1, 16)) == 2
    checks["sup|phi| <= delta"] = phi.sup_value <= P.delta
    checks["1 - phi'(1/4) psi(1/16) = 0"] = 1 - phi.exact_derivative(Fraction(1, 4)) * psi.exact(Fraction(1, 16)) == 0
    return {"pass": all(checks.values()), "checks": checks, "sampled_grad_max": gmax, "m_b": P.m_b}


def suite_cones(P: ConstructionParams, seed: int = 0, tasks: int = 1, points: int = 10_000, **_) -> dict:
    maps = build_maps(P)
    cone = ConeSpec(P.kappa, P.n - 1)
    reps = {k: ca.verify_cone_invariance(maps[k], cone, points, 10, seed=seed, tasks=tasks).to_dict()
            for k in ("A", "f", "F")}
    return {"pass": all(r["pass"] for r in reps.values()), "maps": reps}


def suite_expansion(P: ConstructionParams, seed: int = 0, tasks: int = 1, samples: int = 100_000, **_) -> dict:
    maps = build_maps(P)
    cone = ConeSpec(P.kappa, P.n - 1)
    reps = {k: ca.verify_expansion(maps[k], cone, samples, seed=seed, tasks=tasks).to_dict() for k in ("f", "F")}
    ok = all(r["worst_expansion"] > 4 for r in reps.values())
    return {"pass": bool(ok), "threshold": 4.0, "maps": reps}


def disk_centers(P: ConstructionParams) -> dict[str, list[float]]:
    n = P.n
    return {
        "generic": [0.5] * (n - 1) + [0.3],
        "in K0": [0.0] * (n - 1) + [0.2],
        "at p": P.point_p.tolist(),
    }


def suite_disks(P: ConstructionParams, radius: float = 0.01, iterations: int = 3, **_) -> dict:
    maps = build_maps(P)
    out = {}
    for k in ("f", "F"):
        for name, c in disk_centers(P).items():
            out[f"{k} {name}"] = ca.disk_growth_check(maps[k], c, radius, iterations).to_dict()
    return {"pass": all(v["pass"] for v in out.values()), "runs": out}


def suite_blender(P: ConstructionParams, **_) -> dict:
    return ca.blender_covering_check(Fraction(P.epsilon).limit_denominator(10 ** 9), P.n, build_torus_ifs(P))


def suite_fixed_points(P: ConstructionParams, **_) -> dict:
    F = build_maps(P)["F"]
    seeds = ca.fixed_point_seeds(P.n)
    found = ca.find_and_classify_fixed_points(F, [s for s, _ in seeds.values()])
    rows = {}
    for (name, (_, expect)), fp in zip(seeds.items(), found):
        d = fp.to_dict()
        d["expected"] = expect
        d["pass"] = fp.converged and fp.residual <= 1e-9 and fp.kind == expect
        rows[name] = d
    return {"pass": all(r["pass"] for r in rows.values()), "fixed_points": rows}


def determinant_check(n: int, h: float = 1e-8) -> dict:
    P = ConstructionParams(n=n).resolved()
    F = SurgeryMap(P)
    scale = Fraction(EXPANSION) ** (n - 1)
    out = {}
    d = Fraction(P.delta)
    base = [Fraction(c) for c in P.point_p]
    for name, q, off, expect in (("q1", P.q1(), d / 4, Fraction(5, 2) * scale),
                                 ("q2", P.q2(), d / 8, -scale)):
        exact = F.det_exact(base[:-1] + [Fraction(1, 4) + off])
        fd = float(np.linalg.det(ca.fd_jacobian(F, q, h)))
        rel = abs(fd - float(expect)) / abs(float(expect))
        out[name] = {
            "exact": str(exact),
            "expected": str(expect),
            "exact_match": exact == expect,
            "fd_det": fd,
            "fd_relative_error": rel,
            "pass": bool(exact == expect and rel <= 1e-5),
        }
    p = P.point_p
    out["p critical"] = {"exact": str(F.det_exact([Fraction(c) for c in p])),
                         "pass": F.det_exact([Fraction(c) for c in p]) == 0}
    return out


def suite_determinants(P: ConstructionParams, dims=(2, 3, 4, 5), **_) -> dict:
    res = {str(n): determinant_check(n) for n in dims}
    ok = all(v["pass"] for r in res.values() for v in r.values())
    return {"pass": bool(ok), "by_dimension": res}


def suite_jacobians(P: ConstructionParams, seed: int = 0, points: int = 1000, h: float = 1e-6, **_) -> dict:
    """Analytic vs central-difference Jacobians at uniform random points (gating).

    A stratified sample concentrated on the fillet bands and bump shells is
    reported alongside: there a step h straddles jumps of the second
    derivative, so the difference quotient itself is off by about h |jump| / 4.
    """
    maps = build_maps(P)
    rng = np.random.default_rng(seed)
    out = {}
    for k, m in maps.items():
        x = rng.uniform(-1, 1, (points, P.n))
        err = ca.jacobian_agreement(m, x, h)
        i = int(np.argmax(err))
        xs = ca.stratified_points(P.n, points, rng, P)
        es = ca.jacobian_agreement(m, xs, h)
        j = int(np.argmax(es))
        out[k] = {
            "max_relative_error": float(err[i]),
            "witness": x[i].tolist(),
            "pass": bool(err[i] <= 1e-5),
            "stratified_max_relative_error": float(es[j]),
            "stratified_witness": xs[j].tolist(),
        }
    return {"pass": all(v["pass"] for v in out.values()), "maps": out, "h": h}


SUITES = {
    "ifs": suite_ifs,
    "profiles": suite_profiles,
    "cones": suite_cones,
    "expansion": suite_expansion,
    "disks": suite_disks,
    "blender": suite_blender,
    "fixed-points": suite_fixed_points,
    "determinants": suite_determinants,
    "jacobians": suite_jacobians,
}


# ---------------------------------------------------------------------------
# experiments


def experiment_density(P: ConstructionParams, seed: int = 0, seeds: int = 5, steps: int | None = None,
                       grid: int | None = None, tasks: int = 1, target: float = 0.95, need: int = 4, **_) -> dict:
    steps = steps or (10 ** 7 if P.n == 2 else 10 ** 6)
    grid = grid or (100 if P.n == 2 else 32)
    maps = build_maps(P)
    seed_list = [seed + i for i in range(seeds)]
    F = ol.density_experiment(maps["F"], seed_list, steps, grid, tasks)
    A = ol.density_experiment(maps["A"], seed_list[:1], steps, grid, tasks)[0]
    hits = sum(r.fraction >= target for r in F)
    control_ok = A.fraction <= 1.1 / grid if P.n == 2 else True
    return {
        "pass": bool(hits >= need and control_ok),
        "target": target,
        "seeds_meeting_target": int(hits),
        "required": need,
        "F": [r.to_dict() for r in F],
        "control_A": A.to_dict(),
        "control_ok": bool(control_ok),
    }


def random_box(rng, n, side):
    lo = rng.uniform(-1, 1 - side, n)
    return lo, lo + side


def experiment_hit(P: ConstructionParams, seed: int = 0, pairs: int = 5, side: float = 0.05,
                   max_iter: int = 10_000, map_name: str = "F", **_) -> dict:
    m = build_maps(P)[map_name]
    rng = np.random.default_rng(seed)
    runs = []
    for _ in range(pairs):
        U, V = random_box(rng, P.n, side), random_box(rng, P.n, side)
        r = ol.two_set_hitting(m, U, V, max_iter)
        d = r.to_dict()
        d["U"] = [U[0].tolist(), U[1].tolist()]
        d["V"] = [V[0].tolist(), V[1].tolist()]
        runs.append(d)
    return {"pass": all(r["hit"] for r in runs), "map": map_name, "runs": runs}


def experiment_persist(P: ConstructionParams, seed: int = 0, count: int = 200, size: float = 0.5,
                       tasks: int = 1, **_) -> dict:
    res = sg.persistence_harness(P, count, size, seed, tasks)
    res["witnesses"] = [w.to_dict() for w in res["witnesses"]]
    adv = sg.persistence_check(sg.adversarial_perturbation(P, min(0.99, max(size, 0.99))), P)
    res["adversarial_0.99"] = adv.to_dict()
    res["pass"] = bool(res["pass"] and adv.ok)
    return res


def experiment_minimality(P: ConstructionParams, seed: int = 0, arcs: int = 100, min_length: float = 0.02,
                          max_steps: int = 200, **_) -> dict:
    res = suite_ifs(P, seed=seed, arcs=arcs, min_length=min_length, max_steps=max_steps)
    torus = build_torus_ifs(P)
    probe = check_minimality(torus, (0.5, min_length), max_steps=max_steps)
    res["torus_fiber_family_probe"] = {"center": 0.5, "length": min_length, "covered": probe.covered,
                                       "steps": probe.steps, "reason": probe.reason,
                                       "final_measure": probe.measure_history[-1]}
    return res


EXPERIMENTS = {
    "density": experiment_density,
    "hit": experiment_hit,
    "persist": experiment_persist,
    "minimality": experiment_minimality,
}
