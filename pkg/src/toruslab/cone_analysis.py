"""Numerical certification of cone fields, expansion, disk growth, blender
covering, fixed points, invariant circles and preimage projections."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .circle_ifs import IFSFamily, MinimalityResult, check_minimality
from .torus_core import ConeSpec, DomainError, grid_inradius, rasterize, standard_cubes, torus_diff, wrap
from .torus_maps import EXPANSION, ConstructionParams, StructuredMap, TorusMap

N_SHARDS = 8


def _params_of(m: TorusMap) -> ConstructionParams | None:
    base = getattr(m, "base", m)
    return getattr(base, "params", None)


def _base_tag(m: TorusMap) -> str:
    return getattr(getattr(m, "base", None), "tag", m.tag)


# ---------------------------------------------------------------------------
# finite differences


def fd_jacobian(m: TorusMap, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian with torus-aware output differences."""
    if not 1e-8 <= h <= 1e-3:
        raise DomainError("h must lie in [1e-8, 1e-3]")
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    J = np.empty(x.shape[:-1] + (n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[..., :, j] = torus_diff(m(x + e), m(x - e)) / (2 * h)
    return J


def jacobian_agreement(m: TorusMap, x, h: float = 1e-6) -> np.ndarray:
    """Per-point relative error max|J - J_fd| / max(max|J|, 1)."""
    Ja = m.jacobian(x)
    Jf = fd_jacobian(m, x, h)
    scale = np.maximum(np.abs(Ja).max(axis=(-2, -1)), 1.0)
    return np.abs(Ja - Jf).max(axis=(-2, -1)) / scale


# ---------------------------------------------------------------------------
# sampling


def stratified_points(n: int, count: int, rng: np.random.Generator, params: ConstructionParams | None):
    """Half uniform; the rest split between the bump shells of K^eps x S^1 and B(p, r)."""
    if params is None:
        return rng.uniform(-1, 1, size=(count, n))
    P = params.resolved()
    n_uni = count // 2
    n_shell = (count - n_uni) // 2
    n_ball = count - n_uni - n_shell
    pts = [rng.uniform(-1, 1, size=(n_uni, n))]

    # shells: head in the fattened cube with at least one coordinate in the transition band
    lo = np.where(rng.random(n_shell) < 0.5, -1 / 28, 3 / 28)
    hi = lo + 2 / 28
    head = lo[:, None] - P.epsilon + rng.random((n_shell, n - 1)) * (hi - lo + 2 * P.epsilon)[:, None]
    j = rng.integers(0, n - 1, size=n_shell)
    side = rng.random(n_shell) < 0.5
    band = rng.random(n_shell) * P.epsilon
    head[np.arange(n_shell), j] = np.where(side, lo - band, hi + band)
    # fiber coordinate near the kinks of g1 / g2 where |g - Id| peaks, or uniform
    kinks = np.array([P.a0, -P.a0, 2 / 13 + P.a0, 2 / 13 - P.a0])
    y = np.where(rng.random(n_shell) < 0.5,
                 kinks[rng.integers(0, 4, n_shell)] + rng.normal(0, P.a0, n_shell),
                 rng.uniform(-1, 1, n_shell))
    pts.append(np.column_stack([head, y]))

    d = rng.standard_normal((n_ball, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    rad = P.r * rng.random(n_ball) ** (1 / n)
    pts.append(P.point_p + d * rad[:, None])
    return wrap(np.vstack(pts))


def cone_vectors(J: np.ndarray, kappa: float, per_point: int, rng: np.random.Generator) -> np.ndarray:
    """Unit vectors in the closed cone: one analytic worst case, the rest on
    the boundary (ratio kappa) with a few interior ones mixed in."""
    m, n, _ = J.shape
    V = np.empty((m, per_point, n))
    # worst boundary vector for the last row when the head block is 14 I
    a = J[:, -1, :-1]
    an = np.linalg.norm(a, axis=1)
    h = np.where(an[:, None] > 0, a / np.where(an > 0, an, 1.0)[:, None], 0.0)
    h[an == 0, 0] = 1.0
    sgn = np.sign(J[:, -1, -1])
    sgn[sgn == 0] = 1.0
    V[:, 0, :-1] = h
    V[:, 0, -1] = kappa * sgn
    k = per_point - 1
    if k > 0:
        hv = rng.standard_normal((m, k, n - 1))
        hv /= np.linalg.norm(hv, axis=2, keepdims=True)
        ratio = np.full((m, k), kappa)
        ratio[:, k // 2 + 1:] *= rng.random((m, k - k // 2 - 1))
        V[:, 1:, :-1] = hv
        V[:, 1:, -1] = ratio * np.where(rng.random((m, k)) < 0.5, -1.0, 1.0)
    V /= np.linalg.norm(V, axis=2, keepdims=True)
    return V


@dataclass
class ConeReport:
    map_tag: str
    samples: int
    worst_ratio: float
    worst_expansion: float
    bound: float
    passed: bool
    inclusive: bool = False
    witness_point: list = field(default_factory=list)
    witness_vector: list = field(default_factory=list)
    expansion_witness_point: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def default_ratio_bound(m: TorusMap, kappa: float) -> tuple[float, bool]:
    """(bound, inclusive) for the worst cone ratio of a map."""
    if m.tag == "A":
        return kappa / EXPANSION + 1e-12, True
    if m.tag == "f":
        return 5 * kappa / EXPANSION + 1e-9, True
    return kappa, False


def _shard(m, cone, points, per_point, seed_seq, params):
    rng = np.random.default_rng(seed_seq)
    X = stratified_points(m.n, points, rng, params)
    J = m.jacobian(X)
    V = cone_vectors(J, cone.parameter, per_point, rng)
    W = np.einsum("mij,mkj->mki", J, V)
    k = cone.split_index
    head = np.linalg.norm(W[..., :k], axis=-1)
    tail = np.linalg.norm(W[..., k:], axis=-1)
    ratio = np.where(head > 0, tail / np.where(head > 0, head, 1.0), np.inf)
    expn = np.linalg.norm(W, axis=-1)
    i_r = np.unravel_index(np.argmax(ratio), ratio.shape)
    i_e = np.unravel_index(np.argmin(expn), expn.shape)
    return (float(ratio[i_r]), X[i_r[0]].tolist(), V[i_r].tolist(),
            float(expn[i_e]), X[i_e[0]].tolist())


def cone_sweep(m: TorusMap, cone: ConeSpec, points: int = 10_000, vectors_per_point: int = 10,
               seed: int = 0, tasks: int = 1, bound: float | None = None, inclusive: bool | None = None,
               params: ConstructionParams | None = None) -> ConeReport:
    """Worst output cone ratio and worst expansion over stratified samples.

    Work is split into a fixed number of seeded shards and merged with max/min,
    so the report does not depend on ``tasks``.
    """
    params = params if params is not None else _params_of(m)
    seqs = np.random.SeedSequence(seed).spawn(N_SHARDS)
    sizes = [points // N_SHARDS + (1 if i < points % N_SHARDS else 0) for i in range(N_SHARDS)]
    jobs = [(m, cone, s, vectors_per_point, q, params) for s, q in zip(sizes, seqs) if s > 0]
    if tasks > 1:
        with ThreadPoolExecutor(tasks) as ex:
            parts = list(ex.map(lambda a: _shard(*a), jobs))
    else:
        parts = [_shard(*a) for a in jobs]
    worst = max(parts, key=lambda p: p[0])
    weak = min(parts, key=lambda p: p[3])
    if bound is None:
        bound, inc = default_ratio_bound(m, cone.parameter)
        inclusive = inc if inclusive is None else inclusive
    inclusive = bool(inclusive)
    ok_ratio = worst[0] <= bound if inclusive else worst[0] < bound
    extras = {}
    if params is not None:
        P = params.resolved()
        extras["stated_F_bound"] = (2 * P.m_psi * P.r * P.delta + 3 * cone.parameter) / EXPANSION
    extras["linear_expansion_floor"] = EXPANSION / np.sqrt(1 + cone.parameter ** 2)
    return ConeReport(m.tag, points * vectors_per_point, worst[0], weak[3], float(bound),
                      bool(ok_ratio and weak[3] > 4), inclusive, worst[1], worst[2], weak[4], extras)


def verify_cone_invariance(m: TorusMap, cone: ConeSpec, points: int = 10_000, vectors_per_point: int = 10,
                           **kw) -> ConeReport:
    return cone_sweep(m, cone, points, vectors_per_point, **kw)


def verify_expansion(m: TorusMap, cone: ConeSpec, samples: int = 100_000, seed: int = 0, **kw) -> ConeReport:
    per = 10
    return cone_sweep(m, cone, max(samples // per, 1), per, seed=seed, **kw)


# ---------------------------------------------------------------------------
# fixed points


@dataclass
class FixedPoint:
    seed: list
    point: list
    residual: float
    moduli: list
    kind: str
    converged: bool

    def to_dict(self):
        return asdict(self)


def classify(moduli, tol: float = 1e-6) -> str:
    moduli = np.asarray(moduli)
    if np.any(np.abs(moduli - 1) <= tol):
        return "nonhyperbolic"
    if np.all(moduli > 1):
        return "repeller"
    if np.all(moduli < 1):
        return "attractor"
    return "saddle"


def find_and_classify_fixed_points(m: TorusMap, seeds, tol: float = 1e-9, max_iter: int = 50) -> list[FixedPoint]:
    out = []
    for s in seeds:
        x = wrap(np.asarray(s, dtype=float))
        ok = False
        res = np.inf
        for _ in range(max_iter):
            r = torus_diff(m(x), x)
            res = float(np.max(np.abs(r)))
            if res <= tol:
                ok = True
                break
            J = m.jacobian(x) - np.eye(m.n)
            try:
                x = wrap(x - np.linalg.solve(J, r))
            except np.linalg.LinAlgError:
                break
        if not ok:
            out.append(FixedPoint(list(map(float, s)), x.tolist(), res, [], "unresolved", False))
            continue
        mod = np.sort(np.abs(np.linalg.eigvals(m.jacobian(x))))
        out.append(FixedPoint(list(map(float, s)), x.tolist(), res, mod.tolist(), classify(mod), True))
    return out


def fixed_point_seeds(n: int) -> dict[str, tuple[list[float], str]]:
    c = 2 / 13
    return {
        "saddle_0": ([0.0] * (n - 1) + [1.0], "saddle"),
        "saddle_2/13": ([c] * (n - 1) + [15 / 13], "saddle"),
        "repeller_0": ([0.0] * n, "repeller"),
        "repeller_2/13": ([c] * n, "repeller"),
    }


# ---------------------------------------------------------------------------
# disk growth


@dataclass
class DiskGrowth:
    estimates: list
    ratios: list
    saturated: list
    factor: float
    passed: bool

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def horizontal_disk(center, radius: float, resolution: float) -> np.ndarray:
    """Points of a flat (n-1)-disk {(c_h + t, c_y): |t| <= radius}."""
    center = np.asarray(center, dtype=float)
    k = center.size - 1
    step = resolution / 2
    ax = np.arange(-radius, radius + step / 2, step)
    grids = np.meshgrid(*([ax] * k), indexing="ij")
    T = np.stack([g.ravel() for g in grids], axis=1)
    T = T[np.linalg.norm(T, axis=1) <= radius]
    pts = np.empty((len(T), k + 1))
    pts[:, :-1] = center[:-1] + T
    pts[:, -1] = center[-1]
    return wrap(pts)


def _cells_with_fiber(pts: np.ndarray, resolution: float):
    """Occupied head cells with one representative fiber value each."""
    k = pts.shape[1] - 1
    cells = int(round(2.0 / resolution))
    idx = np.floor((wrap(pts[:, :-1]) + 1.0) / resolution).astype(np.int64) % cells
    flat = np.ravel_multi_index(tuple(idx.T), (cells,) * k)
    uniq, first = np.unique(flat, return_index=True)
    return uniq, pts[first, -1], cells


def _regrid_push(m: TorusMap, uniq, fib, cells, k, resolution, sub, chunk=4000):
    """Push sub-sampled occupied cells through m; return the image occupancy and fibers."""
    offs = (np.arange(sub) + 0.5) / sub
    sub_grid = np.stack([g.ravel() for g in np.meshgrid(*([offs] * k), indexing="ij")], axis=1)
    occ = np.zeros((cells,) * k, dtype=bool)
    reps = {}
    for s in range(0, len(uniq), chunk):
        u = uniq[s:s + chunk]
        base = np.stack(np.unravel_index(u, (cells,) * k), axis=1).astype(float)
        head = -1.0 + (base[:, None, :] + sub_grid[None, :, :]) * resolution
        y = np.broadcast_to(fib[s:s + chunk, None], head.shape[:2])
        pts = np.concatenate([head, y[..., None]], axis=-1).reshape(-1, k + 1)
        img = m(pts)
        iu, fy, _ = _cells_with_fiber(img, resolution)
        occ.flat[iu] = True
        for a, b in zip(iu.tolist(), fy.tolist()):
            reps.setdefault(a, b)
    keys = np.array(sorted(reps), dtype=np.int64)
    return occ, keys, np.array([reps[i] for i in keys.tolist()])


def disk_growth_check(m: TorusMap, center, radius: float = 0.01, iterations: int = 3,
                      resolution: float = 1 / 400, factor: float = 4.0, lipschitz: float = 15.0) -> DiskGrowth:
    """Push a flat disk forward, re-gridding each step, and track the inradius.

    Steps whose image saturates the torus (every head cell occupied) count as
    passing; once saturated the remaining steps are not pushed.
    """
    pts = horizontal_disk(center, radius, resolution)
    k = pts.shape[1] - 1
    uniq, fib, cells = _cells_with_fiber(pts, resolution)
    occ = np.zeros((cells,) * k, dtype=bool)
    occ.flat[uniq] = True
    est = [grid_inradius(occ, resolution)]
    sat = [bool(occ.all())]
    sub = int(np.ceil(lipschitz))
    for _ in range(iterations):
        if sat[-1]:
            est.append(est[-1])
            sat.append(True)
            continue
        occ, uniq, fib = _regrid_push(m, uniq, fib, cells, k, resolution, sub)
        est.append(grid_inradius(occ, resolution))
        sat.append(bool(occ.all()))
    ratios = [est[i + 1] / est[i] if est[i] > 0 else float("inf") for i in range(iterations)]
    ok = all(sat[i] or sat[i + 1] or ratios[i] >= factor for i in range(iterations))
    return DiskGrowth(est, ratios, sat, factor, bool(ok))


# ---------------------------------------------------------------------------
# blender covering (exact)


def _covers(image: tuple[Fraction, Fraction], target: tuple[Fraction, Fraction]) -> bool:
    """Does the interval ``image`` (length < 2) contain ``target`` modulo 2?"""
    lo, hi = image
    if hi - lo >= 2:
        return True
    tlo, thi = target
    shift = 2 * ((tlo - lo) // 2)
    lo, hi = lo + shift, hi + shift
    return lo <= tlo and thi <= hi


def blender_covering_check(epsilon=Fraction(1, 1400), n: int = 2, ifs: IFSFamily | None = None) -> dict:
    eps = Fraction(epsilon)
    half = Fraction(1, 2)
    target = (-half - eps, half + eps)
    K0 = (Fraction(-1, 28) - eps, Fraction(1, 28) + eps)
    K1 = (Fraction(3, 28) - eps, Fraction(5, 28) + eps)
    checks = {}
    checks["cubes_disjoint"] = K0[1] < K1[0]
    img0 = (EXPANSION * K0[0], EXPANSION * K0[1])
    img1 = (EXPANSION * K1[0], EXPANSION * K1[1])
    checks["14*K0eps covers target"] = _covers(img0, target)
    checks["14*K1eps covers target mod 2"] = _covers(img1, target)
    checks["Keps inside target"] = target[0] <= K0[0] and K1[1] <= target[1]
    if ifs is not None:
        x = np.linspace(-1, 1, 20_001)
        onto = []
        for g in ifs.generators:
            lift = x + g.displacement(x)
            onto.append(bool(np.all(np.diff(lift) > 0) and abs(lift[-1] - lift[0] - 2) < 1e-9))
        checks["fiber maps are degree-one diffeomorphisms"] = all(onto)
    passed = all(checks.values())
    reason = "" if checks["cubes_disjoint"] else "precondition: K0^eps and K1^eps overlap"
    return {
        "pass": bool(passed),
        "epsilon": str(eps),
        "n": n,
        "checks": {k: bool(v) for k, v in checks.items()},
        "images": {"K0eps": [str(v) for v in img0], "K1eps": [str(v) for v in img1]},
        "reason": reason,
    }


# ---------------------------------------------------------------------------
# inverse branches, invariant circles, preimage projections


BRANCH_CENTER = {0: 0.0, 1: 1 / 7}


def _seed_preimage(m: TorusMap, w: np.ndarray, branch: int) -> np.ndarray:
    """f-preimage of w in the chosen branch: head / 14 (+ 2/14), fiber by monotone inversion."""
    head = (w[..., :-1] + 2 * branch) / EXPANSION
    base = getattr(m, "base", m)
    y = w[..., -1].copy()
    if isinstance(base, StructuredMap):
        for _ in range(60):
            fy = base.fiber(head, y)
            _, gy = base.fiber_gradient(head, y)
            y = y - torus_diff(fy, w[..., -1]) / gy
    return np.concatenate([head, wrap(y)[..., None]], axis=-1)


def inverse_branch_map(m: TorusMap, w, branch: int = 0, tol: float = 1e-12, max_iter: int = 30):
    """Solve m(z) = w for z near the unperturbed preimage in branch 0 (K0) or 1 (K1).

    Returns (z, ok) with ok False where Newton failed.
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    z = _seed_preimage(m, w, branch)
    ok = np.zeros(len(w), dtype=bool)
    for _ in range(max_iter):
        r = torus_diff(m(z), w)
        err = np.max(np.abs(r), axis=1)
        ok = err <= tol
        if ok.all():
            break
        J = m.jacobian(z)
        step = np.linalg.solve(J, r[..., None])[..., 0]
        z = np.where(ok[:, None], z, wrap(z - step))
    ok &= np.all(np.isfinite(z), axis=1)
    return z, ok


@dataclass
class InvariantCircle:
    points: np.ndarray  # (fibers, n), sorted by fiber coordinate
    flagged: np.ndarray  # bool per fiber
    branch: int
    depth: int

    @property
    def max_horizontal_deviation(self) -> float:
        c = BRANCH_CENTER[self.branch] if self.branch == 0 else 2 / 13
        return float(np.max(np.abs(torus_diff(self.points[:, :-1], c))))


def invariant_circle_approx(m: TorusMap, depth: int = 8, fibers: int = 400, branch: int = 0) -> InvariantCircle:
    """Approximate the invariant circle inside K_branch x S^1 by pulling a
    vertical circle back ``depth`` times through the chosen inverse branch."""
    n = m.n
    c = 0.0 if branch == 0 else 2 / 13
    y = -1.0 + 2.0 * (np.arange(fibers) + 0.5) / fibers
    z = np.column_stack([np.full((fibers, n - 1), c), y])
    flagged = np.zeros(fibers, dtype=bool)
    for _ in range(depth):
        z, ok = inverse_branch_map(m, z, branch)
        flagged |= ~ok
    order = np.argsort(z[:, -1])
    return InvariantCircle(z[order], flagged[order], branch, depth)


def invariance_defect(m: TorusMap, circle: InvariantCircle) -> float:
    """Max horizontal distance between m(circle) and the circle at the image fiber."""
    pts = circle.points
    img = m(pts)
    ys = pts[:, -1]
    period_y = np.concatenate([ys - 2, ys, ys + 2])
    worst = 0.0
    for j in range(m.n - 1):
        h = pts[:, j]
        period_h = np.concatenate([h, h, h])
        pred = np.interp(img[:, -1], period_y, period_h)
        worst = max(worst, float(np.max(np.abs(torus_diff(img[:, j], pred)))))
    return worst


class TabulatedCircleMap:
    """Monotone degree-one circle map given by samples of its lift."""

    def __init__(self, x: np.ndarray, gx: np.ndarray):
        order = np.argsort(x)
        x = np.asarray(x)[order]
        gx = np.asarray(gx)[order]
        lift = gx.copy()
        lift[0] = gx[0]
        for i in range(1, len(x)):
            lift[i] = lift[i - 1] + torus_diff(gx[i], gx[i - 1])
        self.x = np.concatenate([x - 2, x, x + 2])
        self.lift = np.concatenate([lift - 2, lift, lift + 2])
        if np.any(np.diff(self.lift) <= 0):
            raise DomainError("tabulated circle map is not monotone")

    def __call__(self, x):
        return wrap(np.interp(wrap(x), self.x, self.lift))

    def inverse(self, y):
        y = np.asarray(wrap(y), dtype=float)
        shifts = np.round((self.lift[len(self.lift) // 3] - y) / 2.0) * 2.0
        return wrap(np.interp(y + shifts, self.lift, self.x))

    def displacement(self, x):
        return torus_diff(self(x), x)


def restricted_fiber_maps(m: TorusMap, depth: int = 8, fibers: int = 2000):
    """pi o m on the two invariant circles N (in K0) and N' (in K1)."""
    out = []
    for branch in (0, 1):
        circ = invariant_circle_approx(m, depth, fibers, branch)
        if circ.flagged.any():
            raise DomainError(f"Newton failed on {int(circ.flagged.sum())} fibers of branch {branch}")
        img = m(circ.points)
        out.append(TabulatedCircleMap(circ.points[:, -1], img[:, -1]))
    return out


def preimage_projection_cover(m: TorusMap, seed_box: tuple[float, float] = (1.0, 0.05),
                              max_depth: int = 200, depth: int = 8, fibers: int = 2000) -> MinimalityResult:
    """Depth at which the fiber projection of the accumulated preimages of a
    box around the saddle (0, seed_center) is the whole circle.

    Preimage components in K0 x S^1 and K1 x S^1 project through the fiber
    maps of m restricted to its invariant circles there, so the recursion is
    run on those two tabulated circle maps.
    """
    center, extent = seed_box
    if extent >= 2:
        return MinimalityResult(True, 0, [2.0], 0)
    h0, h1 = restricted_fiber_maps(m, depth, fibers)
    return check_minimality(IFSFamily((h0, h1)), (center, extent), max_steps=max_depth)
