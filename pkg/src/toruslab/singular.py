"""Critical set of the surgery map: sampling by sign-change bisection and
persistence of the sign change under C^1-small perturbations."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .perturbations import PerturbedMap, apply, make_perturbation
from .torus_core import DomainError, wrap
from .torus_maps import EXPANSION, ConstructionParams, SurgeryMap, TorusMap

BISECT_TOL = 1e-8


@dataclass
class CriticalWitness:
    point: list
    det: float
    positive: tuple  # (point, det > 0)
    negative: tuple  # (point, det < 0)
    residual: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return abs(self.det) <= self.tolerance and self.positive[1] > 0 > self.negative[1]

    def to_dict(self):
        d = asdict(self)
        d["ok"] = self.ok
        return d


@dataclass
class PersistenceFailure:
    det_q2: float
    det_q1: float
    c1_bound: float
    reason: str

    ok = False

    def to_dict(self):
        d = asdict(self)
        d["ok"] = False
        return d


def det_of(m: TorusMap, x) -> np.ndarray:
    """Determinant of the analytic Jacobian (closed form for structured maps)."""
    return m.det(np.asarray(x, dtype=float))


def bisect_segment(m: TorusMap, a, b, tol: float | None = None, max_iter: int = 200) -> CriticalWitness | None:
    """Bisect det along the straight segment a -> b (no wrapping of the parameter).

    Returns None when the endpoint determinants do not have opposite signs.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    tol = BISECT_TOL * EXPANSION ** (m.n - 1) if tol is None else tol
    da, db = float(det_of(m, a)), float(det_of(m, b))
    if not (da * db < 0):
        return None
    lo, hi, dlo = 0.0, 1.0, da
    t, d = 0.5, np.nan
    for _ in range(max_iter):
        t = 0.5 * (lo + hi)
        d = float(det_of(m, a + t * (b - a)))
        if abs(d) <= tol or hi - lo < 1e-17:
            break
        if (d < 0) == (dlo < 0):
            lo, dlo = t, d
        else:
            hi = t
    pos, neg = ((a, da), (b, db)) if da > 0 else ((b, db), (a, da))
    pt = wrap(a + t * (b - a))
    return CriticalWitness(pt.tolist(), d, (pos[0].tolist(), pos[1]), (neg[0].tolist(), neg[1]), abs(d), tol)


def critical_locus_sample(m: TorusMap, region, resolution: float = 0.005,
                          tol: float | None = None, max_points: int = 2_000_000) -> list[CriticalWitness]:
    """Witnesses on every grid edge of ``region`` whose endpoint dets change sign.

    ``region`` is either a box ``(lo, hi)`` of two n-vectors or a segment given
    as ``("segment", a, b)``.
    """
    if len(region) == 3 and region[0] == "segment":
        w = bisect_segment(m, region[1], region[2], tol)
        return [] if w is None else [w]
    lo, hi = (np.asarray(v, dtype=float) for v in region)
    if lo.shape != (m.n,) or np.any(hi < lo):
        raise DomainError("region must be a box (lo, hi) in R^n")
    counts = np.maximum(np.ceil((hi - lo) / resolution).astype(int) + 1, 1)
    if np.prod(counts) > max_points:
        raise DomainError(f"grid has {int(np.prod(counts))} points, over the limit {max_points}")
    axes = [np.linspace(lo[i], hi[i], counts[i]) for i in range(m.n)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    D = det_of(m, grid.reshape(-1, m.n)).reshape(grid.shape[:-1])
    out = []
    for ax in range(m.n):
        if counts[ax] < 2:
            continue
        s0 = [slice(None)] * m.n
        s1 = [slice(None)] * m.n
        s0[ax] = slice(0, -1)
        s1[ax] = slice(1, None)
        flips = np.argwhere(D[tuple(s0)] * D[tuple(s1)] < 0)
        for idx in flips:
            j = tuple(idx)
            k = list(idx)
            k[ax] += 1
            w = bisect_segment(m, grid[j], grid[tuple(k)], tol)
            if w is not None:
                out.append(w)
    return out


def annulus_segments(params: ConstructionParams, count: int = 20, seed: int = 0) -> list[tuple]:
    """Random radial segments across the outer half of the psi-support shell.

    Each starts on the sphere sum_{j<n} x_j^2 = 1/16 (psi = 2) with x_n where
    phi' > 1/2, so det < 0, and ends just outside the psi support (det > 0).
    Directions stay within a small angle of e_1 so segments remain in B(p, r).
    """
    P = params.resolved()
    rng = np.random.default_rng(seed)
    n = P.n
    r_out = np.sqrt(1 / 16 + P.theta) * (1 + 1e-3)
    segs = []
    for _ in range(count):
        u = np.zeros(n - 1)
        u[0] = 1.0
        if n > 2:
            u[1:] = rng.normal(0, 0.05, n - 2)
        u /= np.linalg.norm(u)
        xn = 0.25 + P.delta * rng.uniform(0.02, 0.15)
        a = np.append(0.25 * u, xn)
        b = np.append(r_out * u, xn)
        segs.append(("segment", a, b))
    return segs


def persistence_check(perturbed: TorusMap, params: ConstructionParams,
                      tol: float | None = None) -> CriticalWitness | PersistenceFailure:
    """Sign change of det between q2 and q1 and a bisected witness."""
    P = params.resolved()
    q1, q2 = P.q1(), P.q2()
    d1, d2 = float(det_of(perturbed, q1)), float(det_of(perturbed, q2))
    bound = float(getattr(perturbed, "c1_distance_bound", 0.0))
    if not (d2 < 0 < d1):
        return PersistenceFailure(d2, d1, bound, "det(q2) < 0 < det(q1) violated")
    w = bisect_segment(perturbed, q2, q1, tol)
    if w is None or not w.ok:
        return PersistenceFailure(d2, d1, bound, "bisection did not reach tolerance")
    return w


def _one(params, base, seed, size):
    field_ = make_perturbation(seed, size, n=params.n)
    return seed, persistence_check(apply(base, field_), params)


def persistence_harness(params: ConstructionParams, count: int = 200, size: float = 0.5,
                        seed: int = 0, tasks: int = 1) -> dict:
    """Run persistence_check on ``count`` seeded perturbations of certified C^1 size ``size``."""
    P = params.resolved()
    base = SurgeryMap(P)
    seeds = np.random.SeedSequence(seed).generate_state(count).tolist()
    jobs = [(P, base, int(s), size) for s in seeds]
    if tasks > 1:
        with ThreadPoolExecutor(tasks) as ex:
            res = list(ex.map(lambda a: _one(*a), jobs))
    else:
        res = [_one(*a) for a in jobs]
    failures = [(s, r.to_dict()) for s, r in res if not r.ok]
    residuals = [r.residual for _, r in res if r.ok]
    return {
        "pass": not failures,
        "count": count,
        "size": size,
        "seed": seed,
        "failures": failures,
        "max_residual": max(residuals) if residuals else None,
        "tolerance": BISECT_TOL * EXPANSION ** (P.n - 1),
        "witnesses": [r for _, r in res if r.ok],
    }


@dataclass
class LocalizedField:
    """Radial bump s*rho*(1 - |x-c|^2/rho^2)^2 in the last output coordinate only."""

    n: int
    center: np.ndarray
    rho: float
    scale: float

    def _t(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return d, np.sqrt(np.sum(d * d, axis=-1)) / self.rho

    def __call__(self, x):
        d, t = self._t(x)
        out = np.zeros(d.shape)
        out[..., -1] = np.where(t < 1, self.scale * self.rho * (1 - t * t) ** 2, 0.0)
        return out

    def jacobian(self, x):
        d, t = self._t(x)
        g = np.where(t < 1, -4 * self.scale * (1 - t * t) / self.rho, 0.0)
        J = np.zeros(d.shape + (self.n,))
        J[..., -1, :] = g[..., None] * d
        return J

    @property
    def c1_bound(self) -> float:
        # |grad| peaks at 8/(3 sqrt 3) * scale; row sum <= sqrt(n) |grad|
        return float(self.scale * max(self.rho, np.sqrt(self.n) * 8 / (3 * np.sqrt(3))))


def adversarial_perturbation(params: ConstructionParams, size: float = 0.99, rho: float = 0.005) -> PerturbedMap:
    """Bump near q2 whose slope in x_n at q2 pushes det(q2) upward as far as the
    certified size allows."""
    P = params.resolved()
    q2 = P.q2()
    c = q2.copy()
    c[-1] += rho / np.sqrt(3)
    f0 = LocalizedField(P.n, c, rho, 1.0)
    f = LocalizedField(P.n, c, rho, size / f0.c1_bound)
    return PerturbedMap(SurgeryMap(P), f)


def write_witnesses_csv(witnesses, path) -> None:
    witnesses = list(witnesses)
    n = len(witnesses[0].point) if witnesses else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(n)] + ["det", "residual"])
        for c in witnesses:
            w.writerow([repr(v) for v in c.point] + [repr(c.det), repr(c.residual)])
