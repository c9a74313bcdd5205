"""Orbits, box-counting density and two-set hitting times.

Structured maps (x, y) -> (14 x, fiber(x, y)) are iterated with the head on
the lattice (2/Q) Z, Q = 3^36. Multiplication by 14 is a bijection of Z/QZ, so
head orbits stay long and aperiodic-looking, whereas in plain doubles every
head orbit lands on 0 after about 20 steps (each step shifts ~3.8 bits out of
the mantissa). The fiber coordinate stays in double precision.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .perturbations import PerturbedMap
from .profiles import PHI_CUM, PHI_KNOTS_D, PHI_KNOTS_T
from .torus_core import DomainError, torus_diff, wrap
from .torus_maps import EXPANSION, BlendMap, LinearMapA, StructuredMap, SurgeryMap, TorusMap

LATTICE_Q = 3 ** 36
_HALF_Q = (LATTICE_Q - 1) // 2


class OrbitError(ArithmeticError):
    def __init__(self, index: int, point):
        super().__init__(f"non-finite orbit point at index {index}: {point}")
        self.index = index
        self.point = point


# ---------------------------------------------------------------------------
# lattice heads


def to_lattice(xh) -> np.ndarray:
    """Nearest lattice indices k (centered) with x = 2 k / Q."""
    xh = wrap(np.asarray(xh, dtype=float))
    k = np.array([int(round(float(v) * LATTICE_Q / 2)) for v in np.ravel(xh)], dtype=np.int64)
    k = np.where(k > _HALF_Q, k - LATTICE_Q, k)
    return k.reshape(np.shape(xh))


def from_lattice(k) -> np.ndarray:
    return 2.0 * np.asarray(k, dtype=np.int64) / LATTICE_Q


def lattice_step(k: np.ndarray) -> np.ndarray:
    k = (EXPANSION * np.asarray(k, dtype=np.int64)) % LATTICE_Q
    return np.where(k > _HALF_Q, k - LATTICE_Q, k)


def _use_lattice(m: TorusMap, exact_head) -> bool:
    if exact_head == "auto":
        return isinstance(m, StructuredMap) and m.exact_head
    if exact_head and not isinstance(m, StructuredMap):
        raise DomainError("exact head iteration needs a map of the form (14x, fiber(x, y))")
    return bool(exact_head)


class _Stepper:
    """Vectorized state for many orbits at once."""

    def __init__(self, m: TorusMap, x0, exact_head="auto"):
        self.m = m
        x0 = wrap(np.atleast_2d(np.asarray(x0, dtype=float)))
        if x0.shape[-1] != m.n:
            raise DomainError(f"expected points with {m.n} coordinates")
        self.lattice = _use_lattice(m, exact_head)
        if self.lattice:
            self.k = to_lattice(x0[:, :-1])
            self.y = x0[:, -1].copy()
        else:
            self.x = x0

    def points(self) -> np.ndarray:
        if self.lattice:
            return np.column_stack([from_lattice(self.k), self.y])
        return self.x

    def advance(self):
        if self.lattice:
            xh = from_lattice(self.k)
            self.y = wrap(self.m.fiber(xh, self.y))
            self.k = lattice_step(self.k)
        else:
            self.x = self.m(self.x)


def iterate(m: TorusMap, x0, steps: int, exact_head="auto"):
    """Lazily yield x0, m(x0), ..., m^steps(x0) (wrapped).

    ``exact_head`` selects lattice head arithmetic: "auto" uses it for
    structured maps, False forces plain double precision.
    """
    if steps < 0:
        raise DomainError("steps must be >= 0")
    st = _Stepper(m, x0, exact_head)
    for i in range(steps + 1):
        p = st.points()[0]
        if not np.all(np.isfinite(p)):
            raise OrbitError(i, p.tolist())
        yield p.copy()
        if i < steps:
            st.advance()


# ---------------------------------------------------------------------------
# density


@dataclass
class DensityReport:
    map_tag: str
    seed_point: list
    iterations: int
    grid: int
    visited: int
    total: int
    fraction: float
    first_full: int | None
    checkpoints: dict = field(default_factory=dict)
    engine: str = "numpy"
    seconds: float = 0.0

    def to_dict(self):
        return asdict(self)


def box_index(points: np.ndarray, grid: int) -> np.ndarray:
    idx = np.floor((wrap(points) + 1.0) * (grid / 2.0)).astype(np.int64)
    idx = np.clip(idx, 0, grid - 1)
    n = points.shape[-1]
    return np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), (grid,) * n)


def _checkpoint_steps(budget: int) -> list[int]:
    out, c = [], 10
    while c < budget:
        out.append(c)
        c *= 10
    return out + [budget]


def box_density(orbit, grid: int, budget: int, map_tag: str = "map", seed_point=None) -> DensityReport:
    """Box counting over the first ``budget`` + 1 points of an orbit stream."""
    return _box_density(orbit, grid, budget, map_tag, seed_point)[0]


def _box_density(orbit, grid, budget, map_tag, seed_point):
    if grid < 2:
        raise DomainError("grid must be >= 2")
    t0 = time.perf_counter()
    visited = None
    count = 0
    first_full = None
    marks = {}
    cps = set(_checkpoint_steps(budget))
    for i, p in enumerate(orbit):
        if i > budget:
            break
        p = np.asarray(p, dtype=float)
        if visited is None:
            visited = np.zeros(grid ** p.size, dtype=bool)
            seed_point = p.tolist() if seed_point is None else seed_point
        j = int(box_index(p, grid))
        if not visited[j]:
            visited[j] = True
            count += 1
            if count == visited.size and first_full is None:
                first_full = i
        if i in cps:
            marks[i] = count / visited.size
    total = visited.size if visited is not None else 0
    rep = DensityReport(map_tag, list(seed_point or []), budget, grid, count, total,
                        count / total if total else 0.0, first_full, marks, "numpy",
                        time.perf_counter() - t0)
    return rep, visited


# ---------------------------------------------------------------------------
# compiled kernel for A, f and F


@numba.njit(cache=True, nogil=True)
def _tdiff(a, b):
    return (a - b + 1.0) % 2.0 - 1.0


@numba.njit(cache=True, nogil=True)
def _plateau(x, mid, half, eps):
    d = abs(_tdiff(x, mid))
    s = (half + eps - d) / eps
    if s <= 0.0:
        return 0.0
    if s >= 1.0:
        return 1.0
    return min(s * s * s * (10.0 - 15.0 * s + 6.0 * s * s), 1.0)


@numba.njit(cache=True, nogil=True)
def _circle_disp(y, edges, coef, shift, conj):
    z = (y - shift + 1.0) % 2.0 - 1.0
    i = np.searchsorted(edges, z, side="right") - 1
    if i > coef.shape[0] - 1:
        i = coef.shape[0] - 1
    t = z - edges[i]
    v = coef[i, 0] + coef[i, 1] * t + coef[i, 2] * t * t
    if conj:
        v += shift
    return _tdiff(v, y)


@numba.njit(cache=True, nogil=True)
def _phi(y, center, delta, kt, kd, kc):
    t = (y - center) / delta
    if t <= kt[0] or t >= kt[kt.shape[0] - 1]:
        return 0.0
    i = np.searchsorted(kt, t, side="right") - 1
    tau = t - kt[i]
    slope = (kd[i + 1] - kd[i]) / (kt[i + 1] - kt[i])
    return delta * (kc[i] + kd[i] * tau + 0.5 * slope * tau * tau)


@numba.njit(cache=True, nogil=True)
def _fiber(kind, xh, y, edges, coefs, shifts, conj, bumps, p, r, theta, delta, kt, kd, kc):
    if kind == 0:
        return y
    if kind == 2:
        d2 = _tdiff(y, p[p.shape[0] - 1]) ** 2
        for j in range(xh.shape[0]):
            d2 += _tdiff(xh[j], p[j]) ** 2
        if d2 < r * r:
            s = 0.0
            for j in range(xh.shape[0]):
                s += xh[j] * xh[j]
            t = (s - 1.0 / 16.0) / theta
            psi = 2.0 * (1.0 - t * t) ** 2 if abs(t) < 1.0 else 0.0
            return y - _phi(y, 0.25, delta, kt, kd, kc) * psi
    out = y
    for g in range(2):
        u = 1.0
        for j in range(xh.shape[0]):
            u *= _plateau(xh[j], bumps[g, 0], bumps[g, 1], bumps[g, 2])
            if u == 0.0:
                break
        if u != 0.0:
            out += u * _circle_disp(y, edges[g], coefs[g], shifts[g], conj[g])
    return out


@numba.njit(cache=True, nogil=True)
def _lattice_advance(k, Q, half):
    for j in range(k.shape[0]):
        v = (14 * k[j]) % Q
        if v > half:
            v -= Q
        k[j] = v


@numba.njit(cache=True, nogil=True)
def _trajectory_kernel(k0, y0, steps, Q, kind, edges, coefs, shifts, conj, bumps, p, r, theta, delta, kt, kd, kc):
    n = k0.shape[0] + 1
    out = np.empty((steps + 1, n))
    k = k0.copy()
    y = y0
    half = (Q - 1) // 2
    xh = np.empty(n - 1)
    for i in range(steps + 1):
        for j in range(n - 1):
            xh[j] = 2.0 * k[j] / Q
            out[i, j] = xh[j]
        out[i, n - 1] = y
        y = _fiber(kind, xh, y, edges, coefs, shifts, conj, bumps, p, r, theta, delta, kt, kd, kc)
        y = (y + 1.0) % 2.0 - 1.0
        _lattice_advance(k, Q, half)
    return out


@numba.njit(cache=True, nogil=True)
def _density_kernel(k0, y0, steps, grid, cps, Q, kind, edges, coefs, shifts, conj, bumps, p, r, theta, delta,
                    kt, kd, kc):
    n = k0.shape[0] + 1
    total = grid ** n
    visited = np.zeros(total, dtype=np.bool_)
    k = k0.copy()
    y = y0
    half = (Q - 1) // 2
    xh = np.empty(n - 1)
    count = 0
    first_full = -1
    marks = np.zeros(cps.shape[0], dtype=np.int64)
    c = 0
    for i in range(steps + 1):
        flat = 0
        for j in range(n - 1):
            xh[j] = 2.0 * k[j] / Q
            b = int((xh[j] + 1.0) * (grid / 2.0))
            flat = flat * grid + min(max(b, 0), grid - 1)
        b = int((y + 1.0) * (grid / 2.0))
        flat = flat * grid + min(max(b, 0), grid - 1)
        if not visited[flat]:
            visited[flat] = True
            count += 1
            if count == total and first_full < 0:
                first_full = i
        while c < cps.shape[0] and cps[c] == i:
            marks[c] = count
            c += 1
        if not np.isfinite(y):
            return visited, count, first_full, marks, i
        y = _fiber(kind, xh, y, edges, coefs, shifts, conj, bumps, p, r, theta, delta, kt, kd, kc)
        y = (y + 1.0) % 2.0 - 1.0
        _lattice_advance(k, Q, half)
    return visited, count, first_full, marks, -1


def compile_args(m: TorusMap):
    """Kernel arguments for A, f or F, or None when the map has no compiled form."""
    n = m.n
    if type(m) is LinearMapA:
        kind = 0
    elif type(m) is BlendMap:
        kind = 1
    elif type(m) is SurgeryMap:
        kind = 2
    else:
        return None
    edges = np.zeros((2, 6))
    coefs = np.zeros((2, 5, 3))
    shifts = np.zeros(2)
    conj = np.zeros(2, dtype=np.bool_)
    bumps = np.zeros((2, 3))
    p = np.zeros(n)
    r = theta = delta = 1.0
    if kind > 0:
        for g, gen in enumerate(m.ifs.generators):
            e, c = gen.quadratic_table()
            if e.size != 6:
                return None
            edges[g], coefs[g] = e, c
            shifts[g] = gen.shift
            conj[g] = gen.conjugate
        for g, b in enumerate((m.u.b0, m.u.b1)):
            bumps[g] = (0.5 * (b.lo + b.hi), 0.5 * (b.hi - b.lo), b.eps)
    if kind == 2:
        p = np.asarray(m.p, dtype=float)
        r, theta, delta = m.params.r, m.psi.theta, m.phi.delta
    kt = np.array([float(v) for v in PHI_KNOTS_T])
    kd = np.array([float(v) for v in PHI_KNOTS_D])
    kc = np.array([float(v) for v in PHI_CUM])
    return (kind, edges, coefs, shifts, conj, bumps, p, float(r), float(theta), float(delta), kt, kd, kc)


def compiled_trajectory(m: TorusMap, x0, steps: int) -> np.ndarray:
    args = compile_args(m)
    if args is None:
        raise DomainError(f"no compiled kernel for map {m.tag}")
    x0 = wrap(np.asarray(x0, dtype=float))
    return _trajectory_kernel(to_lattice(x0[:-1]), float(x0[-1]), int(steps), LATTICE_Q, *args)


def orbit_density(m: TorusMap, x0, steps: int, grid: int, engine: str = "auto", return_visited: bool = False):
    """Density of the orbit of x0 over steps + 1 points, compiled when possible.

    With ``return_visited`` also returns the boolean visit grid of shape (grid,) * n.
    """
    if grid < 2:
        raise DomainError("grid must be >= 2")
    x0 = wrap(np.asarray(x0, dtype=float))
    args = compile_args(m) if engine in ("auto", "numba") else None
    if engine == "numba" and args is None:
        raise DomainError(f"no compiled kernel for map {m.tag}")
    if args is None:
        rep, visited = _box_density(iterate(m, x0, steps), grid, steps, m.tag, x0.tolist())
        return (rep, visited.reshape((grid,) * m.n)) if return_visited else rep
    t0 = time.perf_counter()
    cps = np.array(_checkpoint_steps(steps), dtype=np.int64)
    visited, count, first_full, marks, bad = _density_kernel(
        to_lattice(x0[:-1]), float(x0[-1]), int(steps), int(grid), cps, LATTICE_Q, *args)
    if bad >= 0:
        raise OrbitError(int(bad), None)
    total = grid ** m.n
    rep = DensityReport(m.tag, x0.tolist(), steps, grid, int(count), total, count / total,
                        None if first_full < 0 else int(first_full),
                        {int(c): int(v) / total for c, v in zip(cps, marks)}, "numba",
                        time.perf_counter() - t0)
    return (rep, visited.reshape((grid,) * m.n)) if return_visited else rep


def random_start(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-1, 1, size=n)


def density_experiment(m: TorusMap, seeds, steps: int, grid: int, tasks: int = 1,
                       engine: str = "auto") -> list[DensityReport]:
    """One orbit per seed from a seeded uniform start; reports in seed order."""
    jobs = [random_start(m.n, s) for s in seeds]
    if tasks > 1:
        with ThreadPoolExecutor(tasks) as ex:
            return list(ex.map(lambda x: orbit_density(m, x, steps, grid, engine), jobs))
    return [orbit_density(m, x, steps, grid, engine) for x in jobs]


# ---------------------------------------------------------------------------
# two-set hitting


@dataclass
class HitResult:
    hit: bool
    iterate: int | None
    closest_approach: float
    closest_iterate: int
    seeds: int
    max_iter: int

    def to_dict(self):
        return asdict(self)


def _box_distance(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Sup-norm torus distance from points to the box [lo, hi]."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    d = np.abs(torus_diff(x, mid)) - half
    return np.max(np.maximum(d, 0.0), axis=-1)


def two_set_hitting(m: TorusMap, U, V, max_iter: int = 10_000, resolution: float = 1 / 200,
                    exact_head="auto") -> HitResult:
    """First k with m^k(U) meeting V, from a grid of seeds in U (both open boxes (lo, hi))."""
    ulo, uhi = (np.asarray(v, dtype=float) for v in U)
    vlo, vhi = (np.asarray(v, dtype=float) for v in V)
    if np.any(uhi <= ulo) or np.any(vhi <= vlo):
        raise DomainError("U and V must be nonempty open boxes")
    axes = []
    for a, b in zip(ulo, uhi):
        cnt = max(int(np.ceil((b - a) / resolution)), 1)
        axes.append(a + (b - a) * (np.arange(cnt) + 0.5) / cnt)
    seeds = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    st = _Stepper(m, seeds, exact_head)
    best, best_i = np.inf, 0
    for i in range(max_iter + 1):
        pts = st.points()
        if not np.all(np.isfinite(pts)):
            raise OrbitError(i, None)
        d = _box_distance(pts, vlo, vhi)
        inside = np.all(np.abs(torus_diff(pts, 0.5 * (vlo + vhi))) < 0.5 * (vhi - vlo), axis=-1)
        if inside.any():
            return HitResult(True, i, 0.0, i, len(seeds), max_iter)
        j = float(d.min())
        if j < best:
            best, best_i = j, i
        if i < max_iter:
            st.advance()
    return HitResult(False, None, best, best_i, len(seeds), max_iter)


# ---------------------------------------------------------------------------
# export


def write_orbit_csv(points, path) -> None:
    pts = np.asarray(list(points), dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i"] + [f"x{j + 1}" for j in range(pts.shape[1])])
        for i, p in enumerate(pts):
            w.writerow([i] + [repr(float(v)) for v in p])


def visit_matrix(m: TorusMap, x0, steps: int, grid: int) -> np.ndarray:
    """Visit counts of the orbit projected to (x_1, x_n), shape (grid, grid)."""
    st = _Stepper(m, x0)
    out = np.zeros((grid, grid), dtype=np.int64)
    chunk = []
    for i in range(steps + 1):
        chunk.append(st.points()[0, [0, -1]])
        if len(chunk) == 65536 or i == steps:
            np.add.at(out, np.unravel_index(box_index(np.array(chunk), grid), (grid, grid)), 1)
            chunk = []
        if i < steps:
            st.advance()
    return out


def write_density_csv(matrix: np.ndarray, path) -> None:
    g = matrix.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "x_center", "y_center", "count"])
        for i in range(g):
            for j in range(g):
                w.writerow([i, j, -1 + (2 * i + 1) / g, -1 + (2 * j + 1) / g, int(matrix[i, j])])


def write_gnuplot_matrix(matrix: np.ndarray, path) -> None:
    """Rows are fiber bins, columns head bins (plot with `matrix with image`)."""
    np.savetxt(path, np.asarray(matrix).T, fmt="%d")


def compiled_available(m: TorusMap) -> bool:
    return compile_args(m) is not None and not isinstance(m, PerturbedMap)
