"""Torus geometry on T^n = R^n / 2Z^n with coordinates in [-1, 1)."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import ndimage


class DomainError(ValueError):
    """Raised when an input lies outside an operation's domain."""


def wrap(raw):
    """Reduce coordinates mod 2 into [-1, 1).

    Accepts scalars or arrays; ``Fraction`` scalars are reduced exactly.
    """
    if isinstance(raw, Fraction):
        return raw - 2 * ((raw + 1) // 2)
    arr = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("wrap: non-finite coordinate")
    out = np.mod(arr + 1.0, 2.0) - 1.0
    # np.mod can return 2.0 for tiny negative inputs after rounding
    out = np.where(out >= 1.0, out - 2.0, out)
    if np.ndim(raw) == 0:
        return float(out)
    return out


def torus_diff(a, b):
    """Shortest signed displacement a - b on the circle of length 2, per coordinate."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return np.mod(d + 1.0, 2.0) - 1.0


def torus_dist(a, b):
    """Euclidean torus distance between points (last axis = coordinates)."""
    d = torus_diff(a, b)
    return np.sqrt(np.sum(d * d, axis=-1))


@dataclass(frozen=True)
class TangentVector:
    components: np.ndarray
    base: np.ndarray | None = None


@dataclass(frozen=True)
class Cube:
    """The cube [lo, hi]^dim inside the first factor T^{n-1}."""

    lo: float
    hi: float
    dim: int
    name: str = ""

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError("Cube needs lo < hi")
        if not self.hi - self.lo < 2:
            raise DomainError("Cube side must be < 2")
        if self.dim < 1:
            raise DomainError("Cube dim must be positive")

    def fatten(self, eps: float, name: str | None = None) -> "Cube":
        return Cube(self.lo - eps, self.hi + eps, self.dim, name or f"{self.name}^eps")

    def contains(self, x) -> np.ndarray:
        """Membership for points x (..., dim), honoring the wrap."""
        x = np.asarray(x, dtype=float)
        mid = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo)
        d = torus_diff(x, mid)
        return np.all(np.abs(d) <= half + 1e-15, axis=-1)

    def distance(self, x) -> np.ndarray:
        """Euclidean torus distance from points x to the cube."""
        x = np.asarray(x, dtype=float)
        mid = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo)
        d = np.maximum(np.abs(torus_diff(x, mid)) - half, 0.0)
        return np.sqrt(np.sum(d * d, axis=-1))


@dataclass(frozen=True)
class ConeSpec:
    """Cone of vectors whose tail block is dominated by the head block."""

    parameter: float
    split_index: int

    def __post_init__(self):
        if not 0 < self.parameter < 3:
            raise DomainError("cone parameter must lie in (0, 3)")
        if self.split_index < 1:
            raise DomainError("split_index must be >= 1")


def cone_ratio(v, split_index: int):
    """||tail|| / ||head|| for vectors v (..., n); inf when the head vanishes."""
    v = np.asarray(v, dtype=float)
    head = np.linalg.norm(v[..., :split_index], axis=-1)
    tail = np.linalg.norm(v[..., split_index:], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(head > 0, tail / np.where(head > 0, head, 1.0), np.inf)
    return r


def cone_contains(v, cone: ConeSpec):
    v = np.asarray(v.components if isinstance(v, TangentVector) else v, dtype=float)
    if v.shape[-1] < 2 or cone.split_index >= v.shape[-1]:
        raise DomainError("vector too short for the cone split")
    r = cone_ratio(v, cone.split_index)
    out = r < cone.parameter
    return bool(out) if np.ndim(out) == 0 else out


def standard_cubes(dim: int, eps: float) -> dict[str, Cube]:
    k0 = Cube(-1 / 28, 1 / 28, dim, "K0")
    k1 = Cube(3 / 28, 5 / 28, dim, "K1")
    return {"K0": k0, "K1": k1, "K0eps": k0.fatten(eps, "K0eps"), "K1eps": k1.fatten(eps, "K1eps")}


def in_cube_set(x, cubes) -> str:
    """Name of the first cube containing x (a point of T^{n-1}), or 'none'.

    ``cubes`` is an ordered mapping name -> Cube or a list of Cubes; pass the
    thin cubes before the fattened ones to get the most specific tag.
    """
    items = cubes.items() if isinstance(cubes, dict) else ((c.name, c) for c in cubes)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    for name, cube in items:
        if bool(cube.contains(x)):
            return name
    return "none"


# ---------------------------------------------------------------------------
# inradius


def rasterize(cloud, resolution: float) -> np.ndarray:
    """Boolean occupancy grid of T^k (cells of side ``resolution``)."""
    cloud = np.atleast_2d(np.asarray(cloud, dtype=float))
    k = cloud.shape[1]
    cells = int(round(2.0 / resolution))
    idx = np.floor((wrap(cloud) + 1.0) / resolution).astype(np.int64) % cells
    grid = np.zeros((cells,) * k, dtype=bool)
    grid[tuple(idx.T)] = True
    return grid


def grid_inradius(grid: np.ndarray, resolution: float) -> float:
    """Lower estimate of the inradius of the occupied set of a periodic grid.

    Distance from an occupied cell centre to the nearest empty cell centre,
    minus one cell, maximized. A fully occupied grid returns 1.0, the largest
    radius a coordinate ball can have before it wraps onto itself.
    """
    if grid.all():
        return 1.0
    if not grid.any():
        return 0.0
    k = grid.ndim
    cells = grid.shape[0]
    pad = min(cells, max(8, cells // 2))
    tiled = np.pad(grid, [(pad, pad)] * k, mode="wrap")
    dist = ndimage.distance_transform_edt(tiled)
    core = dist[tuple(slice(pad, pad + cells) for _ in range(k))]
    best = float(core.max()) * resolution - resolution
    return max(min(best, 1.0), 0.0)


def inradius_estimate(cloud, k: int | None = None, resolution: float = 1 / 400) -> float:
    cloud = np.atleast_2d(np.asarray(cloud, dtype=float))
    if cloud.shape[0] < 2:
        raise DomainError("inradius_estimate needs at least 2 points")
    if k is not None and cloud.shape[1] != k:
        raise DomainError("cloud dimension does not match k")
    return grid_inradius(rasterize(cloud, resolution), resolution)
