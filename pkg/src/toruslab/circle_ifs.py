"""Circle maps g_a, their C^1 smoothing, and the two-generator IFS on S^1 = [-1, 1)/~.

The smoothing replaces each kink of a piecewise-linear map by a quadratic
fillet on a band [c - w, c + w]; the derivative there interpolates linearly
between the two one-sided slopes, so sup|g'| equals the largest slope and
monotonicity is automatic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .torus_core import DomainError, torus_diff, wrap

SHIFT_G2 = 2 / 13


class NumericError(RuntimeError):
    pass


@dataclass(frozen=True)
class Breakpoint:
    position: float
    value: float
    left_slope: float
    right_slope: float


@dataclass(frozen=True)
class PiecewiseLinearCircleMap:
    """Degree-one circle map, linear between breakpoints, fixing -1 ~ 1."""

    breakpoints: tuple[Breakpoint, ...]
    a: float | None = None

    def _knots(self):
        xs = [-1.0] + [b.position for b in self.breakpoints] + [1.0]
        ys = [-1.0] + [b.value for b in self.breakpoints] + [1.0]
        return np.array(xs), np.array(ys)

    def __call__(self, x):
        xs, ys = self._knots()
        z = wrap(x)
        return wrap(np.interp(z, xs, ys))

    def derivative(self, x):
        xs, ys = self._knots()
        slopes = np.diff(ys) / np.diff(xs)
        z = np.asarray(wrap(x))
        i = np.clip(np.searchsorted(xs, z, side="right") - 1, 0, len(slopes) - 1)
        return slopes[i]

    def sup_gap(self) -> float:
        """sup |g(x) - x|, attained at a breakpoint for a PL map."""
        return max(abs(b.value - b.position) for b in self.breakpoints)

    def to_dict(self) -> dict:
        return {
            "kind": "piecewise_linear",
            "a": self.a,
            "breakpoints": [vars(b) for b in self.breakpoints],
        }


def build_pl_map(a: float) -> PiecewiseLinearCircleMap:
    """The three-piece map: slope 3/2 on [-a, a], slope (2-3a)/(2-2a) outside."""
    if not 0 < a < 2 / 3:
        raise DomainError("a must lie in (0, 2/3)")
    s = (2 - 3 * a) / (2 - 2 * a)
    return PiecewiseLinearCircleMap(
        (
            Breakpoint(-a, -1.5 * a, s, 1.5),
            Breakpoint(a, 1.5 * a, 1.5, s),
        ),
        a=a,
    )


@dataclass(frozen=True)
class SmoothCircleMap:
    """C^1 circle diffeomorphism x -> base(x - shift) [+ shift if conjugate].

    ``base`` is a filleted piecewise-linear map. With ``conjugate`` the map is
    the translation-conjugate of the base and keeps its displacement from the
    identity; without it the argument alone is shifted.
    """

    pl: PiecewiseLinearCircleMap
    band: float
    shift: float = 0.0
    conjugate: bool = False

    def __post_init__(self):
        bps = self.pl.breakpoints
        if self.band <= 0:
            raise DomainError("band must be positive")
        pos = sorted(b.position for b in bps)
        gaps = np.diff(pos + [pos[0] + 2.0])
        if np.any(gaps <= 2 * self.band):
            raise DomainError("smoothing bands overlap")

    # -- base map (unshifted) ------------------------------------------------
    def _base(self, z):
        z = np.asarray(z, dtype=float)
        val = np.asarray(self.pl(z), dtype=float)
        # undo the wrap of the PL value near +-1 so we can add fillet corrections
        val = z + torus_diff(val, z)
        w = self.band
        for b in self.pl.breakpoints:
            t = z - (b.position - w)
            inside = (t >= 0) & (t <= 2 * w)
            if np.any(inside):
                v0 = b.value - b.left_slope * w
                fil = v0 + b.left_slope * t + (b.right_slope - b.left_slope) * t * t / (4 * w)
                val = np.where(inside, fil, val)
        return val

    def _base_derivative(self, z):
        z = np.asarray(z, dtype=float)
        d = np.asarray(self.pl.derivative(z), dtype=float)
        w = self.band
        for b in self.pl.breakpoints:
            t = z - (b.position - w)
            inside = (t >= 0) & (t <= 2 * w)
            fil = b.left_slope + (b.right_slope - b.left_slope) * t / (2 * w)
            d = np.where(inside, fil, d)
        return d

    def __call__(self, x):
        z = wrap(np.asarray(x, dtype=float) - self.shift)
        v = self._base(z)
        if self.conjugate:
            v = v + self.shift
        out = wrap(v)
        return float(out) if np.ndim(x) == 0 else out

    def derivative(self, x):
        z = wrap(np.asarray(x, dtype=float) - self.shift)
        d = self._base_derivative(z)
        return float(d) if np.ndim(x) == 0 else d

    def displacement(self, x):
        """Signed torus displacement g(x) - x."""
        return torus_diff(self(x), x)

    def inverse(self, y):
        return inverse_branch(self, y)

    def quadratic_table(self) -> tuple[np.ndarray, np.ndarray]:
        """(edges, coef) with base lift c0 + c1 t + c2 t^2, t = z - edges[i], on [edges[i], edges[i+1]).

        Together with ``shift`` and ``conjugate`` this is the full map; used by
        compiled orbit kernels.
        """
        w = self.band
        bps = sorted(self.pl.breakpoints, key=lambda b: b.position)
        edges = [-1.0]
        coef = [(-1.0, bps[0].left_slope, 0.0)]
        for i, b in enumerate(bps):
            edges.append(b.position - w)
            coef.append((b.value - b.left_slope * w, b.left_slope, (b.right_slope - b.left_slope) / (4 * w)))
            edges.append(b.position + w)
            coef.append((b.value + b.right_slope * w, b.right_slope, 0.0))
        edges.append(1.0)
        return np.array(edges), np.array(coef)

    # -- certified bounds ----------------------------------------------------
    @property
    def sup_derivative(self) -> float:
        return max(max(b.left_slope, b.right_slope) for b in self.pl.breakpoints)

    @property
    def inf_derivative(self) -> float:
        return min(min(b.left_slope, b.right_slope) for b in self.pl.breakpoints)

    @property
    def sup_gap(self) -> float:
        # a fillet lies between its chord and the corner it replaces, so the
        # displacement stays inside the PL displacement range on the band
        base = self.pl.sup_gap()
        return base if self.conjugate else min(1.0, base + abs(self.shift))

    def expanding_arc(self) -> tuple[float, float]:
        """Arc (start, length) where g' >= 1; its complement is the contraction region."""
        w = self.band
        lo = hi = None
        for b in self.pl.breakpoints:
            mL, mR = b.left_slope, b.right_slope
            if mL < 1 <= mR:
                lo = b.position - w + 2 * w * (1 - mL) / (mR - mL)
            elif mL >= 1 > mR:
                hi = b.position - w + 2 * w * (mL - 1) / (mL - mR)
        if lo is None or hi is None:
            raise DomainError("map has no single expanding arc")
        return float(wrap(lo + self.shift)), float(hi - lo)

    def contraction_region(self) -> tuple[float, float]:
        start, length = self.expanding_arc()
        return float(wrap(start + length)), 2.0 - length

    def to_dict(self) -> dict:
        return {
            "kind": "smooth",
            "base": self.pl.to_dict(),
            "band": self.band,
            "shift": self.shift,
            "conjugate": self.conjugate,
            "sup_derivative": self.sup_derivative,
            "sup_gap": self.sup_gap,
        }


def smooth_pl_map(pl: PiecewiseLinearCircleMap, band: float | None = None) -> SmoothCircleMap:
    if band is None:
        if pl.a is None:
            raise DomainError("band required for a general PL map")
        band = pl.a / 10
    return SmoothCircleMap(pl, band)


def make_g2(g1: SmoothCircleMap, shift: float = SHIFT_G2, conjugate: bool = False) -> SmoothCircleMap:
    """g2(x) = g1(x - shift), or its conjugate g1(x - shift) + shift."""
    return SmoothCircleMap(g1.pl, g1.band, shift=g1.shift + shift, conjugate=conjugate)


def inverse_branch(g: SmoothCircleMap, y, tol: float = 1e-12, max_iter: int = 200):
    """Solve g(x) = y by safeguarded Newton on the lift x + D(x) - y."""
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(wrap(y))
    lo = y - 1.0
    hi = y + 1.0

    def resid(x):
        return x + g.displacement(x) - y

    x = y - g.displacement(y)
    done = np.zeros(y.shape, dtype=bool)
    for _ in range(max_iter):
        r = resid(x)
        lo = np.where(r < 0, np.maximum(lo, x), lo)
        hi = np.where(r > 0, np.minimum(hi, x), hi)
        done = np.abs(r) <= tol
        if done.all():
            break
        xn = x - r / g.derivative(x)
        bad = ~((xn > lo) & (xn < hi))
        x = np.where(done, x, np.where(bad, 0.5 * (lo + hi), xn))
    else:
        raise NumericError("inverse_branch did not converge")
    out = wrap(x)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class IFSFamily:
    generators: tuple[SmoothCircleMap, SmoothCircleMap]
    k: float | None = None

    @property
    def contraction_regions(self):
        return [g.contraction_region() for g in self.generators]

    def to_dict(self) -> dict:
        return {"k": self.k, "generators": [g.to_dict() for g in self.generators]}


def a0_for_budget(k: float) -> float:
    """Largest convenient a0 with sup|g_a0 - Id| = a0/2 < k/2, capped at 1/27."""
    if k <= 0:
        raise DomainError("k must be positive")
    return min(1 / 27, 0.9 * k)


def build_ifs(k: float = 1.0, a0: float | None = None, conjugate: bool = False) -> IFSFamily:
    if a0 is None:
        a0 = a0_for_budget(k)
    if not 0 < a0 < 1 / 26:
        raise DomainError("a0 must lie in (0, 1/26)")
    g1 = smooth_pl_map(build_pl_map(a0))
    return IFSFamily((g1, make_g2(g1, conjugate=conjugate)), k=k)


# ---------------------------------------------------------------------------
# arcs on the circle of length 2


def _normalize(arcs) -> list[tuple[float, float]]:
    """Disjoint sorted intervals in [-1, 1) covering the union of (start, length) arcs."""
    ivs = []
    for s, L in arcs:
        if L >= 2.0:
            return [(-1.0, 1.0)]
        s = float(wrap(s))
        e = s + L
        if e <= 1.0:
            ivs.append((s, e))
        else:
            ivs.append((s, 1.0))
            ivs.append((-1.0, e - 2.0))
    ivs.sort()
    merged: list[list[float]] = []
    for a, b in ivs:
        if merged and a <= merged[-1][1] + 1e-13:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def _measure(ivs) -> float:
    return sum(b - a for a, b in ivs)


def _as_arcs(ivs) -> list[tuple[float, float]]:
    if len(ivs) >= 2 and ivs[0][0] <= -1.0 + 1e-13 and ivs[-1][1] >= 1.0 - 1e-13:
        head = ivs[0]
        tail = ivs[-1]
        joined = (tail[0], (tail[1] - tail[0]) + (head[1] - head[0]))
        return [joined] + [(a, b - a) for a, b in ivs[1:-1]]
    return [(a, b - a) for a, b in ivs]


def preimage_arcs(g: SmoothCircleMap, arcs) -> list[tuple[float, float]]:
    out = []
    for s, L in arcs:
        if L >= 2.0:
            out.append((-1.0, 2.0))
            continue
        inv = getattr(g, "inverse", None) or (lambda y: inverse_branch(g, y))
        xs = float(inv(s))
        xe = float(inv(wrap(s + L)))
        out.append((xs, float(np.mod(xe - xs, 2.0))))
    return out


@dataclass
class MinimalityResult:
    covered: bool
    steps: int
    measure_history: list[float]
    stalled_steps: int
    reason: str = ""


def check_minimality(family: IFSFamily, arc: tuple[float, float], max_steps: int = 200,
                     max_pieces: int = 100_000) -> MinimalityResult:
    """Grow the union of all preimages of an arc until it is the whole circle.

    At each step every piece is pulled back by both generators and the result
    is merged with the current union. ``stalled_steps`` counts steps where
    neither generator lengthened the longest piece.
    """
    center, length = arc
    if length <= 0:
        raise DomainError("arc length must be positive")
    ivs = _normalize([(center - length / 2, length)])
    hist = [_measure(ivs)]
    stalled = 0
    for step in range(max_steps + 1):
        if hist[-1] >= 2.0 - 1e-12:
            return MinimalityResult(True, step, hist, stalled)
        if step == max_steps:
            break
        arcs = _as_arcs(ivs)
        longest = max(arcs, key=lambda a: a[1])
        pulled = [preimage_arcs(g, arcs) for g in family.generators]
        if max(preimage_arcs(g, [longest])[0][1] for g in family.generators) <= longest[1]:
            stalled += 1
        ivs = _normalize(arcs + pulled[0] + pulled[1])
        if len(ivs) > max_pieces:
            return MinimalityResult(False, step + 1, hist, stalled, "too many pieces")
        m = _measure(ivs)
        if m <= hist[-1] + 1e-15:
            hist.append(m)
            return MinimalityResult(False, step + 1, hist, stalled, "union stopped growing")
        hist.append(m)
    return MinimalityResult(False, max_steps, hist, stalled, "max_steps exceeded")


def contraction_cover_check(family: IFSFamily, resolution: float = 1e-4, margin: float = 1e-3) -> dict:
    """Check that at every grid point some generator has |g'| < 1 - margin."""
    x = -1.0 + resolution * np.arange(int(round(2 / resolution)))
    best = np.min([np.abs(g.derivative(x)) for g in family.generators], axis=0)
    worst = float(best.max())
    return {
        "pass": bool(worst < 1 - margin),
        "worst_min_derivative": worst,
        "witness": float(x[int(best.argmax())]),
        "resolution": resolution,
        "margin": margin,
    }


def c1_gap_to_identity(g, samples: int = 100_001) -> tuple[float, float]:
    """(sup |g - Id|, sup |g'|): the larger of a dense sweep and certified bounds."""
    x = np.linspace(-1.0, 1.0, samples, endpoint=False)
    gap = float(np.max(np.abs(torus_diff(g(x), x))))
    der = float(np.max(np.abs(g.derivative(x))))
    cert_gap = getattr(g, "sup_gap", None)
    cert_der = getattr(g, "sup_derivative", None)
    if callable(cert_gap):
        cert_gap = cert_gap()
    if cert_gap is not None:
        gap = max(gap, float(cert_gap))
    if cert_der is not None:
        der = max(der, float(cert_der))
    return gap, der


class IdentityCircleMap:
    """The identity, for reference checks."""

    sup_gap = 0.0
    sup_derivative = 1.0

    def __call__(self, x):
        return wrap(x)

    def derivative(self, x):
        return np.ones_like(np.asarray(x, dtype=float))
