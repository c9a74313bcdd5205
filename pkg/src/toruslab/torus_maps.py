"""The maps A, f-hat, f and F on T^n = T^{n-1} x S^1, with analytic Jacobians."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

import numpy as np

from .circle_ifs import IFSFamily, a0_for_budget, build_ifs
from .profiles import Phi, PlateauBump, Psi
from .torus_core import DomainError, standard_cubes, torus_diff, torus_dist, wrap

EXPANSION = 14


def _delta_fit(theta: float, r: float) -> float:
    """Largest delta with supp(phi psi) inside B(p, r) at n = 2 (inf if none needed).

    The farthest support corner sits at head offset 1/4 - sqrt(1/16 - theta)
    and fiber offset 3 delta / 4.
    """
    h = 0.25 - math.sqrt(max(1 / 16 - theta, 0.0))
    if h >= r:
        return math.inf
    return 4 / 3 * math.sqrt(r * r - h * h)


@dataclass(frozen=True)
class ConstructionParams:
    """Parameter chain of the construction.

    ``a0`` and ``delta`` default to values derived from the others
    (see :meth:`resolved`); pass them explicitly to override.
    """

    n: int = 2
    kappa: float = 0.1
    epsilon: float = 1 / 1400
    a0: float | None = None
    r: float = 0.06
    theta: float = 0.025
    delta: float | None = None
    p: tuple[float, ...] | None = None

    # -- derived quantities -------------------------------------------------
    @property
    def m_b(self) -> float:
        """Certified bound on ||grad u||: one coordinate transitions at a time,
        each factor's slope is at most 15/(8 eps), so sqrt(n-1) of that."""
        return math.sqrt(self.n - 1) * 15 / (8 * self.epsilon)

    @property
    def k(self) -> float:
        """Displacement budget for the fiber generators."""
        return self.kappa / self.m_b

    @property
    def m_psi(self) -> float:
        return Psi(self.theta).sup_derivative

    @property
    def point_p(self) -> np.ndarray:
        if self.p is not None:
            return np.asarray(self.p, dtype=float)
        p = np.zeros(self.n)
        p[0] = 0.25
        p[-1] = 0.25
        return p

    def resolved(self) -> "ConstructionParams":
        out = self
        if int(out.n) != out.n or out.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {out.n}")
        if out.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {out.kappa}")
        if out.a0 is None:
            out = replace(out, a0=a0_for_budget(out.k))
        if out.delta is None:
            m = Psi(out.theta).sup_derivative
            out = replace(out, delta=0.9 * min(2 * out.theta, 11 * out.kappa / (2 * m * out.r),
                                               _delta_fit(out.theta, out.r)))
        if out.p is None:
            out = replace(out, p=tuple(float(c) for c in out.point_p))
        return out

    def q1(self) -> np.ndarray:
        d = self.resolved().delta
        q = self.point_p.copy()
        q[-1] = 0.25 + d / 4
        return q

    def q2(self) -> np.ndarray:
        d = self.resolved().delta
        q = self.point_p.copy()
        q[-1] = 0.25 + d / 8
        return q

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p"] = list(d["p"]) if d["p"] is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ConstructionParams":
        d = dict(d)
        if d.get("p") is not None:
            d["p"] = tuple(d["p"])
        unknown = sorted(set(d) - set(cls.__dataclass_fields__))
        if unknown:
            raise ValueError(f"unknown parameter(s): {', '.join(unknown)}")
        return cls(**d)


@dataclass
class Check:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)
    info: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "pass": self.ok,
            "checks": [asdict(c) for c in self.checks],
            "info": [asdict(c) for c in self.info],
        }


def ball_to_cubes_distance(params: ConstructionParams) -> float:
    """Distance from the head of p to the fattened cubes K0^eps, K1^eps."""
    cubes = standard_cubes(params.n - 1, params.epsilon)
    head = params.point_p[:-1]
    return float(min(cubes["K0eps"].distance(head), cubes["K1eps"].distance(head)))


def surgery_support_radius(params: ConstructionParams) -> float:
    """Farthest distance from p of the support of phi(x_n) psi(sum x_j^2), n = 2.

    Only the branch with positive first coordinate meets the ball.
    """
    P = params.resolved()
    lo_s, hi_s = Psi(P.theta).support
    xs = [math.sqrt(max(lo_s, 0.0)), math.sqrt(hi_s)]
    ys = list(Phi(P.delta).support)
    p = P.point_p
    return max(math.hypot(x - p[0], y - p[1]) for x in xs for y in ys)


def validate_params(params: ConstructionParams) -> ValidationReport:
    P = params.resolved()
    rep = ValidationReport()
    add = rep.checks.append

    add(Check("2 <= n <= 6", 2 <= P.n <= 6, min(P.n - 2, 6 - P.n)))
    add(Check("0 < kappa < 3", 0 < P.kappa < 3, min(P.kappa, 3 - P.kappa)))
    if P.kappa > 0.1:
        rep.info.append(Check("kappa <= 0.1 (small-cone regime)", False, 0.1 - P.kappa,
                              "cone estimates are only expected to hold for small kappa"))
    gap = 3 / 28 - 1 / 28 - 2 * P.epsilon
    add(Check("eps > 0 and K0^eps, K1^eps disjoint", P.epsilon > 0 and gap > 0, min(P.epsilon, gap)))
    add(Check("0 < a0 < 1/26", 0 < P.a0 < 1 / 26, min(P.a0, 1 / 26 - P.a0)))
    add(Check("sup|g_a0 - Id| = a0/2 < k/2", P.a0 < P.k, (P.k - P.a0) / 2,
              f"k = kappa/m_b = {P.k:.6g}"))
    dist = ball_to_cubes_distance(P)
    add(Check("B(p,r) disjoint from K^eps x S^1", P.r < dist, dist - P.r, f"distance {dist:.6g}"))
    add(Check("0 < theta < r/2", 0 < P.theta < P.r / 2, min(P.theta, P.r / 2 - P.theta)))
    add(Check("0 < delta < 2 theta", 0 < P.delta < 2 * P.theta, min(P.delta, 2 * P.theta - P.delta)))
    lhs = 2 * P.m_psi * P.r * P.delta
    add(Check("2 m_psi r delta < 11 kappa", lhs < 11 * P.kappa, 11 * P.kappa - lhs))
    if P.n == 2:
        rad = surgery_support_radius(P)
        add(Check("supp(phi psi) inside B(p,r)", rad < P.r, P.r - rad,
                  "keeps F continuous across the ball boundary"))
    else:
        rep.info.append(Check("supp(phi psi) inside B(p,r)", False, float("nan"),
                              "the psi-support is a sphere of radius 1/4 in T^{n-1} and always "
                              "leaves the ball for n >= 3; F jumps across part of the ball boundary"))
    return rep


# ---------------------------------------------------------------------------
# maps


class TorusMap:
    """Endomorphism of T^n evaluated on arrays of shape (..., n)."""

    tag = "map"
    exact_head = False

    def __init__(self, n: int):
        if n < 2:
            raise DomainError("n must be >= 2")
        self.n = n

    def __call__(self, x):
        raise NotImplementedError

    def jacobian(self, x):
        raise NotImplementedError

    def det(self, x):
        return np.linalg.det(self.jacobian(x))

    def _prep(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DomainError(f"expected points with {self.n} coordinates")
        return wrap(x)


class StructuredMap(TorusMap):
    """Maps of the form (x, y) -> (14 x, fiber(x, y))."""

    exact_head = True

    def fiber(self, xh, y):
        raise NotImplementedError

    def fiber_gradient(self, xh, y):
        """(d fiber / d xh, d fiber / d y)."""
        raise NotImplementedError

    def __call__(self, x):
        x = self._prep(x)
        xh, y = x[..., :-1], x[..., -1]
        out = np.empty_like(x)
        out[..., :-1] = wrap(EXPANSION * xh)
        out[..., -1] = wrap(self.fiber(xh, y))
        return out

    def jacobian(self, x):
        x = self._prep(x)
        xh, y = x[..., :-1], x[..., -1]
        J = np.zeros(x.shape[:-1] + (self.n, self.n))
        idx = np.arange(self.n - 1)
        J[..., idx, idx] = EXPANSION
        gh, gy = self.fiber_gradient(xh, y)
        J[..., -1, :-1] = gh
        J[..., -1, -1] = gy
        return J

    def det(self, x):
        x = self._prep(x)
        _, gy = self.fiber_gradient(x[..., :-1], x[..., -1])
        return EXPANSION ** (self.n - 1) * gy


class LinearMapA(StructuredMap):
    tag = "A"

    def fiber(self, xh, y):
        return np.asarray(y, dtype=float)

    def fiber_gradient(self, xh, y):
        return np.zeros_like(xh), np.ones_like(y)


def map_A(x):
    x = np.asarray(x, dtype=float)
    return LinearMapA(x.shape[-1])(x)


class BumpU:
    """u = u0 + u1, u_i(x) = prod_j b_i(x_j); plateau on K_i, zero off K_i^eps."""

    def __init__(self, dim: int, eps: float):
        if 2 * eps >= 2 / 28:
            raise DomainError("supports of u0 and u1 overlap")
        self.dim = dim
        self.b0 = PlateauBump(-1 / 28, 1 / 28, eps)
        self.b1 = PlateauBump(3 / 28, 5 / 28, eps)
        self.m_b = math.sqrt(dim) * self.b0.sup_derivative

    @staticmethod
    def _prod(b, xh):
        return np.prod(b(xh), axis=-1)

    @staticmethod
    def _grad(b, xh):
        v = b(xh)
        d = b.derivative(xh)
        g = np.empty_like(np.asarray(xh, dtype=float))
        for j in range(xh.shape[-1]):
            others = np.prod(np.delete(v, j, axis=-1), axis=-1)
            g[..., j] = d[..., j] * others
        return g

    def parts(self, xh):
        xh = np.asarray(xh, dtype=float)
        return self._prod(self.b0, xh), self._prod(self.b1, xh)

    def part_gradients(self, xh):
        xh = np.asarray(xh, dtype=float)
        return self._grad(self.b0, xh), self._grad(self.b1, xh)

    def __call__(self, xh):
        u0, u1 = self.parts(xh)
        return u0 + u1

    def gradient(self, xh):
        g0, g1 = self.part_gradients(xh)
        return g0 + g1


def build_u(params: ConstructionParams):
    U = BumpU(params.n - 1, params.epsilon)
    return U, U.gradient


def build_torus_ifs(params: ConstructionParams) -> IFSFamily:
    """Fiber generators for f: g1 and its translation-conjugate by 2/13."""
    P = params.resolved()
    return build_ifs(k=P.k, a0=P.a0, conjugate=True)


class FHat(StructuredMap):
    """(14x, g1(y)) on K0^eps x S^1 and (14x, g2(y)) on K1^eps x S^1."""

    tag = "fhat"

    def __init__(self, params: ConstructionParams, ifs: IFSFamily | None = None):
        super().__init__(params.n)
        self.params = params.resolved()
        self.ifs = ifs or build_torus_ifs(self.params)
        cubes = standard_cubes(self.n - 1, self.params.epsilon)
        self.k0, self.k1 = cubes["K0eps"], cubes["K1eps"]

    def _which(self, xh):
        in0 = self.k0.contains(xh)
        in1 = self.k1.contains(xh)
        if not np.all(in0 | in1):
            raise DomainError("fhat is only defined on K^eps x S^1")
        return in0

    def fiber(self, xh, y):
        in0 = self._which(xh)
        g1, g2 = self.ifs.generators
        return np.where(in0, g1(y), g2(y))

    def fiber_gradient(self, xh, y):
        in0 = self._which(xh)
        g1, g2 = self.ifs.generators
        return np.zeros_like(np.asarray(xh, dtype=float)), np.where(in0, g1.derivative(y), g2.derivative(y))


class BlendMap(StructuredMap):
    """f(x, y) = (14x, y + u0(x)(g1(y) - y) + u1(x)(g2(y) - y))."""

    tag = "f"

    def __init__(self, params: ConstructionParams, ifs: IFSFamily | None = None):
        super().__init__(params.n)
        self.params = params.resolved()
        self.ifs = ifs or build_torus_ifs(self.params)
        self.u = BumpU(self.n - 1, self.params.epsilon)

    def fiber(self, xh, y):
        u0, u1 = self.u.parts(xh)
        g1, g2 = self.ifs.generators
        y = np.asarray(y, dtype=float)
        return y + u0 * g1.displacement(y) + u1 * g2.displacement(y)

    def fiber_gradient(self, xh, y):
        u0, u1 = self.u.parts(xh)
        d0, d1 = self.u.part_gradients(xh)
        g1, g2 = self.ifs.generators
        y = np.asarray(y, dtype=float)
        D1 = g1.displacement(y)
        D2 = g2.displacement(y)
        gh = d0 * D1[..., None] + d1 * D2[..., None]
        gy = 1 + u0 * (g1.derivative(y) - 1) + u1 * (g2.derivative(y) - 1)
        return gh, gy


def map_f(x, params: ConstructionParams, ifs: IFSFamily | None = None):
    return BlendMap(params, ifs)(x)


def jac_f(x, params: ConstructionParams, ifs: IFSFamily | None = None):
    return BlendMap(params, ifs).jacobian(x)


def build_psi(params: ConstructionParams) -> Psi:
    return Psi(params.theta)


def build_phi(params: ConstructionParams) -> Phi:
    P = params.resolved()
    phi = Phi(P.delta)
    if phi.sup_value > P.delta:
        raise DomainError("phi exceeds delta")
    return phi


class SurgeryMap(BlendMap):
    """F = f off B(p, r); A(x) - phi(x_n) psi(sum_j x_j^2) e_n inside."""

    tag = "F"

    def __init__(self, params: ConstructionParams, ifs: IFSFamily | None = None):
        super().__init__(params, ifs)
        self.psi = build_psi(self.params)
        self.phi = build_phi(self.params)
        self.p = self.params.point_p

    def in_ball(self, xh, y):
        x = np.concatenate([np.asarray(xh, dtype=float), np.asarray(y, dtype=float)[..., None]], axis=-1)
        return torus_dist(x, self.p) < self.params.r

    def fiber(self, xh, y):
        xh = np.asarray(xh, dtype=float)
        y = np.asarray(y, dtype=float)
        outside = super().fiber(xh, y)
        s = np.sum(xh * xh, axis=-1)
        inside = y - self.phi(y) * self.psi(s)
        return np.where(self.in_ball(xh, y), inside, outside)

    def fiber_gradient(self, xh, y):
        xh = np.asarray(xh, dtype=float)
        y = np.asarray(y, dtype=float)
        gh_out, gy_out = super().fiber_gradient(xh, y)
        s = np.sum(xh * xh, axis=-1)
        gh_in = -2 * xh * (self.phi(y) * self.psi.derivative(s))[..., None]
        gy_in = 1 - self.phi.derivative(y) * self.psi(s)
        ball = self.in_ball(xh, y)
        return np.where(ball[..., None], gh_in, gh_out), np.where(ball, gy_in, gy_out)

    def det_exact(self, point) -> Fraction:
        """14^{n-1} (1 - phi'(x_n) psi(sum x_j^2)) in rational arithmetic (inside the ball)."""
        pt = [Fraction(c) for c in point]
        s = sum(c * c for c in pt[:-1])
        return Fraction(EXPANSION) ** (self.n - 1) * (1 - self.phi.exact_derivative(pt[-1]) * self.psi.exact(s))


def map_F(x, params: ConstructionParams, ifs: IFSFamily | None = None):
    return SurgeryMap(params, ifs)(x)


def jac_F(x, params: ConstructionParams, ifs: IFSFamily | None = None):
    return SurgeryMap(params, ifs).jacobian(x)


def det_jac_F(x, params: ConstructionParams, ifs: IFSFamily | None = None):
    return SurgeryMap(params, ifs).det(x)


def build_maps(params: ConstructionParams) -> dict[str, StructuredMap]:
    P = params.resolved()
    ifs = build_torus_ifs(P)
    return {"A": LinearMapA(P.n), "f": BlendMap(P, ifs), "F": SurgeryMap(P, ifs)}


def describe(params: ConstructionParams) -> dict:
    """JSON-ready description of the resolved construction."""
    P = params.resolved()
    ifs = build_torus_ifs(P)
    phi = build_phi(P)
    return {
        "params": P.to_dict(),
        "derived": {
            "m_b": P.m_b,
            "k": P.k,
            "m_psi": P.m_psi,
            "sup_phi": phi.sup_value,
            "q1": P.q1().tolist(),
            "q2": P.q2().tolist(),
        },
        "ifs": ifs.to_dict(),
        "cubes": {k: {"lo": c.lo, "hi": c.hi, "dim": c.dim}
                  for k, c in standard_cubes(P.n - 1, P.epsilon).items()},
    }


def displacement(a, b):
    return torus_diff(a, b)
