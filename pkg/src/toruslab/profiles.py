"""Scalar C^1 profiles: plateau bumps, the surgery bump psi, and the step phi.

Each profile evaluates on floats/arrays and, through ``exact``, on Fractions,
so identities at pinned knots can be checked in rational arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .torus_core import DomainError, torus_diff


def _smoothstep(s):
    return np.minimum(s * s * s * (10 - 15 * s + 6 * s * s), 1.0)


def _smoothstep_d(s):
    return 30 * s * s * (1 - s) * (1 - s)


@dataclass(frozen=True)
class PlateauBump:
    """1 on [lo, hi], 0 off [lo - eps, hi + eps], quintic smoothstep between (periodic)."""

    lo: float
    hi: float
    eps: float

    def __post_init__(self):
        if self.eps <= 0 or self.lo >= self.hi:
            raise DomainError("bad plateau bump")

    @property
    def support(self):
        return (self.lo - self.eps, self.hi + self.eps)

    @property
    def sup_value(self):
        return 1.0

    @property
    def sup_derivative(self):
        return 15 / (8 * self.eps)

    def _s(self, x):
        mid = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo)
        d = torus_diff(x, mid)
        s = np.clip((half + self.eps - np.abs(d)) / self.eps, 0.0, 1.0)
        return s, d

    def __call__(self, x):
        s, _ = self._s(x)
        return _smoothstep(s)

    def derivative(self, x):
        s, d = self._s(x)
        return -np.sign(d) * _smoothstep_d(s) / self.eps


@dataclass(frozen=True)
class Psi:
    """psi(s) = 2 (1 - t^2)^2 with t = (s - 1/16)/theta on |t| < 1, else 0."""

    theta: float
    center: float = 1 / 16
    height: float = 2.0

    def __post_init__(self):
        if self.theta <= 0:
            raise DomainError("theta must be positive")

    @property
    def support(self):
        return (self.center - self.theta, self.center + self.theta)

    @property
    def sup_value(self):
        return self.height

    @property
    def sup_derivative(self):
        # max |d/dt (1-t^2)^2| = 8/(3 sqrt 3) at t = 1/sqrt 3
        return self.height * 8 / (3 * np.sqrt(3)) / self.theta

    def __call__(self, s):
        t = (np.asarray(s, dtype=float) - self.center) / self.theta
        return np.where(np.abs(t) < 1, self.height * (1 - t * t) ** 2, 0.0)

    def derivative(self, s):
        t = (np.asarray(s, dtype=float) - self.center) / self.theta
        return np.where(np.abs(t) < 1, -4 * self.height * t * (1 - t * t) / self.theta, 0.0)

    def exact(self, s) -> Fraction:
        s = Fraction(s)
        t = (s - Fraction(self.center)) / Fraction(self.theta)
        if abs(t) >= 1:
            return Fraction(0)
        return Fraction(self.height) * (1 - t * t) ** 2


# phi' in units t = (x - 1/4)/delta: piecewise linear through these knots.
# The left lobe (-1/4..0) and right part (0..3/4) each integrate to zero, so
# phi vanishes off the support and phi(1/4) = 0.
PHI_KNOTS_T = (
    Fraction(-1, 4), Fraction(-1, 8), Fraction(0), Fraction(1, 8),
    Fraction(1, 4), Fraction(13, 24), Fraction(3, 4),
)
PHI_KNOTS_D = (
    Fraction(0), Fraction(-1, 4), Fraction(1, 2), Fraction(1),
    Fraction(-3, 4), Fraction(0), Fraction(0),
)


def _phi_cumulative():
    out = [Fraction(0)]
    for i in range(len(PHI_KNOTS_T) - 1):
        h = PHI_KNOTS_T[i + 1] - PHI_KNOTS_T[i]
        out.append(out[-1] + h * (PHI_KNOTS_D[i] + PHI_KNOTS_D[i + 1]) / 2)
    return tuple(out)


PHI_CUM = _phi_cumulative()


def _phi_sup_unit() -> Fraction:
    """max |phi| / delta: phi is extremal at knots or where phi' crosses zero."""
    best = max(abs(c) for c in PHI_CUM)
    for i in range(len(PHI_KNOTS_T) - 1):
        d0, d1 = PHI_KNOTS_D[i], PHI_KNOTS_D[i + 1]
        if d0 * d1 < 0:
            h = PHI_KNOTS_T[i + 1] - PHI_KNOTS_T[i]
            tau = h * d0 / (d0 - d1)
            best = max(best, abs(PHI_CUM[i] + d0 * tau + (d1 - d0) / h * tau * tau / 2))
    return best


PHI_SUP_UNIT = _phi_sup_unit()


@dataclass(frozen=True)
class Phi:
    """phi with phi(1/4) = 0 and C^0 piecewise-linear phi' pinned at
    phi'(1/4) = 1/2, phi'(1/4 + delta/8) = 1, phi'(1/4 + delta/4) = -3/4,
    supported in [1/4 - delta/4, 1/4 + 3 delta/4]."""

    delta: float
    center: float = 0.25

    def __post_init__(self):
        if self.delta <= 0:
            raise DomainError("delta must be positive")
        if PHI_CUM[-1] != 0 or PHI_CUM[2] != 0:
            raise DomainError("phi' lobes do not integrate to zero")

    @property
    def support(self):
        return (self.center - self.delta / 4, self.center + 3 * self.delta / 4)

    @property
    def sup_value(self):
        return float(PHI_SUP_UNIT) * self.delta

    @property
    def sup_derivative(self):
        return float(max(abs(d) for d in PHI_KNOTS_D))

    def _t(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.delta

    def derivative(self, x):
        t = self._t(x)
        return np.interp(t, [float(k) for k in PHI_KNOTS_T], [float(d) for d in PHI_KNOTS_D], left=0.0, right=0.0)

    def __call__(self, x):
        t = self._t(x)
        kt = np.array([float(k) for k in PHI_KNOTS_T])
        kd = np.array([float(d) for d in PHI_KNOTS_D])
        kc = np.array([float(c) for c in PHI_CUM])
        i = np.clip(np.searchsorted(kt, t, side="right") - 1, 0, len(kt) - 2)
        h = kt[i + 1] - kt[i]
        tau = np.clip(t - kt[i], 0.0, h)
        slope = (kd[i + 1] - kd[i]) / h
        val = kc[i] + kd[i] * tau + 0.5 * slope * tau * tau
        inside = (t > kt[0]) & (t < kt[-1])
        return self.delta * np.where(inside, val, 0.0)

    def exact_derivative(self, x) -> Fraction:
        t = (Fraction(x) - Fraction(self.center)) / Fraction(self.delta)
        if t <= PHI_KNOTS_T[0] or t >= PHI_KNOTS_T[-1]:
            return Fraction(0)
        for i in range(len(PHI_KNOTS_T) - 1):
            a, b = PHI_KNOTS_T[i], PHI_KNOTS_T[i + 1]
            if a <= t <= b:
                return PHI_KNOTS_D[i] + (PHI_KNOTS_D[i + 1] - PHI_KNOTS_D[i]) * (t - a) / (b - a)
        raise AssertionError("unreachable")

    def exact(self, x) -> Fraction:
        t = (Fraction(x) - Fraction(self.center)) / Fraction(self.delta)
        if t <= PHI_KNOTS_T[0] or t >= PHI_KNOTS_T[-1]:
            return Fraction(0)
        for i in range(len(PHI_KNOTS_T) - 1):
            a, b = PHI_KNOTS_T[i], PHI_KNOTS_T[i + 1]
            if a <= t <= b:
                slope = (PHI_KNOTS_D[i + 1] - PHI_KNOTS_D[i]) / (b - a)
                tau = t - a
                return Fraction(self.delta) * (PHI_CUM[i] + PHI_KNOTS_D[i] * tau + slope * tau * tau / 2)
        raise AssertionError("unreachable")
