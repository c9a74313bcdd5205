"""Seeded trigonometric perturbations with certified C^0 / C^1 bounds.

Norm convention: ||P||_{C^1} = max(sup_x ||P(x)||_inf, sup_x max_i sum_j |dP_i/dx_j|).
Each output coordinate is sum_k c_k trig(pi m_k . x) with integer m_k in
[0, 3]^n and trig in {cos, sin}, so row i is bounded by sum |c_k| and its
derivative row-sum by sum |c_k| pi |m_k|_1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .torus_core import DomainError, wrap
from .torus_maps import TorusMap

MAX_FREQ = 3


@dataclass(frozen=True)
class PerturbationField:
    n: int
    freqs: np.ndarray  # (n_out, terms, n) integer multi-indices
    coeffs: np.ndarray  # (n_out, terms)
    kinds: np.ndarray  # (n_out, terms) 0 = cos, 1 = sin

    @property
    def row_c0(self) -> np.ndarray:
        return np.abs(self.coeffs).sum(axis=1)

    @property
    def row_c1(self) -> np.ndarray:
        l1 = np.abs(self.freqs).sum(axis=2)
        return (np.abs(self.coeffs) * np.pi * l1).sum(axis=1)

    @property
    def c0_bound(self) -> float:
        return float(self.row_c0.max()) if self.coeffs.size else 0.0

    @property
    def c1_bound(self) -> float:
        if not self.coeffs.size:
            return 0.0
        return float(max(self.row_c0.max(), self.row_c1.max()))

    def _phase(self, x):
        x = np.asarray(x, dtype=float)
        return np.pi * np.einsum("...j,ktj->...kt", x, self.freqs)

    def __call__(self, x):
        ph = self._phase(x)
        trig = np.where(self.kinds == 0, np.cos(ph), np.sin(ph))
        return np.sum(self.coeffs * trig, axis=-1)

    def jacobian(self, x):
        ph = self._phase(x)
        dtrig = np.where(self.kinds == 0, -np.sin(ph), np.cos(ph))
        w = self.coeffs * dtrig * np.pi  # (..., n_out, terms)
        return np.einsum("...kt,ktj->...kj", w, self.freqs.astype(float))

    def scaled(self, s: float) -> "PerturbationField":
        return PerturbationField(self.n, self.freqs, self.coeffs * s, self.kinds)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "freqs": self.freqs.tolist(),
            "coeffs": self.coeffs.tolist(),
            "kinds": self.kinds.tolist(),
            "c0_bound": self.c0_bound,
            "c1_bound": self.c1_bound,
            "norm": "max(sup|P|_inf, sup max-row-sum |DP|)",
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "PerturbationField":
        return cls(
            int(d["n"]),
            np.asarray(d["freqs"], dtype=np.int64),
            np.asarray(d["coeffs"], dtype=float),
            np.asarray(d["kinds"], dtype=np.int64),
        )


def zero_field(n: int) -> PerturbationField:
    return PerturbationField(n, np.zeros((n, 0, n), dtype=np.int64), np.zeros((n, 0)), np.zeros((n, 0), dtype=np.int64))


def make_perturbation(seed: int, c1_budget: float, n: int = 2, terms: int = 6) -> PerturbationField:
    """Random field rescaled so its certified C^1 bound equals ``c1_budget``."""
    if c1_budget < 0:
        raise DomainError("c1_budget must be non-negative")
    rng = np.random.default_rng(seed)
    freqs = rng.integers(0, MAX_FREQ + 1, size=(n, terms, n))
    coeffs = rng.standard_normal((n, terms))
    kinds = rng.integers(0, 2, size=(n, terms))
    field = PerturbationField(n, freqs, coeffs, kinds)
    bound = field.c1_bound
    if c1_budget == 0 or bound == 0:
        return field.scaled(0.0)
    return field.scaled(c1_budget / bound)


def swept_norms(field: PerturbationField, points: int = 10_000, seed: int = 0) -> tuple[float, float]:
    """Grid/random sweep of (sup|P|_inf, sup max-row-sum |DP|)."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(points, field.n))
    c0 = float(np.abs(field(x)).max()) if field.coeffs.size else 0.0
    c1 = float(np.abs(field.jacobian(x)).sum(axis=-1).max()) if field.coeffs.size else 0.0
    return c0, c1


class PerturbedMap(TorusMap):
    """wrap(base(x) + P(x)) with Jacobian base' + P'."""

    tag = "perturbed"
    exact_head = False

    def __init__(self, base: TorusMap, field: PerturbationField):
        if field.n != base.n:
            raise DomainError("field and map dimensions differ")
        super().__init__(base.n)
        self.base = base
        self.field = field
        self.c1_distance_bound = field.c1_bound
        self.tag = f"{base.tag}+perturbed"

    def __call__(self, x):
        x = self._prep(x)
        return wrap(self.base(x) + self.field(x))

    def jacobian(self, x):
        x = self._prep(x)
        return self.base.jacobian(x) + self.field.jacobian(x)


def apply(base: TorusMap, field: PerturbationField) -> PerturbedMap:
    return PerturbedMap(base, field)
