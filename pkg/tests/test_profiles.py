from fractions import Fraction

import numpy as np
import pytest

from toruslab.profiles import PHI_CUM, Phi, PlateauBump, Psi
from toruslab.torus_core import DomainError

DELTA = 0.036


def test_plateau_bump():
    b = PlateauBump(-1 / 28, 1 / 28, 1 / 1400)
    assert b(0.0) == 1.0 and b(1 / 28) == 1.0
    assert b(1 / 28 + 1 / 1400) == 0.0 and b(0.5) == 0.0
    x = np.linspace(-0.05, 0.05, 200_001)
    d = b.derivative(x)
    assert np.max(np.abs(d)) <= b.sup_derivative * (1 + 1e-12)
    assert np.max(np.abs(d)) == pytest.approx(b.sup_derivative, rel=1e-4)
    with pytest.raises(DomainError):
        PlateauBump(0.1, 0.0, 0.01)


def test_psi_pins():
    psi = Psi(0.02)
    assert psi.exact(Fraction(1, 16)) == 2
    assert psi(1 / 16) == 2.0
    assert psi(1 / 16 + 0.02) == 0.0
    s = np.linspace(1 / 16 - 0.02, 1 / 16 + 0.02, 100_001)
    assert np.max(np.abs(psi.derivative(s))) == pytest.approx(psi.sup_derivative, rel=1e-6)


def test_phi_pins_exact():
    phi = Phi(DELTA)
    d = Fraction(DELTA)
    q = Fraction(1, 4)
    assert phi.exact(q) == 0
    assert phi.exact_derivative(q) == Fraction(1, 2)
    assert phi.exact_derivative(q + d / 8) == 1
    assert phi.exact_derivative(q + d / 4) == Fraction(-3, 4)
    assert PHI_CUM[-1] == 0


def test_phi_support_and_sup():
    phi = Phi(DELTA)
    lo, hi = phi.support
    x = np.linspace(lo - 0.01, hi + 0.01, 400_001)
    v = phi(x)
    assert np.all(v[(x <= lo) | (x >= hi)] == 0)
    assert np.max(np.abs(v)) == pytest.approx(phi.sup_value, rel=1e-6)
    assert phi.sup_value == pytest.approx(29 * DELTA / 224)
    assert phi.sup_value <= DELTA


def test_phi_derivative_matches_difference_quotient():
    phi = Phi(DELTA)
    x = np.random.default_rng(0).uniform(0.24, 0.28, 2000)
    h = 1e-7
    fd = (phi(x + h) - phi(x - h)) / (2 * h)
    assert np.max(np.abs(fd - phi.derivative(x))) < 1e-4


def test_phi_float_and_exact_agree():
    phi = Phi(DELTA)
    for x in np.linspace(0.24, 0.28, 41):
        assert float(phi.exact(x)) == pytest.approx(float(phi(x)), abs=1e-15)
        assert float(phi.exact_derivative(x)) == pytest.approx(float(phi.derivative(x)), abs=1e-12)
