from fractions import Fraction

import numpy as np
import pytest

from toruslab import orbit_lab as ol
from toruslab.perturbations import apply, make_perturbation
from toruslab.torus_core import torus_diff, wrap
from toruslab.torus_maps import FHat


def test_constant_orbits(maps2):
    pts = list(ol.iterate(maps2["A"], [0.0, 0.0], 5))
    assert len(pts) == 6 and all(np.all(p == 0) for p in pts)
    pts = list(ol.iterate(maps2["f"], [0.0, 1.0], 5))
    assert all(np.allclose(p, [0.0, -1.0]) for p in pts)


def test_float_orbit_of_A_matches_rationals(maps2):
    x = Fraction(1, 14)
    pts = list(ol.iterate(maps2["A"], [1 / 14, 0.3], 10, exact_head=False))
    for i, p in enumerate(pts):
        # rounding error is multiplied by 14 each step
        assert abs(torus_diff(p[0], float(x))) < 1e-16 * 14.0 ** (i + 1)
        assert p[1] == pytest.approx(0.3)
        x = wrap(14 * x)


def test_lattice_orbit_of_A_matches_rationals(maps2):
    k0 = ol.to_lattice(np.array([0.3]))[0]
    x = Fraction(2 * int(k0), ol.LATTICE_Q)
    for p in ol.iterate(maps2["A"], [float(x), 0.1], 30):
        assert p[0] == pytest.approx(float(x), abs=1e-15)
        x = wrap(14 * x)


def test_lattice_is_a_bijection_mod_q():
    k = np.array([1, -5, 123456789], dtype=np.int64)
    for _ in range(100):
        k = ol.lattice_step(k)
        assert np.all(np.abs(k) <= (ol.LATTICE_Q - 1) // 2)
    assert np.all(k != 0)


def test_double_precision_collapse_is_real(maps2):
    pts = list(ol.iterate(maps2["A"], [0.123456789, 0.5], 60, exact_head=False))
    assert pts[-1][0] in (0.0, -1.0)


def test_nonfinite_orbit_aborts(params2):
    class Bad(FHat):
        def fiber(self, xh, y):
            return np.full_like(np.asarray(y, dtype=float), np.nan)

    with pytest.raises(Exception) as exc:
        list(ol.iterate(Bad(params2), [0.0, 0.0], 3))
    assert "non-finite" in str(exc.value) or "non-finite" in repr(exc.value)


def test_kernel_matches_numpy(maps2, params2):
    x0 = ol.random_start(2, 1)
    for k in ("A", "f", "F"):
        a = ol.compiled_trajectory(maps2[k], x0, 3000)
        b = np.array(list(ol.iterate(maps2[k], x0, 3000)))
        assert np.max(np.abs(torus_diff(a, b))) < 1e-10


def test_kernel_matches_numpy_n3(maps3):
    x0 = ol.random_start(3, 2)
    a = ol.compiled_trajectory(maps3["F"], x0, 2000)
    b = np.array(list(ol.iterate(maps3["F"], x0, 2000)))
    assert np.max(np.abs(torus_diff(a, b))) < 1e-10


def test_density_engines_agree(maps2):
    x0 = ol.random_start(2, 4)
    a = ol.orbit_density(maps2["F"], x0, 20_000, 50, engine="numba")
    b = ol.orbit_density(maps2["F"], x0, 20_000, 50, engine="numpy")
    assert a.visited == b.visited


def test_constant_orbit_density(maps2):
    rep = ol.box_density(ol.iterate(maps2["A"], [0.0, 0.0], 100), 10, 100)
    assert rep.fraction == pytest.approx(1 / 100)


def test_density_is_monotone(maps2):
    rep = ol.orbit_density(maps2["F"], ol.random_start(2, 0), 100_000, 100)
    vals = [rep.checkpoints[k] for k in sorted(rep.checkpoints)]
    assert vals == sorted(vals)
    assert vals[-1] == rep.fraction


def test_control_A_stays_in_one_row(maps2):
    rep = ol.orbit_density(maps2["A"], ol.random_start(2, 0), 200_000, 100)
    assert rep.fraction <= 0.01 + 1e-12


def test_perturbed_map_uses_numpy_path(maps2):
    m = apply(maps2["F"], make_perturbation(0, 0.01))
    assert ol.compile_args(m) is None
    rep = ol.orbit_density(m, [0.1, 0.2], 2000, 10)
    assert rep.engine == "numpy"


def test_hitting_trivial_and_control(maps2):
    U = (np.array([0.1, 0.1]), np.array([0.15, 0.15]))
    assert ol.two_set_hitting(maps2["F"], U, U, 10).iterate == 0
    V = (np.array([0.1, 0.6]), np.array([0.15, 0.65]))
    res = ol.two_set_hitting(maps2["A"], U, V, 200)
    assert not res.hit and res.closest_approach >= 0.45 - 1e-12


def test_hitting_for_F(maps2):
    rng = np.random.default_rng(0)
    U = (np.array([0.5, 0.3]), np.array([0.55, 0.35]))
    V = (np.array([-0.4, 0.31]), np.array([-0.35, 0.36]))
    assert ol.two_set_hitting(maps2["F"], U, V, 10_000).hit


def test_exports(tmp_path, maps2):
    pts = list(ol.iterate(maps2["F"], [0.1, 0.2], 10))
    ol.write_orbit_csv(pts, tmp_path / "o.csv")
    assert len(open(tmp_path / "o.csv").readlines()) == 12
    mat = ol.visit_matrix(maps2["F"], [0.1, 0.2], 1000, 20)
    assert mat.sum() == 1001
    ol.write_gnuplot_matrix(mat, tmp_path / "d.dat")
    assert np.loadtxt(tmp_path / "d.dat").shape == (20, 20)
    ol.write_density_csv(mat, tmp_path / "d.csv")
    assert len(open(tmp_path / "d.csv").readlines()) == 401
