import csv

import numpy as np
import pytest

from toruslab import singular as sg
from toruslab.perturbations import apply, make_perturbation, zero_field


def test_zero_perturbation_witness(params2, maps2):
    w = sg.persistence_check(apply(maps2["F"], zero_field(2)), params2)
    assert w.ok
    assert abs(w.det) <= 1e-8 * 14
    assert params2.q2()[-1] <= w.point[-1] <= params2.q1()[-1]


def test_box_around_p_has_witnesses(params2, maps2):
    p = params2.point_p
    ws = sg.critical_locus_sample(maps2["F"], (p - 0.003, p + 0.003), 0.001)
    assert ws and all(w.ok for w in ws)


def test_far_box_has_no_witnesses(maps2):
    assert sg.critical_locus_sample(maps2["F"], (np.array([-0.8, -0.8]), np.array([-0.6, -0.6])), 0.01) == []


def test_witnesses_lie_in_supports(params2, maps2):
    segs = sg.annulus_segments(params2, 20, seed=1)
    ws = [w for s in segs for w in sg.critical_locus_sample(maps2["F"], s)]
    assert len(ws) == 20
    P = params2
    for w in ws:
        x = np.array(w.point)
        s = float(np.sum(x[:-1] ** 2))
        assert np.linalg.norm(x - P.point_p) < P.r
        assert 1 / 16 - P.theta < s < 1 / 16 + P.theta
        assert 0.25 - P.delta / 4 <= x[-1] <= 0.25 + 3 * P.delta / 4


@pytest.mark.parametrize("n", [2, 3])
def test_harness_small(n):
    from toruslab.torus_maps import ConstructionParams

    P = ConstructionParams(n=n).resolved()
    res = sg.persistence_harness(P, 20, 0.5, seed=3)
    assert res["pass"] and not res["failures"]


def test_adversarial_perturbation(params2):
    m = sg.adversarial_perturbation(params2, 0.99)
    assert m.field.c1_bound == pytest.approx(0.99)
    assert m.det(params2.q2()) > -14.0  # the bump does push det upward
    assert sg.persistence_check(m, params2).ok


def test_failure_is_reported_for_oversized_perturbation(params2, maps2):
    # not covered by the precondition: a perturbation that flips det at q2
    m = sg.adversarial_perturbation(params2, 3.0)
    res = sg.persistence_check(m, params2)
    assert not res.ok
    assert res.det_q2 > 0


def test_csv_export(tmp_path, params2, maps2):
    ws = sg.critical_locus_sample(maps2["F"], ("segment", params2.q2(), params2.q1()))
    path = tmp_path / "w.csv"
    sg.write_witnesses_csv(ws, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["x1", "x2", "det", "residual"] and len(rows) == 2
