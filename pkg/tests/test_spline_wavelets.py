import math

import numpy as np
import pytest
from scipy import integrate

from splinelab import piecewise_poly as pw
from splinelab import spline_wavelets as sw


@pytest.fixture(scope="module")
def sys1():
    return sw.build_system(1)


@pytest.fixture(scope="module")
def sys2():
    return sw.build_system(2)


def _quad_inner(f, g, shift):
    lo = min(f.support[0], g.support[0] + shift)
    hi = max(f.support[1], g.support[1] + shift)
    knots = np.arange(math.floor(2 * lo) / 2, hi + 0.5, 0.5)
    fn = lambda x: float(pw.evaluate(f, x) * pw.evaluate(g, x - shift))
    return math.fsum(integrate.quad(fn, a, b, epsabs=1e-14)[0] for a, b in zip(knots[:-1], knots[1:]))


def test_bspline_values():
    assert np.array_equal(sw.cardinal_bspline(0).coeffs, pw.indicator(0, 1).coeffs)
    assert pw.evaluate(sw.cardinal_bspline(1), 1.0) == pytest.approx(1.0, abs=1e-14)
    assert pw.evaluate(sw.cardinal_bspline(3), 2.0) == pytest.approx(2 / 3, abs=1e-14)


def test_bspline_order_cap():
    with pytest.raises(sw.OrderCapError):
        sw.cardinal_bspline(99)


def test_autocorrelation():
    assert sw.autocorrelation_coeffs(0).tolist() == [1.0]
    a = sw.autocorrelation_coeffs(1)
    assert a == pytest.approx([1 / 6, 2 / 3, 1 / 6], abs=1e-14)
    for n in range(5):
        assert sw.autocorrelation_coeffs(n).sum() == pytest.approx(1.0, abs=1e-12)


def test_orthonormal_coeffs():
    assert sw.orthonormal_coeffs(0) == {0: 1.0}
    c = sw.orthonormal_coeffs(1)
    assert sum(c.values()) == pytest.approx(1.0, abs=1e-10)
    for k, v in c.items():
        assert c.get(-k, 0.0) == pytest.approx(v, abs=1e-13)
    # ratios approach the Euler-Frobenius root 2 - sqrt(3) from below
    r = np.array([abs(c[k + 1] / c[k]) for k in range(4, 14)])
    assert np.all(np.diff(r) > 0)
    assert 0 < (2 - math.sqrt(3)) - r[-1] < 0.01


def test_scaling_function_orthonormal():
    assert np.array_equal(sw.scaling_function(0).coeffs, pw.indicator(0, 1).coeffs)
    Psi = sw.scaling_function(1)
    assert _quad_inner(Psi, Psi, 0) == pytest.approx(1.0, abs=1e-6)
    assert _quad_inner(Psi, Psi, 3) == pytest.approx(0.0, abs=1e-6)


def test_wavelet_n1(sys1):
    psi = sys1.psi
    for M in (0, 1):
        assert abs(pw.moment(psi, M)) < 1e-7
    for m in (0, 1, 2):
        assert _quad_inner(psi, psi, m) == pytest.approx(float(m == 0), abs=1e-6)


def test_haar_system():
    h = sw.haar_system()
    assert pw.evaluate(h.psi, 0.25) == 1.0
    assert h.leading(0) == 1.0 and h.leading(1) == -1.0
    assert h.A_tilde == -2.0
    assert pw.moment(h.psi, 0) == 0.0
    n = sw.normalize_translation(h)
    assert n.translation_offset == 0 and n.A_tilde == -2.0


def test_haar_report_exact():
    rep = sw.verify_properties(sw.haar_system())
    assert rep.ok
    assert rep.gram_defect <= 1e-12


def test_n1_report(sys1):
    rep = sw.verify_properties(sys1)
    assert rep.ok, rep.passed
    assert rep.lemma31_defect <= 1e-7
    assert sys1.decay_gamma > 0 and abs(sys1.A_tilde) > 0


def test_n2_decay_slope(sys2):
    assert sw.leading_decay_slope(sys2) < 0


def test_translation_keeps_properties(sys2):
    moved = sw.normalize_translation(sys2, knot=0)
    assert abs(moved.A_tilde) > 0
    assert sw.verify_properties(moved).ok


def test_jump_table_haar():
    th, J = sw.haar_system().jump_table()
    assert dict(zip(th.tolist(), J.tolist())) == {0: 1.0, 1: -2.0, 2: 1.0}


def test_report_json_is_finite_safe():
    d = sw.verify_properties(sw.haar_system()).to_json()
    assert d["gamma"] == "inf"
    assert d["order"] == 0
