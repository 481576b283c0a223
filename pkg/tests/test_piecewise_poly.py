from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from splinelab import piecewise_poly as pw
from splinelab.spline_wavelets import cardinal_bspline


def haar():
    return pw.linear_combine([(1.0, pw.indicator(0, Fraction(1, 2)), 0, 0),
                              (-1.0, pw.indicator(Fraction(1, 2), 1), 0, 0)])


def test_haar_values():
    h = haar()
    assert pw.evaluate(h, 0.25) == 1.0
    assert pw.evaluate(h, 0.75) == -1.0
    assert pw.evaluate(h, 1.5) == 0.0
    assert pw.evaluate(h, -3.0) == 0.0


def test_linear_combine_shift_and_identity():
    box = cardinal_bspline(0)
    two = pw.linear_combine([(1.0, box, 0, 0), (-1.0, box, 1, 0)])
    assert pw.evaluate(two, 0.5) == 1.0
    assert pw.evaluate(two, 1.5) == -1.0
    same = pw.linear_combine([(1.0, box, 0, 0)])
    assert np.array_equal(same.coeffs, box.coeffs)


def test_box_convolution_is_hat():
    box = cardinal_bspline(0)
    hat = pw.convolve(box, box)
    assert pw.evaluate(hat, 1.0) == pytest.approx(1.0, abs=1e-14)
    assert pw.evaluate(hat, 0.5) == pytest.approx(0.5, abs=1e-14)
    assert hat.support == (0.0, 2.0)


def test_quadratic_bspline_matches_quadrature():
    N1 = cardinal_bspline(1)
    N2 = pw.convolve(N1, cardinal_bspline(0))
    # brute force: int_0^1 N1(1.5 - t) dt
    ref, _ = integrate.quad(lambda t: float(pw.evaluate(N1, 1.5 - t)), 0, 1, points=[0.5])
    assert pw.evaluate(N2, 1.5) == pytest.approx(ref, abs=1e-13)
    assert pw.evaluate(N2, 1.5) == pytest.approx(0.75, abs=1e-14)


def test_moments_of_haar():
    h = haar()
    assert pw.moment(h, 0) == 0.0
    assert pw.moment(h, 1) == pytest.approx(-0.25, abs=1e-15)
    for n in range(4):
        assert pw.moment(cardinal_bspline(n), 0) == pytest.approx(1.0, abs=1e-13)


def test_inner_products_of_haar():
    h = haar()
    assert pw.inner_product(h, h) == pytest.approx(1.0, abs=1e-15)
    assert pw.inner_product(h, h, dilation=1) == pytest.approx(0.0, abs=1e-15)
    assert pw.inner_product(h, h, shift=5) == 0.0


def test_derivative_and_antiderivative():
    hat = cardinal_bspline(1)
    d = pw.derivative(hat)
    assert pw.evaluate(d, 0.3) == pytest.approx(1.0)
    assert pw.evaluate(d, 1.7) == pytest.approx(-1.0)
    H = pw.antiderivative(haar())
    assert pw.evaluate(H, 1.0 - 1e-12) == pytest.approx(0.0, abs=1e-11)
    assert pw.evaluate(H, 0.5) == pytest.approx(0.5, abs=1e-14)


def test_jumps_of_haar():
    J = pw.jumps(haar())
    assert J[:, 0].tolist() == [1.0, -2.0, 1.0]


def test_refine_coarsen_roundtrip():
    N3 = cardinal_bspline(3)
    fine = pw.refine(N3, 2)
    back = pw.coarsen(fine, N3.grid_scale)
    assert np.allclose(back.coeffs, N3.coeffs, atol=1e-13)


def test_csv_roundtrip(tmp_path):
    N2 = cardinal_bspline(2)
    path = tmp_path / "n2.csv"
    pw.to_csv(N2, path, order=2)
    first = path.read_text().splitlines()[:2]
    assert first[0].startswith("# n=2 grid_scale=0 window=")
    assert "trunc_tol=" in first[0]
    assert first[1] == "theta,j,coeff"
    back = pw.from_csv(path)
    assert np.array_equal(back.coeffs, N2.coeffs)
    assert back.theta_min == N2.theta_min


def test_misaligned_indicator_rejected():
    with pytest.raises(pw.IncompatibleGridError):
        pw.indicator(0, Fraction(1, 3))


pieces = st.lists(st.lists(st.floats(-3, 3), min_size=1, max_size=3), min_size=1, max_size=5)


def _pp(rows, lo):
    return pw.from_pieces({lo + i: r for i, r in enumerate(rows)})


@settings(max_examples=40, deadline=None)
@given(pieces, pieces, st.integers(-3, 3), st.integers(-3, 3))
def test_convolution_mass_is_multiplicative(a, b, la, lb):
    f, g = _pp(a, la), _pp(b, lb)
    fg = pw.convolve(f, g)
    m = pw.moment(f, 0) * pw.moment(g, 0)
    assert pw.moment(fg, 0) == pytest.approx(m, abs=1e-9 * (1 + abs(m)))


@settings(max_examples=40, deadline=None)
@given(pieces, st.integers(-4, 4))
def test_derivative_inverts_antiderivative(a, lo):
    f = _pp(a, lo)
    back = pw.derivative(pw.antiderivative(f))
    assert np.allclose(back.coeffs[:, :f.coeffs.shape[1]], f.coeffs, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(pieces, pieces, st.integers(-2, 2))
def test_inner_product_matches_quadrature(a, b, shift):
    f, g = _pp(a, 0), _pp(b, 0)
    val = pw.inner_product(f, g, shift=shift)
    lo, hi = f.support
    grid = np.arange(lo, hi + 0.25, 0.5)
    ref = sum(integrate.quad(lambda x: float(pw.evaluate(f, x) * pw.evaluate(g, x - shift)),
                             u, u + 0.5)[0] for u in grid[:-1])
    assert val == pytest.approx(ref, abs=1e-9 * (1 + abs(ref)))
