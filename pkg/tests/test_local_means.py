import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splinelab import local_means as lm
from splinelab import spline_wavelets as sw
from splinelab import test_functions as tf
from splinelab.multiscale import AtomGroup


@pytest.mark.parametrize("n", [0, 1, 2])
def test_mollifier_moments_and_mass(n):
    phi0, phi = lm.make_mollifier_pair(n)
    assert phi0.moment(0) == pytest.approx(1.0, abs=1e-12)
    assert phi.l1_norm() == pytest.approx(1.0, rel=1e-9)
    assert lm.certify_moments(phi, n + 1) < 1e-10
    assert phi.radius <= 2.0 ** -4


def test_mollifier_radius_cap():
    with pytest.raises(ValueError):
        lm.make_mollifier_pair(0, support_radius=0.5)


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_eta_normaliser_and_parity(n):
    eta = lm.make_eta(n)
    assert lm.half_moment_closed_form(eta, n) == pytest.approx(1.0, rel=1e-13)
    # quadrature of a high derivative cancels; measure it against the L1 mass
    assert abs(eta.moment(n, lo=0.0) - 1.0) < 1e-9 * eta.l1_norm() * eta.radius ** n
    # x^n eta is odd under the standard rule
    x = np.linspace(0.001, eta.radius * 0.99, 50)
    assert np.allclose(x ** n * eta(x), -((-x) ** n) * eta(-x), atol=1e-9 * np.abs(eta(x)).max())


def test_endpoint_parity_rule_degenerate():
    # an even x^n eta with a vanishing n-th moment cannot be normalised
    with pytest.raises(lm.DegenerateNormalizerError):
        lm.make_eta(0, parity_rule=("endpoint", True))
    eta = lm.make_eta(0, parity_rule=("endpoint", False))
    assert eta.order == 3


def test_primitive_stays_compact():
    eta = lm.make_eta(1)
    prim = eta.primitive(2)
    assert prim.order == eta.order - 2
    with pytest.raises(ValueError):
        eta.primitive(eta.order + 1)


@pytest.mark.parametrize("n,offset,tol", [(0, 0, 1e-9), (1, 0, 1e-6), (1, 2, 1e-6)])
def test_wavelet_convolution_against_quadrature(n, offset, tol):
    from scipy.integrate import quad
    sysn = sw.build_system(n)
    phi0, phi = lm.make_mollifier_pair(n)
    tab = lm.convolve_profile(phi, sysn.psi, scale_offset=offset)
    c = 2.0 ** -offset
    for x in c * np.array([-0.03, 0.02, 0.25, 0.49, 0.51, 1.02]):
        lo, hi = x - phi.radius, x + phi.radius
        knots = [k * 0.5 * c for k in range(-80, 80) if lo < k * 0.5 * c < hi]
        ref = quad(lambda u: phi(x - u) * sysn.psi(np.array([u / c]))[0], lo, hi,
                   points=knots or None, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
        assert tab(np.array([x]))[0] == pytest.approx(ref, abs=tol)


def test_zero_mass_kernel_kills_constants():
    # phi has zero mass, so phi * psi vanishes where psi is locally constant
    phi0, phi = lm.make_mollifier_pair(0)
    tab = lm.convolve_profile(phi, sw.build_system(0).psi)
    assert abs(tab(np.array([0.25]))[0]) < 1e-10
    assert abs(tab(np.array([0.75]))[0]) < 1e-10


def test_scale_offset_cap():
    phi0, phi = lm.make_mollifier_pair(0)
    with pytest.raises(lm.ScaleOffsetCapError):
        lm.convolve_profile(phi, lm.make_eta(0), scale_offset=lm.SCALE_OFFSET_CAP + 1)


def _sample_function():
    eta = lm.make_eta(0)
    groups = [AtomGroup(2, 0.1, 0.5, 3, 1.0, 0), AtomGroup(4, 0.3, 0.0, 1, -0.7, 1)]
    return tf.SparseSuperposition(groups, eta, (-1.0, 2.0))


def test_zero_function_norm():
    f = tf.SparseSuperposition([], lm.make_eta(0), (-1.0, 1.0))
    assert lm.fspq_norm(f, -0.6, 4, 1.5).norm == 0.0


@pytest.mark.parametrize("s,p,q", [(-0.6, 4, 1.5), (0.5, 2, 2)])
def test_sampled_norm_matches_dense_grid(s, p, q):
    f = _sample_function()
    phi0, phi = lm.make_mollifier_pair(0)
    res = lm.fspq_norm(f, s, p, q, k_range=(0, 10), samples=2 ** 15)
    dense = lm.dense_local_means_norm(f, s, p, q, phi0, phi, 10, h=2.0 ** -17)
    assert abs(res.norm / dense - 1) < max(3 * res.resolution["rel_err"], 0.01)


def test_dilation_covariance():
    eta = lm.make_eta(0)
    s, p, q = -0.6, 4.0, 1.5
    a = tf.SparseSuperposition([AtomGroup(3, 0.2, 0.0, 1, 1.0, 0)], eta, (-1.0, 2.0))
    b = tf.SparseSuperposition([AtomGroup(5, 0.05, 0.0, 1, 1.0, 0)], eta, (-1.0, 2.0))
    na = lm.fspq_norm(a, s, p, q, k_range=(0, 14)).norm
    nb = lm.fspq_norm(b, s, p, q, k_range=(0, 16)).norm
    assert nb / na == pytest.approx(2.0 ** (2 * (s - 1 / p)), rel=0.02)


def test_littlewood_paley_comparable():
    f = _sample_function()
    s, p, q = -0.6, 4.0, 1.5
    lp = lm.littlewood_paley_norm(f, s, p, q, h=2.0 ** -13)
    loc = lm.fspq_norm(f, s, p, q, k_range=(0, 10)).norm
    assert 0.05 < loc / lp < 20


def test_lp_partition_sums_to_one():
    xi = np.linspace(-300, 300, 2001)
    parts = lm._lp_partition(xi, 8)
    assert np.allclose(sum(parts)[np.abs(xi) < 2 ** 8], 1.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 3.0), st.sampled_from([-1.0, 1.0]))
def test_norm_is_homogeneous(c, sign):
    f = _sample_function()
    g = tf.SparseSuperposition([AtomGroup(x.scale, x.c0, x.spacing, x.count, x.amplitude * c * sign,
                                          x.sign_key) for x in f.groups], f.profile, f.domain)
    a = lm.fspq_norm(f, -0.6, 4, 1.5, k_range=(0, 8), samples=2 ** 12).norm
    b = lm.fspq_norm(g, -0.6, 4, 1.5, k_range=(0, 8), samples=2 ** 12).norm
    assert b == pytest.approx(c * a, rel=1e-9)


def test_profile_json_roundtrip():
    eta = lm.make_eta(2)
    back = lm.BumpProfile.from_json(eta.to_json())
    x = np.linspace(-eta.radius, eta.radius, 31)
    assert np.allclose(back(x), eta(x))
    assert math.isclose(back.radius, eta.radius)
