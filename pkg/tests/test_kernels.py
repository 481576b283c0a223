import numpy as np
import pytest

from splinelab import _pykernels as py
from splinelab import kernels
from splinelab.local_means import bump_poly

try:
    from splinelab import _ckernels as cy
except ImportError:  # extension not built
    cy = None

needs_ext = pytest.mark.skipif(cy is None, reason="compiled kernels not built")


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")


@needs_ext
def test_ppoly_eval_parity():
    rng = np.random.default_rng(0)
    coeffs = rng.normal(size=(7, 3))
    x = rng.uniform(-3, 3, 500)
    assert np.allclose(cy.ppoly_eval(coeffs, -2, 1, x), py.ppoly_eval(coeffs, -2, 1, x), rtol=1e-13, atol=1e-13)


@needs_ext
@pytest.mark.parametrize("m", [0, 2, 5])
def test_bump_eval_parity(m):
    poly = np.array(bump_poly(m), dtype=float)
    x = np.linspace(-1.2, 1.2, 801)
    a, b = cy.bump_eval(poly, m, x), py.bump_eval(poly, m, x)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(b).max())


@needs_ext
def test_interp_and_progression_parity():
    rng = np.random.default_rng(1)
    vals = np.sin(np.linspace(0, 3, 200))
    x = rng.uniform(-0.5, 3.5, 400)
    assert np.allclose(cy.interp_cubic(vals, 0.0, 0.015, x), py.interp_cubic(vals, 0.0, 0.015, x), atol=1e-14)
    a = cy.prog_table_sum(x, 0.1, 0.7, 5, vals, -0.2, 0.01)
    b = py.prog_table_sum(x, 0.1, 0.7, 5, vals, -0.2, 0.01)
    assert np.allclose(a, b, atol=1e-13)


@needs_ext
def test_knot_and_jump_sum_parity():
    rng = np.random.default_rng(2)
    x = np.sort(rng.uniform(-1, 1, 300))
    w = rng.normal(size=12)
    kv = np.cos(np.linspace(-1.5, 1.5, 101))
    a = cy.knot_sum(x, 0.0625, -8, 3, 4, w, kv, -1.0, 0.02, 16.0)
    b = py.knot_sum(x, 0.0625, -8, 3, 4, w, kv, -1.0, 0.02, 16.0)
    assert np.allclose(a, b, atol=1e-13)
    poly = np.array(bump_poly(2), dtype=float)
    knots = rng.uniform(-1, 1, (300, 5))
    wts = rng.normal(size=(300, 5))
    a = cy.jump_sum(x, knots, wts, 8.0, poly, 2, 0.5)
    b = py.jump_sum(x, knots, wts, 8.0, poly, 2, 0.5)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
