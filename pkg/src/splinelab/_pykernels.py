"""Pure numpy implementations of the hot kernels.

Same signatures as the compiled ``_ckernels`` module; used when the
extension is not built.
"""

import numpy as np


def ppoly_eval(coeffs, theta_min, grid_scale, x):
    x = np.ascontiguousarray(x, dtype=float)
    h = 2.0 ** -(grid_scale + 1)
    t = np.floor(x / h)
    i = t.astype(np.int64) - theta_min
    inside = (i >= 0) & (i < coeffs.shape[0])
    out = np.zeros_like(x)
    if not inside.any():
        return out
    ii = i[inside]
    u = x[inside] - t[inside] * h
    c = coeffs[ii]
    acc = c[:, -1].copy()
    for j in range(coeffs.shape[1] - 2, -1, -1):
        acc = acc * u + c[:, j]
    out[inside] = acc
    return out


def bump_eval(poly, m, x):
    """``d^m/dx^m exp(-1/(1-x^2))`` given the numerator polynomial ``poly``.

    ``poly`` holds ascending coefficients of ``P_m`` with
    ``omega^(m)(x) = P_m(x) (1-x^2)^(-2m) exp(-1/(1-x^2))``.
    """
    x = np.ascontiguousarray(x, dtype=float)
    out = np.zeros_like(x)
    s = 1.0 - x * x
    ok = s > 1e-3
    if not ok.any():
        return out
    xs = x[ok]
    ss = s[ok]
    p = np.zeros_like(xs)
    for c in poly[::-1]:
        p = p * xs + c
    out[ok] = p * np.exp(-1.0 / ss - 2.0 * m * np.log(ss))
    return out


def jump_sum(pos, knots, weights, scale, poly, m, radius):
    """``sum_j weights[j] * B(scale * (pos - knots[j]) / radius)`` per sample.

    ``pos`` has shape ``(S,)``; ``knots`` and ``weights`` shape ``(S, K)``;
    ``B`` is the ``m``-th derivative of the reference bump.
    """
    z = scale * (pos[:, None] - knots) / radius
    vals = bump_eval(poly, m, z.ravel()).reshape(z.shape)
    return np.sum(weights * vals, axis=1)


def interp_cubic(values, x0, h, x):
    """Four-point Lagrange interpolation of uniform samples; zero off the table.

    Samples beyond either end are taken as zero, which matches tables of
    compactly supported functions whose end values already vanish.
    """
    x = np.ascontiguousarray(x, dtype=float)
    n = values.shape[0]
    u = (x - x0) / h
    out = np.zeros_like(x)
    ok = (u > -1.0) & (u < n)
    if not ok.any():
        return out
    u = u[ok]
    i = np.floor(u).astype(np.int64)
    t = u - i
    padded = np.concatenate([[0.0, 0.0], values, [0.0, 0.0, 0.0]])
    j = i + 2
    f0 = padded[j - 1]
    f1 = padded[j]
    f2 = padded[j + 1]
    f3 = padded[j + 2]
    tm = t - 1.0
    tp = t + 1.0
    t2 = t - 2.0
    out[ok] = (-t * tm * t2 * f0 / 6.0 + tp * tm * t2 * f1 / 2.0
               - tp * t * t2 * f2 / 2.0 + tp * t * tm * f3 / 6.0)
    return out


def prog_table_sum(x, origin, step, count, values, t0, tg):
    """``sum_nu T(x - origin - nu*step)`` over ``0 <= nu < count``.

    ``T`` is the tabulated function ``values`` on the grid ``t0 + m*tg``
    (zero off the table).
    """
    x = np.ascontiguousarray(x, dtype=float)
    out = np.zeros_like(x)
    if count <= 0 or x.size == 0:
        return out
    if count == 1:
        return interp_cubic(values, t0, tg, x - origin)
    t_end = t0 + tg * (values.shape[0] - 1)
    y = x - origin
    hi = np.minimum(np.floor((y - t0 + tg) / step), count - 1).astype(np.int64)
    lo = np.maximum(np.ceil((y - t_end - tg) / step), 0).astype(np.int64)
    span = int(np.max(hi - lo)) + 1 if hi.size else 0
    for t in range(max(span, 0)):
        nu = lo + t
        m = nu <= hi
        if not m.any():
            continue
        z = x[m] - (origin + nu[m] * step)
        out[m] += interp_cubic(values, t0, tg, z)
    return out


def knot_sum(x, h, o_origin, P, count, w, kvals, k0, kg, kscale):
    """Nearest-knot weight times a narrow kernel.

    With ``o`` the knot nearest to ``x`` on the grid ``h``, returns
    ``W(o) * K(kscale * (x - o*h))`` where ``W(o) = sum_nu w[o - o_origin - nu*P]``
    and ``K`` is the table ``kvals`` on ``k0 + m*kg``.
    """
    x = np.ascontiguousarray(x, dtype=float)
    out = np.zeros_like(x)
    if count <= 0 or x.size == 0:
        return out
    o = np.floor(x / h + 0.5).astype(np.int64)
    rel = o - o_origin
    L = w.shape[0]
    W = np.zeros_like(x)
    nu = np.minimum(np.floor_divide(rel, P), count - 1)
    for _ in range(min(L // P + 2, count)):
        idx = rel - nu * P
        m = (nu >= 0) & (idx >= 0) & (idx < L)
        if m.any():
            W[m] += w[idx[m]]
        nu = nu - 1
    nz = W != 0
    if nz.any():
        u = (x[nz] - o[nz] * h) * kscale
        out[nz] = W[nz] * interp_cubic(kvals, k0, kg, u)
    return out
