"""Piecewise polynomials on dyadic half-integer grids.

A :class:`PiecewisePolynomial` lives on the grid of knots ``theta * h`` with
``h = 2**-(grid_scale + 1)``; piece ``theta`` covers ``[theta*h, (theta+1)*h]``
and is stored as coefficients of the local expansion in ``(x - theta*h)``.
At ``grid_scale = 0`` the knots are the half integers and piece ``theta``
is expanded about ``theta/2``, the right knot of piece ``theta - 1``.  The
leading coefficient of piece ``theta`` does not depend on the expansion
point, so the table ``coeffs[:, -1]`` is directly the ``A^n_theta`` table.

All operations are pure; instances are immutable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import kernels

DEGREE_CAP = 24


class IncompatibleGridError(ValueError):
    pass


class DegreeOverflowError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PiecewisePolynomial:
    coeffs: np.ndarray
    theta_min: int
    grid_scale: int = 0
    trunc_tol: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float, copy=True)
        if c.ndim != 2 or c.shape[0] == 0 or c.shape[1] == 0:
            raise ValueError("coeffs must be a nonempty (pieces, degree+1) array")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "theta_min", int(self.theta_min))
        object.__setattr__(self, "grid_scale", int(self.grid_scale))

    @property
    def degree_bound(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def n_pieces(self) -> int:
        return self.coeffs.shape[0]

    @property
    def theta_max(self) -> int:
        return self.theta_min + self.n_pieces - 1

    @property
    def window(self) -> tuple[int, int]:
        return self.theta_min, self.theta_max

    @property
    def width(self) -> float:
        return 2.0 ** -(self.grid_scale + 1)

    @property
    def support(self) -> tuple[float, float]:
        h = self.width
        return self.theta_min * h, (self.theta_max + 1) * h

    def piece(self, theta: int) -> np.ndarray:
        i = theta - self.theta_min
        if 0 <= i < self.n_pieces:
            return self.coeffs[i]
        return np.zeros(self.degree_bound + 1)

    def leading(self) -> dict[int, float]:
        """Leading (degree ``degree_bound``) coefficient per piece index."""
        return {self.theta_min + i: float(v) for i, v in enumerate(self.coeffs[:, -1])}

    def __call__(self, x):
        return evaluate(self, x)

    def replace(self, **kw) -> "PiecewisePolynomial":
        args = dict(coeffs=self.coeffs, theta_min=self.theta_min,
                    grid_scale=self.grid_scale, trunc_tol=self.trunc_tol,
                    meta=dict(self.meta))
        args.update(kw)
        return PiecewisePolynomial(**args)

    def scaled(self, c: float) -> "PiecewisePolynomial":
        return self.replace(coeffs=c * self.coeffs, trunc_tol=abs(c) * self.trunc_tol)

    def trimmed(self, tol: float = 0.0) -> "PiecewisePolynomial":
        """Drop leading/trailing pieces whose coefficients are all ``<= tol``.

        The sup norm of what is dropped is added to ``trunc_tol``.
        """
        h = self.width
        powers = h ** np.arange(self.degree_bound + 1)
        sup = np.abs(self.coeffs) @ powers
        keep = np.nonzero(sup > tol)[0]
        if keep.size == 0:
            return self.replace(coeffs=np.zeros((1, self.degree_bound + 1)),
                                trunc_tol=self.trunc_tol + float(sup.max()))
        lo, hi = keep[0], keep[-1] + 1
        dropped = np.concatenate([sup[:lo], sup[hi:]])
        extra = float(dropped.max()) if dropped.size else 0.0
        return self.replace(coeffs=self.coeffs[lo:hi], theta_min=self.theta_min + lo,
                            trunc_tol=self.trunc_tol + extra)


def from_pieces(pieces: dict[int, Sequence[float]], grid_scale: int = 0,
                trunc_tol: float = 0.0) -> PiecewisePolynomial:
    lo, hi = min(pieces), max(pieces)
    d = max(len(v) for v in pieces.values())
    c = np.zeros((hi - lo + 1, d))
    for th, v in pieces.items():
        c[th - lo, :len(v)] = v
    return PiecewisePolynomial(c, lo, grid_scale, trunc_tol)


def indicator(a: Fraction | float, b: Fraction | float, grid_scale: int = 0) -> PiecewisePolynomial:
    """Indicator of ``[a, b]`` with grid-aligned endpoints."""
    h = Fraction(1, 2 ** (grid_scale + 1))
    ta, tb = Fraction(a) / h, Fraction(b) / h
    if ta.denominator != 1 or tb.denominator != 1 or tb <= ta:
        raise IncompatibleGridError(f"[{a}, {b}] is not aligned with grid scale {grid_scale}")
    return PiecewisePolynomial(np.ones((int(tb - ta), 1)), int(ta), grid_scale)


# -- evaluation ---------------------------------------------------------------

def evaluate(pp: PiecewisePolynomial, x):
    """Value of ``pp`` at ``x``; zero outside the window.

    At a knot the right-hand piece is used.
    """
    xa = np.asarray(x, dtype=float)
    out = kernels.ppoly_eval(pp.coeffs, pp.theta_min, pp.grid_scale, xa.ravel())
    if xa.ndim == 0:
        return float(out[0])
    return out.reshape(xa.shape)


# -- grid manipulation ----------------------------------------------------------

def _shift_matrix(a: float, d: int) -> np.ndarray:
    """``T`` with ``T @ c`` re-expanding ``sum c_m u**m`` about ``u = a``."""
    T = np.zeros((d + 1, d + 1))
    for j in range(d + 1):
        for m in range(j, d + 1):
            T[j, m] = math.comb(m, j) * a ** (m - j)
    return T


def refine(pp: PiecewisePolynomial, grid_scale: int) -> PiecewisePolynomial:
    r = grid_scale - pp.grid_scale
    if r < 0:
        raise IncompatibleGridError("cannot coarsen a piecewise polynomial")
    if r == 0:
        return pp
    m = 2 ** r
    hn = 2.0 ** -(grid_scale + 1)
    d = pp.degree_bound
    out = np.empty((pp.n_pieces, m, d + 1))
    for i in range(m):
        out[:, i, :] = pp.coeffs @ _shift_matrix(i * hn, d).T
    return pp.replace(coeffs=out.reshape(pp.n_pieces * m, d + 1),
                      theta_min=pp.theta_min * m, grid_scale=grid_scale)


def coarsen(pp: PiecewisePolynomial, grid_scale: int, rtol: float = 1e-9) -> PiecewisePolynomial:
    """Merge sibling pieces onto a coarser grid.

    Valid only when no knot of ``pp`` falls strictly inside a coarse piece;
    the merged piece is the left sibling's polynomial, and the right
    siblings are checked against it.
    """
    r = pp.grid_scale - grid_scale
    if r < 0:
        raise IncompatibleGridError("target grid is finer than the source")
    if r == 0:
        return pp
    m = 2 ** r
    lo = pp.theta_min - (pp.theta_min % m)
    hi = pp.theta_max + (m - 1 - pp.theta_max % m)
    c = np.zeros((hi - lo + 1, pp.degree_bound + 1))
    c[pp.theta_min - lo:pp.theta_min - lo + pp.n_pieces] = pp.coeffs
    groups = c.reshape(-1, m, pp.degree_bound + 1)
    hn = pp.width
    d = pp.degree_bound
    scale = np.max(np.abs(c)) if c.size else 0.0
    for i in range(1, m):
        pred = groups[:, 0, :] @ _shift_matrix(i * hn, d).T
        if np.max(np.abs(pred - groups[:, i, :]), initial=0.0) > rtol * max(scale, 1.0):
            raise IncompatibleGridError(f"pieces do not merge onto grid scale {grid_scale}")
    return pp.replace(coeffs=groups[:, 0, :], theta_min=lo // m, grid_scale=grid_scale)


def _pad_degree(c: np.ndarray, d: int) -> np.ndarray:
    if c.shape[1] == d + 1:
        return c
    out = np.zeros((c.shape[0], d + 1))
    out[:, :c.shape[1]] = c
    return out


def transform(pp: PiecewisePolynomial, shift=0, dilation: int = 0) -> PiecewisePolynomial:
    """Exact representation of ``x -> pp(2**dilation * x - shift)``."""
    dilation = int(dilation)
    gs = pp.grid_scale + dilation
    h = Fraction(1, 2 ** (pp.grid_scale + 1)) if pp.grid_scale >= -1 else Fraction(2 ** (-pp.grid_scale - 1))
    off = Fraction(shift) / h
    if off.denominator != 1:
        raise IncompatibleGridError(f"shift {shift} is not a multiple of the piece width {h}")
    scale = 2.0 ** (dilation * np.arange(pp.degree_bound + 1))
    return pp.replace(coeffs=pp.coeffs * scale, theta_min=pp.theta_min + int(off), grid_scale=gs)


def linear_combine(terms: Iterable[tuple]) -> PiecewisePolynomial:
    """Sum of ``coef * pp(2**dilation * x - shift)`` over ``terms``.

    Each term is ``(coef, pp)`` or ``(coef, pp, shift, dilation)``.  Dilations
    are integer exponents, so every term lives on a dyadic grid and the sum is
    formed on the finest one.  Coefficients are accumulated with compensated
    summation; ``trunc_tol`` adds up.
    """
    parts = []
    for t in terms:
        coef, pp = t[0], t[1]
        shift = t[2] if len(t) > 2 else 0
        dil = t[3] if len(t) > 3 else 0
        if isinstance(dil, float) and not float(dil).is_integer():
            raise IncompatibleGridError("dilations must be integer powers of two")
        parts.append((float(coef), transform(pp, shift, int(dil))))
    if not parts:
        raise ValueError("linear_combine needs at least one term")
    gs = max(p.grid_scale for _, p in parts)
    d = max(p.degree_bound for _, p in parts)
    parts = [(c, refine(p, gs)) for c, p in parts]
    lo = min(p.theta_min for _, p in parts)
    hi = max(p.theta_max for _, p in parts)
    total = np.zeros((hi - lo + 1, d + 1))
    comp = np.zeros_like(total)
    tol = 0.0
    for c, p in parts:
        i0 = p.theta_min - lo
        sl = slice(i0, i0 + p.n_pieces)
        add = c * _pad_degree(p.coeffs, d)
        # Neumaier summation, elementwise
        s = total[sl] + add
        big = np.abs(total[sl]) >= np.abs(add)
        comp[sl] += np.where(big, (total[sl] - s) + add, (add - s) + total[sl])
        total[sl] = s
        tol += abs(c) * p.trunc_tol
    return PiecewisePolynomial(total + comp, lo, gs, tol)


# -- convolution ----------------------------------------------------------------

def _poly_mul(a: list, b: list) -> list:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


@lru_cache(maxsize=None)
def _conv_tensors(df: int, dg: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit-width convolution tensors.

    For pieces ``F(u) = sum f_a u**a`` and ``G(w) = sum g_b w**b`` on
    ``[0, 1]``, ``(F*G)`` on ``[0, 1]`` has coefficients
    ``einsum('a,b,abc', f, g, K1)`` and on ``[1, 2]`` (expanded about 1)
    ``einsum('a,b,abc', f, g, K2)``.
    """
    D = df + dg + 1
    K1 = np.zeros((df + 1, dg + 1, D + 1))
    K2 = np.zeros((df + 1, dg + 1, D + 1))
    for a in range(df + 1):
        for b in range(dg + 1):
            K1[a, b, a + b + 1] = float(Fraction(math.factorial(a) * math.factorial(b),
                                                 math.factorial(a + b + 1)))
            # int_w^1 u^a (1 + w - u)^b du as a polynomial in w
            acc = [Fraction(0)] * (D + 1)
            for c in range(b + 1):
                coef = Fraction(math.comb(b, c) * (-1) ** c, a + c + 1)
                one_plus_w = [Fraction(math.comb(b - c, i)) for i in range(b - c + 1)]
                tail = [Fraction(1)] + [Fraction(0)] * (a + c) + [Fraction(-1)]
                prod = _poly_mul(one_plus_w, tail)
                for i, v in enumerate(prod):
                    acc[i] += coef * v
            K2[a, b, :] = [float(v) for v in acc]
    return K1, K2


def convolve(f: PiecewisePolynomial, g: PiecewisePolynomial,
             degree_cap: int = DEGREE_CAP) -> PiecewisePolynomial:
    """Exact convolution ``(f * g)(x) = int f(t) g(x - t) dt``."""
    D = f.degree_bound + g.degree_bound + 1
    if D > degree_cap:
        raise DegreeOverflowError(f"convolution degree {D} exceeds cap {degree_cap}")
    gs = max(f.grid_scale, g.grid_scale)
    f, g = refine(f, gs), refine(g, gs)
    h = f.width
    df, dg = f.degree_bound, g.degree_bound
    F = f.coeffs * h ** np.arange(df + 1)
    G = g.coeffs * h ** np.arange(dg + 1)
    K1, K2 = _conv_tensors(df, dg)
    n = f.n_pieces + g.n_pieces - 1
    R = np.zeros((n + 1, D + 1))
    for a in range(df + 1):
        for b in range(dg + 1):
            cv = np.convolve(F[:, a], G[:, b])
            R[:n] += np.outer(cv, K1[a, b])
            R[1:] += np.outer(cv, K2[a, b])
    R *= h * h ** -np.arange(D + 1.0)
    # each factor's tail contributes at most trunc_tol * ||other||_1
    tol = f.trunc_tol * l1_norm(g) + g.trunc_tol * l1_norm(f)
    return PiecewisePolynomial(R, f.theta_min + g.theta_min, gs, tol)


# -- calculus ----------------------------------------------------------------------

def _hilbert(d1: int, d2: int, h: float) -> np.ndarray:
    a = np.arange(d1 + 1)[:, None]
    b = np.arange(d2 + 1)[None, :]
    return h ** (a + b + 1) / (a + b + 1)


def piece_integrals(pp: PiecewisePolynomial) -> np.ndarray:
    h = pp.width
    j = np.arange(pp.degree_bound + 1)
    return pp.coeffs @ (h ** (j + 1) / (j + 1))


def l1_norm(pp: PiecewisePolynomial, nodes: int = 16) -> float:
    """Approximate ``int |pp|`` (Gauss-Legendre per piece)."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    h = pp.width
    u = (x + 1) * h / 2
    V = np.polynomial.polynomial.polyvander(u, pp.degree_bound)
    return float(np.sum(np.abs(pp.coeffs @ V.T) @ w) * h / 2)


def moment(pp: PiecewisePolynomial, M: int, with_bound: bool = False):
    """``int x**M pp(x) dx`` over the window, by closed-form integration per piece.

    With ``with_bound`` a pair ``(value, bound)`` is returned, where ``bound``
    covers the discarded tail under the assumption that it is dominated by
    ``trunc_tol`` times a geometric decay of one order per unit length.
    """
    if M < 0:
        raise ValueError("moment order must be non-negative")
    h = pp.width
    d = pp.degree_bound
    a = (pp.theta_min + np.arange(pp.n_pieces)) * h
    # int_0^h (a + u)^M u^j du = sum_i C(M,i) a^(M-i) h^(i+j+1)/(i+j+1)
    vals = np.zeros(pp.n_pieces)
    for i in range(M + 1):
        w = math.comb(M, i) * a ** (M - i)
        j = np.arange(d + 1)
        vals += w * (pp.coeffs @ (h ** (i + j + 1) / (i + j + 1)))
    value = math.fsum(vals)
    if not with_bound:
        return value
    lo, hi = pp.support
    R = max(abs(lo), abs(hi)) + 1.0
    bound = 2.0 * pp.trunc_tol * sum(R ** (M - i) * math.factorial(M) / math.factorial(M - i)
                                     for i in range(M + 1))
    return value, bound


def inner_product(f: PiecewisePolynomial, g: PiecewisePolynomial, shift=0,
                  dilation: int = 0, with_bound: bool = False):
    """``int f(x) g(2**dilation * x - shift) dx``, exact on the windows."""
    g2 = transform(g, shift, dilation)
    gs = max(f.grid_scale, g2.grid_scale)
    f2, g2 = refine(f, gs), refine(g2, gs)
    lo = max(f2.theta_min, g2.theta_min)
    hi = min(f2.theta_max, g2.theta_max)
    value = 0.0
    if hi >= lo:
        F = f2.coeffs[lo - f2.theta_min:hi - f2.theta_min + 1]
        G = g2.coeffs[lo - g2.theta_min:hi - g2.theta_min + 1]
        H = _hilbert(f2.degree_bound, g2.degree_bound, f2.width)
        value = math.fsum(np.einsum("ia,ab,ib->i", F, H, G))
    if not with_bound:
        return value
    scale = 2.0 ** (-dilation)
    bound = f.trunc_tol * l1_norm(g) * scale + g.trunc_tol * l1_norm(f)
    return value, bound


def derivative(pp: PiecewisePolynomial) -> PiecewisePolynomial:
    d = pp.degree_bound
    if d == 0:
        return pp.replace(coeffs=np.zeros((pp.n_pieces, 1)), trunc_tol=0.0)
    c = pp.coeffs[:, 1:] * np.arange(1, d + 1)
    return pp.replace(coeffs=c, trunc_tol=0.0)


def antiderivative(pp: PiecewisePolynomial) -> PiecewisePolynomial:
    """Primitive vanishing at the left edge of the window.

    The constant reached at the right edge (the total integral) is not
    carried beyond the window; its magnitude is added to ``trunc_tol``.
    """
    h = pp.width
    d = pp.degree_bound
    c = np.zeros((pp.n_pieces, d + 2))
    c[:, 1:] = pp.coeffs / np.arange(1, d + 2)
    ints = piece_integrals(pp)
    starts = np.concatenate([[0.0], np.cumsum(ints)[:-1]])
    c[:, 0] = starts
    total = float(np.sum(ints))
    return pp.replace(coeffs=c, trunc_tol=pp.trunc_tol * (pp.support[1] - pp.support[0]) + abs(total))


def right_expansion(pp: PiecewisePolynomial) -> np.ndarray:
    """Coefficients of each piece re-expanded about its right knot."""
    return pp.coeffs @ _shift_matrix(pp.width, pp.degree_bound).T


def jumps(pp: PiecewisePolynomial) -> np.ndarray:
    """Jumps of the derivatives at every knot.

    Returns an array ``J`` of shape ``(n_pieces + 1, degree + 1)``; row ``i``
    is the knot ``(theta_min + i) * h`` and ``J[i, j]`` the jump of the
    ``j``-th derivative there (right limit minus left limit).
    """
    d = pp.degree_bound
    fact = np.array([math.factorial(j) for j in range(d + 1)], dtype=float)
    right_vals = pp.coeffs * fact             # derivatives at left ends
    left_vals = right_expansion(pp) * fact    # derivatives at right ends
    J = np.zeros((pp.n_pieces + 1, d + 1))
    J[:-1] += right_vals
    J[1:] -= left_vals
    return J


# -- serialization -----------------------------------------------------------------

def to_csv(pp: PiecewisePolynomial, path, order: int | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# n={order if order is not None else pp.degree_bound} "
                 f"grid_scale={pp.grid_scale} window={pp.theta_min},{pp.theta_max} "
                 f"trunc_tol={pp.trunc_tol!r}\n")
        w = csv.writer(fh)
        w.writerow(["theta", "j", "coeff"])
        for i in range(pp.n_pieces):
            for j in range(pp.degree_bound + 1):
                w.writerow([pp.theta_min + i, j, repr(float(pp.coeffs[i, j]))])


def from_csv(path) -> PiecewisePolynomial:
    with open(path) as fh:
        header = fh.readline().lstrip("# ").split()
        meta = dict(item.split("=", 1) for item in header)
        rows = list(csv.DictReader(fh))
    lo, hi = (int(v) for v in meta["window"].split(","))
    d = max(int(r["j"]) for r in rows)
    c = np.zeros((hi - lo + 1, d + 1))
    for r in rows:
        c[int(r["theta"]) - lo, int(r["j"])] = float(r["coeff"])
    return PiecewisePolynomial(c, lo, int(meta["grid_scale"]), float(meta["trunc_tol"]))
