"""Local means: mollifier pairs, test bumps and Triebel-Lizorkin norm estimates.

Every bump here is a derivative of one reference profile
``omega(x) = exp(-1/(1 - x^2))`` rescaled to radius ``r``.  Writing
``D^m omega_r`` for the ``m``-th derivative of ``omega(x / r)``, a profile
``c * D^m omega_r`` has vanishing moments of orders ``0..m-1`` and the
parity of ``m``, and its ``j``-fold primitive is ``c * D^(m-j) omega_r``,
again compactly supported.  All of this holds structurally, so nothing
has to be solved for; the moments are still re-checked by quadrature.

The derivatives are ``omega^(m) = P_m(x) (1-x^2)^(-2m) omega(x)`` with
``P_0 = 1`` and ``P_{m+1} = P_m' s^2 + 4 m x s P_m - 2 x P_m`` where
``s = 1 - x^2``.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import kernels

MOLLIFIER_RADIUS = 2.0 ** -4
ETA_RADIUS = 2.0 ** -5
PROFILE_SAMPLES = 2 ** 12
SCALE_OFFSET_CAP = 24
_GAUSS_NODES = 24
_PPOLY_PANELS = 16


class DegenerateNormalizerError(ArithmeticError):
    pass


class AnnulusVanishingError(ArithmeticError):
    pass


class ScaleOffsetCapError(ValueError):
    pass


class ResolutionError(ArithmeticError):
    pass


# -- the reference bump ------------------------------------------------------------

def _pmul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _padd(*ps):
    n = max(len(p) for p in ps)
    out = [0] * n
    for p in ps:
        for i, v in enumerate(p):
            out[i] += v
    return out


@lru_cache(maxsize=None)
def bump_poly(m: int) -> tuple:
    """Integer coefficients (ascending) of ``P_m``."""
    if m == 0:
        return (1,)
    P = list(bump_poly(m - 1))
    k = m - 1
    s = [1, 0, -1]
    dP = [i * c for i, c in enumerate(P)][1:] or [0]
    t1 = _pmul(dP, _pmul(s, s))
    t2 = _pmul([0, 4 * k], _pmul(s, P))
    t3 = _pmul([0, -2], P)
    out = _padd(t1, t2, t3)
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return tuple(out)


def omega_derivative(m: int, x, radius: float = 1.0):
    """``D^m omega_r`` at ``x`` (zero outside ``(-r, r)``)."""
    if m < 0:
        raise ValueError("derivative order must be non-negative")
    xa = np.asarray(x, dtype=float)
    poly = np.array(bump_poly(m), dtype=float)
    out = kernels.bump_eval(poly, m, (xa / radius).ravel()) * radius ** -m
    if xa.ndim == 0:
        return float(out[0])
    return out.reshape(xa.shape)


def _gauss(a: float, b: float, panels: int, nodes: int = _GAUSS_NODES):
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    X = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    W = (half[:, None] * w[None, :]).ravel()
    return X, W


# -- profiles ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BumpProfile:
    """``coeff * D^order omega_radius`` with certified moments and parity."""

    name: str
    order: int
    radius: float
    coeff: float = 1.0
    vanishing_moments: int = -1
    parity: str = "none"
    derivative_order_used: int = 0
    meta: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.coeff * omega_derivative(self.order, x, self.radius)

    @property
    def support(self) -> tuple[float, float]:
        return -self.radius, self.radius

    @property
    def key(self) -> str:
        return f"{self.name}:{self.order}:{self.radius!r}:{self.coeff!r}"

    @property
    def samples(self) -> np.ndarray:
        x = np.linspace(-self.radius, self.radius, PROFILE_SAMPLES + 1)
        return self(x)

    def primitive(self, j: int = 1) -> "BumpProfile":
        """The ``j``-fold primitive, supported on the same interval."""
        if j > self.order:
            raise ValueError(f"primitive of order {j} leaves the compactly supported family")
        m = self.order - j
        return BumpProfile(f"{self.name}_prim{j}", m, self.radius, self.coeff,
                           vanishing_moments=m - 1, parity=_parity(m),
                           derivative_order_used=m)

    def quadrature(self, panels: int = 64):
        X, W = _gauss(-self.radius, self.radius, panels)
        return X, W * self(X)

    def moment(self, M: int, lo: float | None = None, hi: float | None = None,
               weight_power: int | None = None) -> float:
        a = -self.radius if lo is None else max(lo, -self.radius)
        b = self.radius if hi is None else min(hi, self.radius)
        if b <= a:
            return 0.0
        X, W = _gauss(a, b, 64 * max(1, self.order))
        return float(np.sum(W * X ** M * self(X)))

    def l1_norm(self) -> float:
        X, W = _gauss(-self.radius, self.radius, 128 * max(1, self.order))
        return float(np.sum(W * np.abs(self(X))))

    def scaled(self, c: float, **kw) -> "BumpProfile":
        args = dict(name=self.name, order=self.order, radius=self.radius,
                    coeff=self.coeff * c, vanishing_moments=self.vanishing_moments,
                    parity=self.parity, derivative_order_used=self.derivative_order_used,
                    meta=dict(self.meta))
        args.update(kw)
        return BumpProfile(**args)

    def to_json(self) -> dict:
        return {"name": self.name, "order": self.order, "radius": self.radius,
                "coeff": self.coeff, "vanishing_moments": self.vanishing_moments,
                "parity": self.parity}

    @classmethod
    def from_json(cls, d: dict) -> "BumpProfile":
        return cls(d["name"], int(d["order"]), float(d["radius"]), float(d["coeff"]),
                   int(d.get("vanishing_moments", int(d["order"]) - 1)),
                   d.get("parity", _parity(int(d["order"]))), int(d["order"]))


def _parity(m: int) -> str:
    return "even" if m % 2 == 0 else "odd"


def certify_moments(prof: BumpProfile, upto: int, tol: float = 1e-10) -> float:
    """Largest ``|int x^M prof|`` over ``M <= upto``, normalised by the profile's L1 mass."""
    scale = prof.l1_norm() * max(prof.radius, 1.0) ** upto
    worst = max((abs(prof.moment(M)) for M in range(upto + 1)), default=0.0)
    worst /= scale if scale > 0 else 1.0
    if worst > tol:
        raise ArithmeticError(f"{prof.name}: moment defect {worst:.3e} above {tol:.1e}")
    return worst


def reference_bump(radius: float) -> BumpProfile:
    return BumpProfile("omega", 0, radius, 1.0, vanishing_moments=-1, parity="even")


def fourier_transform(prof: BumpProfile, xi) -> np.ndarray:
    """``int prof(x) exp(-i x xi) dx`` by Gauss quadrature."""
    X, W = prof.quadrature(128)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    return np.exp(-1j * np.outer(xi, X)) @ W


def admissible_epsilon(radius: float, samples: int = 512) -> float:
    """Largest ``eps`` (up to a safety factor) with ``omega_r^`` nonvanishing on ``[0, eps]``."""
    omega = reference_bump(radius)
    xi = np.linspace(0, 40.0 / radius, samples)
    F = fourier_transform(omega, xi).real
    sign_change = np.nonzero(F <= 0)[0]
    first = xi[sign_change[0]] if sign_change.size else xi[-1]
    return 0.5 * float(first)


def make_mollifier_pair(n: int, support_radius: float = MOLLIFIER_RADIUS,
                        retries: int = 3) -> tuple[BumpProfile, BumpProfile]:
    """``(phi0, phi)``: unit-mass even bump and the ``(n+2)``-th derivative bump.

    ``phi`` has unit L1 norm and vanishing moments up to order ``n+1``.
    Both Fourier transforms are checked to be nonzero on the required
    sets; a narrower reference bump is tried if the check fails.
    """
    if support_radius > MOLLIFIER_RADIUS:
        raise ValueError("support radius must not exceed 2^-4")
    r = support_radius
    for _ in range(retries + 1):
        omega = reference_bump(r)
        mass = omega.moment(0)
        phi0 = BumpProfile("phi0", 0, r, 1.0 / mass, vanishing_moments=-1, parity="even",
                           derivative_order_used=0)
        raw = BumpProfile("phi", n + 2, r, 1.0)
        phi = raw.scaled(1.0 / raw.l1_norm(), vanishing_moments=n + 1,
                         parity=_parity(n + 2), derivative_order_used=n + 2)
        eps = admissible_epsilon(r)
        xi0 = np.linspace(0, eps, 64, endpoint=False)
        xi1 = np.linspace(eps / 4, eps, 64)[1:-1]
        low = np.min(np.abs(fourier_transform(phi0, xi0)))
        ann = np.min(np.abs(fourier_transform(phi, xi1)))
        if low > 1e-8 and ann > 1e-12:
            certify_moments(phi, n + 1)
            meta = {"epsilon": eps, "min_phi0_hat": float(low), "min_phi_hat_annulus": float(ann)}
            return phi0.scaled(1.0, meta=meta), phi.scaled(1.0, meta=meta)
        r /= 2
    raise AnnulusVanishingError("no admissible reference bump width found")


def make_eta(n: int, parity_rule="standard", radius: float = ETA_RADIUS) -> BumpProfile:
    """The test bump: moments ``0..n+2`` vanish and ``int_0^{1/2} x^n eta = 1``.

    ``parity_rule`` is ``"standard"`` (``x^n eta`` odd) or
    ``("endpoint", same_sign)`` where ``same_sign`` tells whether the two
    leading coefficients adjacent to the reference knot share a sign; the
    rule then asks for ``x^n eta`` even in that case, which uses the
    ``(n+4)``-th derivative.  An even ``x^n eta`` with vanishing ``n``-th
    moment has zero half-line moment, so that request raises
    :class:`DegenerateNormalizerError`.
    """
    if parity_rule == "standard":
        m = n + 3
    else:
        tag, same_sign = parity_rule
        if tag != "endpoint":
            raise ValueError(f"unknown parity rule {parity_rule!r}")
        m = n + 4 if same_sign else n + 3
    raw = BumpProfile("eta", m, radius, 1.0)
    # int_0^inf x^n D^m omega = (-1)^(n+1) n! D^(m-n-1) omega(0), and
    # D^j omega(0) = P_j(0) / e with an integer P_j(0)
    if bump_poly(m - n - 1)[0] == 0:
        raise DegenerateNormalizerError(
            f"int_0^(1/2) x^{n} eta vanishes for derivative order {m}")
    half = half_moment_closed_form(raw, n)
    quad = raw.moment(n, lo=0.0)
    # high derivatives cancel heavily, so compare against the L1 mass
    if abs(quad - half) > 1e-9 * raw.l1_norm() * radius ** n:
        raise ArithmeticError(f"half-line moment quadrature {quad!r} disagrees with {half!r}")
    c = 1.0 / half
    eta = raw.scaled(c, vanishing_moments=m - 1, parity=_parity(m),
                     derivative_order_used=m)
    eta.meta.update({"half_moment": eta.moment(n, lo=0.0), "xn_parity": _parity(m + n)})
    certify_moments(eta, n + 2)
    return eta


def half_moment_closed_form(eta: BumpProfile, n: int) -> float:
    """``int_0^inf x^n eta`` from ``(-1)^(n+1) n! D^(m-n-1) omega_r(0)``."""
    m = eta.order
    return (-1) ** (n + 1) * math.factorial(n) * eta.coeff * omega_derivative(m - n - 1, 0.0, eta.radius)


# -- tabulated convolutions -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Table:
    """Uniform samples of a function vanishing outside ``[x0, x0 + h*(len-1)]``."""

    x0: float
    h: float
    values: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return kernels.interp_cubic(self.values, self.x0, self.h, x.ravel()).reshape(x.shape)

    @property
    def span(self) -> tuple[float, float]:
        return self.x0, self.x0 + self.h * (self.values.size - 1)


def _cache_dir() -> Path | None:
    d = os.environ.get("SPLINELAB_CACHE")
    if not d:
        return None
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


_TABLES: dict = {}


def cached_table(key: str, builder) -> Table:
    """Memoised table, mirrored in ``$SPLINELAB_CACHE`` when that is set."""
    if key in _TABLES:
        return _TABLES[key]
    d = _cache_dir()
    path = None
    if d is not None:
        path = d / (hashlib.sha256(key.encode()).hexdigest()[:32] + ".npz")
        if path.exists():
            z = np.load(path)
            t = Table(float(z["x0"]), float(z["h"]), z["values"])
            _TABLES[key] = t
            return t
    t = builder()
    _TABLES[key] = t
    if path is not None:
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, x0=t.x0, h=t.h, values=t.values)
        os.replace(tmp, path)
    return t


def _conv_table(kernel: BumpProfile, target: BumpProfile, offset: int, points: int) -> Table:
    """Samples of ``w -> int kernel(w - u) target(2^offset u) du``.

    All derivatives of the narrower factor are moved onto the wider one, so
    the quadrature runs against a positive bump and nothing cancels.
    """
    rk = kernel.radius
    rt = target.radius * 2.0 ** -offset
    W = rk + rt
    w = np.linspace(-W, W, points)
    out = np.empty(points)
    if max(rk, rt) < 4 * min(rk, rt):
        # comparable widths: a plain product rule on the common support
        U, Wt = _gauss(-min(rk, rt), min(rk, rt), 128)
        if rt <= rk:
            vals_t = target(U * 2.0 ** offset) * Wt
            for s in range(0, points, 512):
                ws = w[s:s + 512]
                out[s:s + 512] = kernel(ws[:, None] - U[None, :]) @ vals_t
        else:
            vals_k = kernel(U) * Wt
            for s in range(0, points, 512):
                ws = w[s:s + 512]
                out[s:s + 512] = target((ws[:, None] - U[None, :]) * 2.0 ** offset) @ vals_k
    elif rt <= rk:
        wide = BumpProfile("k", kernel.order + target.order, rk, kernel.coeff)
        factor = 2.0 ** (-offset * target.order)
        U, Wt = _gauss(-rt, rt, 32)
        vals_t = omega_derivative(0, U * 2.0 ** offset, target.radius) * Wt * target.coeff * factor
        for s in range(0, points, 512):
            ws = w[s:s + 512]
            out[s:s + 512] = wide(ws[:, None] - U[None, :]) @ vals_t
    else:
        wide = BumpProfile("t", target.order + kernel.order, target.radius, target.coeff)
        factor = 2.0 ** (offset * kernel.order)
        V, Wk = _gauss(-rk, rk, 32)
        vals_k = omega_derivative(0, V, rk) * Wk * kernel.coeff * factor
        for s in range(0, points, 512):
            ws = w[s:s + 512]
            out[s:s + 512] = wide((ws[:, None] - V[None, :]) * 2.0 ** offset) @ vals_k
    return Table(-W, 2 * W / (points - 1), out)


def convolve_profile(kernel: BumpProfile, target, scale_offset: int = 0,
                     points: int = 2 ** 13 + 1, cap: int = SCALE_OFFSET_CAP) -> Table:
    """``kernel * target(2^scale_offset .)`` on a reference grid, cached.

    ``target`` is a :class:`BumpProfile` or a piecewise polynomial; for the
    latter the convolution is assembled from Gauss rules on its pieces.
    """
    if abs(scale_offset) > cap:
        raise ScaleOffsetCapError(f"|scale offset| {abs(scale_offset)} exceeds {cap}")
    if isinstance(target, BumpProfile):
        key = f"conv3|{kernel.key}|{target.key}|{scale_offset}|{points}"
        return cached_table(key, lambda: _conv_table(kernel, target, scale_offset, points))
    return _conv_ppoly_table(kernel, target, scale_offset, points)


def _conv_ppoly_table(kernel: BumpProfile, pp, offset: int, points: int) -> Table:
    lo, hi = pp.support
    lo, hi = lo * 2.0 ** -offset, hi * 2.0 ** -offset
    r = kernel.radius
    w = np.linspace(lo - r, hi + r, points)
    X, Wg = np.polynomial.legendre.leggauss(_GAUSS_NODES)
    out = np.zeros(points)
    h = pp.width * 2.0 ** -offset
    # Gauss rules on every piece intersected with the kernel support
    for i in range(pp.n_pieces):
        a = (pp.theta_min + i) * h
        b = a + h
        sel = (w + r > a) & (w - r < b)
        if not np.any(sel):
            continue
        ws = w[sel]
        left = np.maximum(a, ws - r)
        right = np.minimum(b, ws + r)
        # the kernel is a steep bump derivative: one rule per panel
        step = (right - left) / _PPOLY_PANELS
        for k in range(_PPOLY_PANELS):
            half = 0.5 * step
            mid = left + (k + 0.5) * step
            U = mid[:, None] + half[:, None] * X[None, :]
            local = (U - a) * 2.0 ** offset
            poly = np.polynomial.polynomial.polyval(local, pp.coeffs[i])
            out[sel] += np.sum(kernel(ws[:, None] - U) * poly * (half[:, None] * Wg[None, :]), axis=1)
    return Table(lo - r, (hi - lo + 2 * r) / (points - 1), out)


# -- norm estimators -------------------------------------------------------------------

def fspq_norm(f, s: float, p: float, q: float, k_range=None, **kw):
    """Local-means ``F^s_{p,q}`` norm of a sparse superposition.

    Thin wrapper over :func:`splinelab.multiscale.estimate_norms`; see there
    for the sampling scheme.  Returns a :class:`~splinelab.multiscale.NormResult`.
    """
    from . import multiscale
    return multiscale.fspq_norm(f, s, p, q, k_range, **kw)


def _lp_partition(xi: np.ndarray, kmax: int) -> list[np.ndarray]:
    """Smooth dyadic partition of unity ``chi, chi(2^-k .) - chi(2^-k+1 .)``."""
    def chi(t):
        t = np.abs(t)
        out = np.zeros_like(t)
        out[t <= 1] = 1.0
        mid = (t > 1) & (t < 2)
        u = t[mid] - 1.0
        a = np.exp(-1.0 / np.maximum(u, 1e-300))
        b = np.exp(-1.0 / np.maximum(1.0 - u, 1e-300))
        out[mid] = b / (a + b)
        return out
    parts = [chi(xi)]
    for k in range(1, kmax + 1):
        parts.append(chi(xi * 2.0 ** -k) - chi(xi * 2.0 ** -(k - 1)))
    return parts


def littlewood_paley_norm(f, s: float, p: float, q: float, h: float | None = None,
                          pad: float = 1.0, kmax: int | None = None) -> float:
    """Fourier-side ``F^s_{p,q}`` norm on a dense padded grid (cross-check only).

    ``f`` must expose ``render(x)``, ``finest_scale`` and ``domain``.
    """
    lo, hi = f.domain
    finest = f.finest_scale
    h = h if h is not None else 2.0 ** -(finest + 10)
    L = (hi - lo) + 2 * pad
    M = 1 << int(math.ceil(math.log2(L / h)))
    if M > 2 ** 24:
        raise ResolutionError(f"grid of {M} points needed to resolve scale {finest}")
    x = lo - pad + h * np.arange(M)
    vals = f.render(x)
    F = np.fft.rfft(vals)
    xi = 2 * np.pi * np.fft.rfftfreq(M, d=h)
    nyq = xi[-1]
    kmax = kmax if kmax is not None else int(math.floor(math.log2(nyq))) - 1
    if 2.0 ** (kmax + 1) > nyq:
        raise ResolutionError("requested dyadic levels exceed the grid Nyquist frequency")
    acc = np.zeros(M)
    for k, part in enumerate(_lp_partition(xi, kmax)):
        band = np.fft.irfft(F * part, n=M)
        acc += 2.0 ** (k * s * q) * np.abs(band) ** q
    integrand = acc ** (p / q)
    return float((np.sum(integrand) * h) ** (1 / p))


def dense_local_means_norm(f, s: float, p: float, q: float, phi0: BumpProfile,
                           phi: BumpProfile, kmax: int, h: float | None = None,
                           pad: float = 0.5) -> float:
    """Grid version of the local-means norm, for small functions and tests."""
    lo, hi = f.domain
    h = h if h is not None else 2.0 ** -(max(f.finest_scale, kmax) + 9)
    M = int(math.ceil((hi - lo + 2 * pad) / h))
    x = lo - pad + h * np.arange(M)
    vals = f.render(x)
    acc = np.zeros(M)
    for k in range(kmax + 1):
        prof = phi0 if k == 0 else phi
        r = prof.radius * 2.0 ** -k
        m = int(math.ceil(r / h))
        u = h * np.arange(-m, m + 1)
        ker = (2.0 ** k) * prof(u * 2.0 ** k) * h
        conv = np.convolve(vals, ker[::-1], mode="same")
        acc += 2.0 ** (k * s * q) * np.abs(conv) ** q
    return float((np.sum(acc ** (p / q)) * h) ** (1 / p))
