"""Sparse multiscale evaluation of local-means norms.

A function handled here is a finite sum of *lattice groups*: translates
``amp * eta(2^l (x - c0 - nu * spacing))`` for ``0 <= nu < count``.  An
operator output is a finite sum of *wavelet levels*: coefficients on the
translates ``psi(2^j x - K0 mu)`` with ``mu`` in an arithmetic progression.
Both kinds of object are periodic away from their ends, which is what
makes 2^30 atoms tractable.

For ``i >= 1`` the kernel ``phi_i = 2^i phi(2^i .)`` sees a wavelet only
through the jumps of its ``n``-th derivative::

    phi_i * psi(2^j . - K0 mu)(x) = 2^((j-i) n) sum_kappa J_kappa Phi(2^i (x - x_kappa))

with ``Phi`` the compactly supported ``(n+1)``-fold primitive of ``phi``
and ``x_kappa = (2 K0 mu + kappa) 2^(-j-1)``.  A wavelet level paired with
an atom group therefore collapses to knot weights ``W(o)`` on the grid
``h_j = 2^(-j-1)``, organised as a progression of identical *cells* plus a
few explicit edge arrays.  Kernels narrower than a knot spacing read the
nearest knot; wider kernels use a per-cell table of
``sum_o W(o) Phi(2^i (y - o h_j))``.

The ``L^p`` integral over the domain is estimated by importance sampling:
half the samples are uniform on the domain, the rest are drawn around
random atoms at dyadic radii.  The density is evaluated exactly from lattice
counts, every trial reuses the same samples, and all positions are dyadic
rationals so the differences ``x - center`` are exact in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from . import kernels
from . import local_means as lm

DEFAULT_DEPTH = 10
DEFAULT_PAIR_DEPTH = 6
DEFAULT_FINE_DEPTH = 20
_FINE = 13


@dataclass(frozen=True)
class AtomGroup:
    """``amplitude * eta(2^scale (x - c0 - nu * spacing))`` for ``0 <= nu < count``."""

    scale: int
    c0: float
    spacing: float
    count: int
    amplitude: float
    sign_key: int = 0

    def center(self, nu):
        return self.c0 + np.asarray(nu) * self.spacing

    @property
    def extent(self) -> tuple[float, float]:
        return self.c0, self.c0 + (self.count - 1) * self.spacing


@dataclass(frozen=True)
class TLevel:
    """Wavelets ``psi(2^j x - K0 mu)`` with ``mu = mu_start + m * mu_step``, ``0 <= m < count``."""

    j: int
    mu_start: int
    mu_step: int
    count: int
    sign_key: int


@dataclass
class KnotSource:
    """Knot weights ``W(o) = sum_nu w[o - o_origin - nu * step]`` on the grid ``2^(-j-1)``."""

    j: int
    o_origin: int
    step: int
    count: int
    w: np.ndarray
    lkey: int
    gkey: int

    @property
    def h(self) -> float:
        return 2.0 ** -(self.j + 1)


@dataclass
class NormSettings:
    s: float
    p: float
    q: float
    i_min: int = 0
    i_max: int | None = None
    depth: int = DEFAULT_DEPTH
    pair_depth: int = DEFAULT_PAIR_DEPTH
    fine_depth: int = DEFAULT_FINE_DEPTH
    samples: int = 2 ** 14
    block: int = 4096
    seed: int = 0
    prune_tol: float = 1e-9
    uniform_weight: float = 0.5
    domain: tuple[float, float] = (-1.0, 1.0)

    def validate(self):
        if not (1 < self.p < math.inf and 1 < self.q < math.inf):
            raise ValueError("need 1 < p, q < infinity")
        if self.i_max is not None and self.i_max < self.i_min:
            raise ValueError("empty level range")
        if self.samples <= 0:
            raise ValueError("need a positive sample count")


@dataclass
class TrialResult:
    norm_f: float
    norm_Tf: float | None = None
    norm_Pplus: float | None = None
    norm_Pminus: float | None = None
    rel_err_f: float = 0.0
    rel_err_Tf: float = 0.0


@dataclass
class NormResult:
    norm: float
    k_range: tuple[int, int]
    domain: tuple[float, float]
    resolution: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"norm": self.norm, "k_range": list(self.k_range),
                "domain": list(self.domain), "resolution": self.resolution}


# -- atom/wavelet pairings -----------------------------------------------------------

class Pairing:
    """``P(y, d) = int eta(2^d (u - y)) psi(u) du`` for an atom at ``y`` (wavelet units).

    For ``d >= -3`` the atom covers at most a few knots and the jump formula
    ``(-1)^(n+1) 2^(-d(n+1)) sum J_kappa E(2^d (kappa/2 - y))`` is used, ``E``
    being the ``(n+1)``-fold primitive of ``eta``.  Wider atoms would cancel
    catastrophically in that sum and are integrated piece by piece instead.
    """

    def __init__(self, sys, eta: lm.BumpProfile):
        self.sys = sys
        self.n = sys.order
        self.eta = eta
        self.E = eta.primitive(self.n + 1)
        self.theta, self.J = sys.jump_table()
        self.rho = eta.radius
        self._gx, self._gw = np.polynomial.legendre.leggauss(48)

    @property
    def knot_range(self) -> tuple[int, int]:
        return int(self.theta[0]), int(self.theta[-1])

    def partners(self, y0: float, step: float, lo: int, hi: int, d: int) -> np.ndarray:
        """Indices ``lo <= nu <= hi`` whose atom at ``y0 + nu*step`` can pair nonzero.

        With the jump formula only atoms straddling a knot contribute, so the
        search runs knot by knot instead of over every atom in the window.
        """
        Rw = self.rho * 2.0 ** -d
        th0, th1 = self.knot_range
        if d < -3 or (hi - lo + 1) <= 4 * (th1 - th0 + 1):
            a = max(lo, math.floor((th0 / 2.0 - Rw - y0) / step))
            b = min(hi, math.ceil((th1 / 2.0 + Rw - y0) / step))
            return np.arange(a, b + 1) if b >= a else np.zeros(0, dtype=np.int64)
        out = []
        for kap in range(th0, th1 + 1):
            a = max(lo, math.floor((kap / 2.0 - Rw - y0) / step))
            b = min(hi, math.ceil((kap / 2.0 + Rw - y0) / step))
            if b >= a:
                out.append(np.arange(a, b + 1))
        if not out:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(out))

    def __call__(self, y, d: int) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if d >= -3:
            return self._by_jumps(y, d)
        return self._by_quadrature(y, d)

    def _by_jumps(self, y, d):
        n = self.n
        R = self.rho * 2.0 ** -d
        out = np.zeros(y.shape)
        kn = self.theta / 2.0
        for a in range(0, y.size, 256):
            ys = y[a:a + 256]
            z = kn[None, :] - ys[:, None]
            near = np.abs(z) < R
            vals = np.zeros(z.shape)
            vals[near] = self.E(np.ldexp(z[near], d))
            out[a:a + 256] = vals @ self.J
        return (-1) ** (n + 1) * 2.0 ** (-d * (n + 1)) * out

    def _by_quadrature(self, y, d):
        R = self.rho * 2.0 ** -d
        psi = self.sys.psi
        lo_s, hi_s = psi.support
        out = np.zeros(y.shape)
        for t, yc in enumerate(y):
            a, b = max(yc - R, lo_s), min(yc + R, hi_s)
            if b <= a:
                continue
            cuts = np.arange(math.ceil(2 * a), math.floor(2 * b) + 1) / 2.0
            edges = np.unique(np.concatenate([[a], cuts, [b]]))
            total = 0.0
            for e0, e1 in zip(edges[:-1], edges[1:]):
                if e1 <= e0:
                    continue
                sub = np.linspace(e0, e1, 1 + max(4, math.ceil(16 * (e1 - e0) / R)))
                for s0, s1 in zip(sub[:-1], sub[1:]):
                    half = 0.5 * (s1 - s0)
                    u = 0.5 * (s1 + s0) + half * self._gx
                    total += half * np.sum(self._gw * self.eta(np.ldexp(u - yc, d)) * psi(u))
            out[t] = total
        return out


def _ratio(a: float, b: float) -> int:
    r = a / b
    k = int(round(r))
    if k < 1 or abs(r - k) > 1e-9 * r:
        raise ValueError(f"lattice spacings {a} and {b} are not commensurate")
    return k


def _cluster_sources(entries: dict, j, K0, L: TLevel, pairing: Pairing, gkey) -> list:
    """Knot arrays for explicit per-wavelet coefficients ``{m: coef}``."""
    if not entries:
        return []
    th0, th1 = pairing.knot_range
    width = th1 - th0 + 1
    per = 2 * K0 * L.mu_step
    ms = sorted(m for m, c in entries.items() if c != 0.0)
    out = []
    start = 0
    for t in range(1, len(ms) + 1):
        if t == len(ms) or (ms[t] - ms[t - 1]) * per > 4 * width:
            block = ms[start:t]
            m0 = block[0]
            o0 = 2 * K0 * (L.mu_start + m0 * L.mu_step) + th0
            w = np.zeros(per * (block[-1] - m0) + width)
            for m in block:
                off = per * (m - m0)
                w[off:off + width] += entries[m] * pairing.J
            out.append(KnotSource(j, o0, 1, 1, w, L.sign_key, gkey))
            start = t
    return out


def build_sources(L: TLevel, g: AtomGroup, K0: int, pairing: Pairing) -> list[KnotSource]:
    """Knot sources of ``sum_mu 2^j <g, psi_{j,K0 mu}> psi_{j,K0 mu}`` over the level ``L``."""
    j = L.j
    d = g.scale - j
    th0, th1 = pairing.knot_range
    width = th1 - th0 + 1
    Rw = pairing.rho * 2.0 ** -d
    ylo, yhi = th0 / 2.0 - Rw, th1 / 2.0 + Rw
    dT = K0 * L.mu_step * 2.0 ** -j
    yc0 = math.ldexp(g.c0, j) - K0 * L.mu_start
    amp = g.amplitude
    per = 2 * K0 * L.mu_step
    out: list[KnotSource] = []
    if g.count == 1 or g.spacing >= dT:
        # every atom meets the same pattern of wavelets
        R = 1 if g.count == 1 else _ratio(g.spacing, dT)
        sT = K0 * L.mu_step
        m_a = math.floor((yc0 - yhi) / sT)
        m_b = math.ceil((yc0 - ylo) / sT)
        ms = np.arange(m_a, m_b + 1)
        coefs = amp * pairing(yc0 - sT * ms, d)
        nz = np.nonzero(coefs)[0]
        if nz.size == 0:
            return out
        ms, coefs = ms[nz[0]:nz[-1] + 1], coefs[nz[0]:nz[-1] + 1]
        m_a, m_b = int(ms[0]), int(ms[-1])
        w = np.zeros(per * (m_b - m_a) + width)
        for m, c in zip(ms, coefs):
            off = per * (m - m_a)
            w[off:off + width] += c * pairing.J
        o_min = 2 * K0 * (L.mu_start + m_a * L.mu_step) + th0
        P = per * R
        nu_lo = max(0, math.ceil(-m_a / R))
        nu_hi = min(g.count - 1, (L.count - 1 - m_b) // R)
        if nu_hi >= nu_lo:
            out.append(KnotSource(j, o_min + nu_lo * P, P, nu_hi - nu_lo + 1, w,
                                  L.sign_key, g.sign_key))
        first = max(0, math.ceil(-m_b / R))
        last = min(g.count - 1, (L.count - 1 - m_a) // R)
        if nu_hi >= nu_lo:
            edge = list(range(first, min(nu_lo, last + 1)))
            edge += list(range(max(nu_hi + 1, first), last + 1))
        else:
            edge = list(range(first, last + 1))
        if len(edge) > 100000:
            raise ValueError("too many edge atoms; lattices are badly aligned")
        entries: dict[int, float] = {}
        for nu in edge:
            for m, c in zip(ms + nu * R, coefs):
                if 0 <= m < L.count:
                    entries[int(m)] = entries.get(int(m), 0.0) + float(c)
        out += _cluster_sources(entries, j, K0, L, pairing, g.sign_key)
        return out
    # atoms are denser than wavelets: every wavelet meets the same atoms
    R = _ratio(dT, g.spacing)
    sA = math.ldexp(g.spacing, j)
    nu_a = math.floor((ylo - yc0) / sA)
    nu_b = math.ceil((yhi - yc0) / sA)
    nus = pairing.partners(yc0, sA, nu_a, nu_b, d)
    if nus.size == 0:
        return out
    pc = amp * pairing(yc0 + sA * nus, d)
    nz = np.nonzero(pc)[0]
    if nz.size == 0:
        return out
    nus, pc = nus[nz], pc[nz]
    nu_a, nu_b = int(nus[0]), int(nus[-1])
    cstar = float(np.sum(pc))
    m_lo = max(0, math.ceil(-nu_a / R))
    m_hi = min(L.count - 1, (g.count - 1 - nu_b) // R)
    if m_hi >= m_lo and cstar != 0.0:
        o0 = 2 * K0 * (L.mu_start + m_lo * L.mu_step) + th0
        out.append(KnotSource(j, o0, per, m_hi - m_lo + 1, cstar * pairing.J,
                              L.sign_key, g.sign_key))
    first = max(0, math.ceil(-nu_b / R))
    last = min(L.count - 1, (g.count - 1 - nu_a) // R)
    if m_hi >= m_lo and cstar != 0.0:
        edge = list(range(first, min(m_lo, last + 1)))
        edge += list(range(max(m_hi + 1, first), last + 1))
    else:
        edge = list(range(first, last + 1))
    entries = {}
    for m in edge:
        idx = nus + m * R
        ok = (idx >= 0) & (idx < g.count)
        if ok.any():
            entries[m] = float(np.sum(pc[ok]))
    out += _cluster_sources(entries, j, K0, L, pairing, g.sign_key)
    return out


# -- level kernels ---------------------------------------------------------------------

class LevelKernels:
    """Tabulated kernels ``phi_i * eta`` and primitives of ``phi``, ``phi0``."""

    def __init__(self, n: int, phi0: lm.BumpProfile, phi: lm.BumpProfile, eta: lm.BumpProfile):
        self.n = n
        self.phi0, self.phi, self.eta = phi0, phi, eta
        self.r = phi.radius
        self.Phi = phi.primitive(n + 1)
        u = np.linspace(-self.r, self.r, 2 ** 14 + 1)
        self.knot_table = (u[0], u[1] - u[0], self.Phi(u))
        self._phi0_prim()

    def _phi0_prim(self):
        """``Phi0(u) = int_{-r}^{u} (u-t)^n / n! phi0(t) dt`` on a fine grid, polynomial beyond ``r``."""
        n, r = self.n, self.phi0.radius
        self.g0 = r * 2.0 ** -13
        edges = np.linspace(-r, r, 2 ** 14 + 1)
        gx, gw = np.polynomial.legendre.leggauss(12)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        T = mid[:, None] + half[:, None] * gx[None, :]
        Wt = half[:, None] * gw[None, :] * self.phi0(T)
        cum = [np.concatenate([[0.0], np.cumsum(np.sum(Wt * T ** m, axis=1))]) for m in range(n + 1)]
        vals = np.zeros(edges.size)
        for m in range(n + 1):
            coef = (-1) ** m / (math.factorial(m) * math.factorial(n - m))
            vals += coef * edges ** (n - m) * cum[m]
        self.phi0_moments = [c[-1] for c in cum]
        # pad with the polynomial continuation so interpolation near r stays exact
        pad = r + self.g0 * np.arange(1, 5)
        self.phi0_prim_grid = np.concatenate([vals, self._phi0_poly(pad)])

    def _phi0_poly(self, u):
        out = np.zeros(u.shape)
        n = self.n
        for m in range(n + 1):
            coef = (-1) ** m / (math.factorial(m) * math.factorial(n - m))
            out += coef * u ** (n - m) * self.phi0_moments[m]
        return out

    def phi0_prim(self, u: np.ndarray) -> np.ndarray:
        n, r = self.n, self.phi0.radius
        out = np.zeros(u.shape)
        inner = (u > -r) & (u <= r)
        idx = (u[inner] + r) / self.g0
        k = np.rint(idx)
        if np.all(np.abs(idx - k) < 1e-9):
            out[inner] = self.phi0_prim_grid[k.astype(np.int64)]
        else:
            out[inner] = kernels.interp_cubic(self.phi0_prim_grid, -r, self.g0, u[inner])
        right = u > r
        out[right] = self._phi0_poly(u[right])
        return out

    def atom_table(self, d: int, level: int) -> lm.Table:
        """``phi_level * eta(2^(level+d) .)`` as a table in units of the variable ``x - c``."""
        if level == 0:
            t = lm.convolve_profile(self.phi0, self.eta, d)
            return t
        if d >= 0:
            t = lm.convolve_profile(self.phi, self.eta, d)
            return lm.Table(math.ldexp(t.x0, -level), math.ldexp(t.h, -level), t.values)
        e = -d
        t = lm.convolve_profile(self.eta, self.phi, e)
        l = level + d
        return lm.Table(math.ldexp(t.x0, -l), math.ldexp(t.h, -l), t.values * 2.0 ** e)

    def cell_table(self, src: KnotSource, level: int) -> lm.Table:
        """``y -> sum_idx w[idx] K(y - idx h)`` for the kernel of ``level``."""
        j, n, h = src.j, self.n, src.h
        w = src.w
        a = max(0, level - j + _FINE)
        g = h * 2.0 ** -a
        up = 1 << a
        w_up = np.zeros((w.size - 1) * up + 1)
        w_up[::up] = w
        if level == 0:
            r = self.phi0.radius
            Ml = math.ceil(r / g)
            Mr = math.ceil(((w.size - 1) * h + r) / g)
            u = g * np.arange(-Ml, Mr + 1)
            K = 2.0 ** (j * n) * self.phi0_prim(u)
            V = signal.convolve(w_up, K, method="auto")[:Ml + Mr + 1]
            return lm.Table(-Ml * g, g, V)
        reach = self.r * 2.0 ** -level
        M = math.ceil(reach / g)
        u = g * np.arange(-M, M + 1)
        K = 2.0 ** ((j - level) * n) * self.Phi(np.ldexp(u, level))
        V = signal.convolve(w_up, K, method="auto")
        return lm.Table(-M * g, g, V)


# -- sampling --------------------------------------------------------------------------

class ImportanceSampler:
    """Mixture of a uniform law on the domain and uniform laws around random atoms."""

    def __init__(self, groups: list[AtomGroup], domain, rho: float, uniform_weight: float = 0.5):
        self.groups = groups
        self.domain = (float(domain[0]), float(domain[1]))
        self.uw = uniform_weight if groups else 1.0
        comps = []
        L = self.domain[1] - self.domain[0]
        for gi, g in enumerate(groups):
            rmax = g.spacing / 2 if g.count > 1 else L / 2
            R = rho * 2.0 ** (1 - g.scale)
            radii = []
            while R <= rmax and R <= L:
                radii.append(R)
                R *= 2
            if not radii:
                radii = [min(rmax, rho * 2.0 ** (1 - g.scale))]
            for R in radii:
                comps.append((gi, R))
        self.comps = comps

    def draw(self, S: int, rng: np.random.Generator) -> np.ndarray:
        a, b = self.domain
        x = np.empty(S)
        if not self.comps:
            return rng.uniform(a, b, S)
        which = rng.random(S) < self.uw
        nu_ = (~which).sum()
        x[which] = rng.uniform(a, b, which.sum())
        ci = rng.integers(0, len(self.comps), nu_)
        xs = np.empty(nu_)
        for c in np.unique(ci):
            m = ci == c
            gi, R = self.comps[c]
            g = self.groups[gi]
            nu = rng.integers(0, g.count, m.sum())
            xs[m] = g.center(nu) + rng.uniform(-R, R, m.sum())
        x[~which] = xs
        return x

    def density(self, x: np.ndarray) -> np.ndarray:
        a, b = self.domain
        q = self.uw * ((x >= a) & (x <= b)) / (b - a)
        if not self.comps:
            return q
        wc = (1 - self.uw) / len(self.comps)
        bygroup: dict[int, list] = {}
        for gi, R in self.comps:
            bygroup.setdefault(gi, []).append(R)
        for gi, radii in bygroup.items():
            g = self.groups[gi]
            if g.count > 1:
                nu = np.clip(np.rint((x - g.c0) / g.spacing), 0, g.count - 1)
            else:
                nu = np.zeros(x.shape)
            off = np.abs(x - g.center(nu))
            for R in radii:
                q = q + wc * (off < R) / (2 * R * g.count)
        return q


# -- the estimator ---------------------------------------------------------------------

@dataclass
class Plan:
    groups: list
    sources: list
    levels: np.ndarray
    f_jobs: list
    t_jobs: list
    pruned: int
    pruned_bound: float

    def counts(self) -> dict:
        return {"groups": len(self.groups), "atoms": int(sum(g.count for g in self.groups)),
                "knot_sources": len(self.sources), "f_jobs": len(self.f_jobs),
                "t_jobs": len(self.t_jobs), "levels": [int(self.levels[0]), int(self.levels[-1])],
                "pruned": self.pruned}


def default_i_max(groups: list[AtomGroup]) -> int:
    return max(g.scale for g in groups) + 4 if groups else 8


def make_plan(groups, tlevels, K0, pairing: Pairing | None, lk: LevelKernels,
              st: NormSettings) -> Plan:
    """Enumerate every (source, level) evaluation that survives pruning."""
    i_max = st.i_max if st.i_max is not None else default_i_max(groups)
    levels = np.arange(st.i_min, i_max + 1)
    sq = st.s * st.q
    f_jobs = []
    for gi, g in enumerate(groups):
        for i in levels:
            d = g.scale - int(i)
            if d > st.depth or -d > 2 * st.depth or (i == 0 and d < 0):
                continue
            f_jobs.append((gi, int(i)))
    sources = []
    if tlevels:
        for L in tlevels:
            for g in groups:
                if L.j - g.scale > st.pair_depth:
                    continue
                sources += build_sources(L, g, K0, pairing)
    t_jobs = []
    bounds = []
    kmax = float(np.max(np.abs(lk.knot_table[2])))
    for si, src in enumerate(sources):
        wmax = float(np.max(np.abs(src.w)))
        overlap = src.w.size // max(src.step, 1) + 1 if src.count > 1 else 1
        for i in levels:
            i = int(i)
            if i < src.j - st.depth or (i == 0 and src.j > st.depth):
                continue
            if i - src.j > st.fine_depth:
                continue
            if i >= 1 and i >= src.j - 2:
                b = wmax * overlap * kmax * 2.0 ** ((src.j - i) * lk.n)
            else:
                b = wmax * overlap * kmax * 2.0 ** ((src.j - i) * lk.n) * 2.0 ** (src.j - i + 2)
            bounds.append(b * 2.0 ** (i * st.s))
            t_jobs.append((si, i))
    pruned, pruned_bound = 0, 0.0
    if t_jobs and st.prune_tol > 0:
        bounds = np.array(bounds)
        ref = bounds.max()
        keep = bounds >= st.prune_tol * ref
        pruned = int((~keep).sum())
        pruned_bound = float(bounds[~keep].max() / ref) if pruned else 0.0
        t_jobs = [job for job, k in zip(t_jobs, keep) if k]
    return Plan(list(groups), sources, levels, f_jobs, t_jobs, pruned, pruned_bound)


def estimate(groups: list[AtomGroup], tlevels: list[TLevel] | None, sys, K0: int,
             eta: lm.BumpProfile, phi0: lm.BumpProfile, phi: lm.BumpProfile,
             st: NormSettings, trial_signs: list[tuple[dict, dict]],
             plan: Plan | None = None, return_samples: bool = False):
    """Norms of ``f`` and of the signed projection output for each trial.

    ``trial_signs[t] = (level_signs, group_signs)`` maps sign keys to +-1.
    Without ``tlevels`` only ``f`` is measured.
    """
    st.validate()
    n = sys.order if sys is not None else 0
    lk = LevelKernels(n, phi0, phi, eta)
    pairing = Pairing(sys, eta) if tlevels else None
    if plan is None:
        plan = make_plan(groups, tlevels, K0, pairing, lk, st)
    levels = plan.levels
    nl = levels.size
    i0 = int(levels[0])
    T = len(trial_signs)
    with_T = bool(tlevels)
    gs = np.array([[sg.get(g.sign_key, 1) for g in groups] for _, sg in trial_signs], dtype=float)
    if with_T:
        src_l = np.array([[sl.get(s.lkey, 1) for s in plan.sources] for sl, _ in trial_signs], dtype=float)
        src_g = np.array([[sg.get(s.gkey, 1) for s in plan.sources] for _, sg in trial_signs], dtype=float)
    sampler = ImportanceSampler(groups, st.domain, eta.radius, st.uniform_weight)
    rng = np.random.default_rng(st.seed)
    x_all = sampler.draw(st.samples, rng)
    qd = sampler.density(x_all)
    a, b = st.domain
    inside = (x_all >= a) & (x_all <= b)
    wgt = np.where(inside, 1.0 / np.maximum(qd, 1e-300), 0.0) / st.samples
    lw = 2.0 ** (levels * st.s * st.q)
    nq = 4 if with_T else 1
    acc = np.zeros((nq, T))
    acc2 = np.zeros((nq, T))
    f_tabs: dict = {}
    t_tabs: dict = {}
    saved = []
    for s0 in range(0, st.samples, st.block):
        x = x_all[s0:s0 + st.block]
        wb = wgt[s0:s0 + st.block]
        S = x.size
        F = np.zeros((T, nl, S))
        for gi, i in plan.f_jobs:
            g = groups[gi]
            key = (g.scale - i, i)
            tab = f_tabs.get(key)
            if tab is None:
                tab = f_tabs[key] = lk.atom_table(g.scale - i, i)
            val = kernels.prog_table_sum(x, g.c0, g.spacing, g.count, tab.values, tab.x0, tab.h)
            if g.amplitude != 1.0:
                val *= g.amplitude
            F[:, i - i0, :] += gs[:, gi, None] * val[None, :]
        outs = [F]
        if with_T:
            TF = np.zeros((T, nl, S))
            PP = np.zeros((T, nl, S))
            PM = np.zeros((T, nl, S))
            kx0, kg, kv = lk.knot_table
            for si, i in plan.t_jobs:
                src = plan.sources[si]
                if i >= 1 and i >= src.j - 2:
                    kvals = kv * 2.0 ** ((src.j - i) * n)
                    val = kernels.knot_sum(x, src.h, src.o_origin, src.step, src.count, src.w,
                                           kvals, kx0, kg, 2.0 ** i)
                else:
                    key = (si, i)
                    tab = t_tabs.get(key)
                    if tab is None:
                        tab = lk.cell_table(src, i)
                        if len(t_tabs) < 4096:
                            t_tabs[key] = tab
                    val = kernels.prog_table_sum(x, src.o_origin * src.h, src.step * src.h,
                                                 src.count, tab.values, tab.x0, tab.h)
                nzi = np.nonzero(val)[0]
                if nzi.size == 0:
                    continue
                v = val[nzi]
                sg = src_g[:, si]
                sl = src_l[:, si]
                TF[:, i - i0, nzi] += (sl * sg)[:, None] * v[None, :]
                PP[:, i - i0, nzi] += (sg * (sl > 0))[:, None] * v[None, :]
                PM[:, i - i0, nzi] += (sg * (sl < 0))[:, None] * v[None, :]
            outs += [TF, PP, PM]
        for k, arr in enumerate(outs):
            Gq = np.einsum("l,tls->ts", lw, np.abs(arr) ** st.q)
            Fp = Gq ** (st.p / st.q) * wb[None, :]
            acc[k] += Fp.sum(axis=1)
            acc2[k] += (Fp ** 2).sum(axis=1) * st.samples
        if return_samples:
            saved.append([o.copy() for o in outs])
    means = acc
    var = np.maximum(acc2 - acc ** 2, 0.0) / st.samples
    rel = np.sqrt(var) / np.maximum(means, 1e-300)
    norms = means ** (1.0 / st.p)
    results = []
    for t in range(T):
        r = TrialResult(norm_f=float(norms[0, t]), rel_err_f=float(rel[0, t] / st.p))
        if with_T:
            r.norm_Tf = float(norms[1, t])
            r.norm_Pplus = float(norms[2, t])
            r.norm_Pminus = float(norms[3, t])
            r.rel_err_Tf = float(rel[1, t] / st.p)
        results.append(r)
    info = {"samples": st.samples, "levels": [int(levels[0]), int(levels[-1])],
            "pruned_jobs": plan.pruned, "pruned_bound": plan.pruned_bound,
            "backend": kernels.BACKEND, **plan.counts()}
    if return_samples:
        return results, info, (x_all, wgt, levels, saved)
    return results, info


def fspq_norm(f, s: float, p: float, q: float, k_range=None, phi0=None, phi=None,
              samples: int = 2 ** 14, seed: int = 0, domain=None, depth: int = DEFAULT_DEPTH,
              n: int | None = None) -> NormResult:
    """Local-means norm of a :class:`~splinelab.test_functions.SparseSuperposition`."""
    groups = f.groups
    eta = f.profile
    if n is None:
        n = max(eta.order - 3, 0)
    if phi0 is None or phi is None:
        phi0, phi = lm.make_mollifier_pair(n)
    if k_range is None:
        k_range = (0, default_i_max(groups))
    kmin, kmax = int(k_range[0]), int(k_range[1])
    if kmax < kmin:
        raise ValueError("empty k_range")
    if domain is None:
        domain = f.domain
    st = NormSettings(s=s, p=p, q=q, i_min=kmin, i_max=kmax, samples=samples, seed=seed,
                      domain=tuple(domain), depth=depth)
    if not groups:
        return NormResult(0.0, (kmin, kmax), tuple(domain), {"samples": 0})
    res, info = estimate(groups, None, _NullSystem(n), 1, eta, phi0, phi, st, [({}, {})])
    val = res[0].norm_f
    if not math.isfinite(val):
        raise lm.ResolutionError("non-finite norm estimate")
    info["rel_err"] = res[0].rel_err_f
    return NormResult(val, (kmin, kmax), tuple(domain), info)


@dataclass
class _NullSystem:
    order: int
