"""Signed wavelet projections of test functions and the growth-exponent experiments."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import local_means as lm
from . import multiscale as ms
from . import spline_wavelets as sw
from . import test_functions as tf


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class NumericalError(ArithmeticError):
    """Estimator failure (CLI exit code 3)."""


# -- configuration ---------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    n: int = 0
    p: float = 4.0
    q: float = 1.5
    s: float | None = -0.6
    N_range: tuple[int, int] = (2, 5)
    trials: int = 8
    seed: int = 0
    K0: int | str = "auto"
    coefficient_cutoff: float = 1e-9
    k_range: tuple[int, int] | None = None
    samples: int = 2 ** 14
    depth: int = ms.DEFAULT_DEPTH
    pair_depth: int = ms.DEFAULT_PAIR_DEPTH
    intervals: int | None = 1
    occupancy: int = 1
    lift: int = 6
    gap: int = 0
    trunc_tol: float = 1e-8
    kind: str = "growth"

    @property
    def q_prime(self) -> float:
        return self.q / (self.q - 1)

    @property
    def p_prime(self) -> float:
        return self.p / (self.p - 1)

    def endpoint_s(self) -> float:
        return -1.0 / self.q_prime - self.n

    def validate(self) -> "ExperimentConfig":
        if not (1 < self.q < self.p < math.inf):
            raise ConfigError(f"need 1 < q < p < infinity, got q={self.q}, p={self.p}")
        if not 0 <= self.n <= sw.ORDER_CAP:
            raise ConfigError(f"order {self.n} outside [0, {sw.ORDER_CAP}]")
        lo, hi = self.N_range
        if lo < 1 or hi < lo + 2:
            raise ConfigError("N_range needs at least three values starting at 1 or more")
        if self.trials < 1 or self.samples < 64:
            raise ConfigError("trials and samples must be positive (samples >= 64)")
        if self.K0 != "auto" and (not isinstance(self.K0, int) or self.K0 < 1):
            raise ConfigError("K0 must be a positive integer or 'auto'")
        if self.kind == "growth":
            if self.s is None:
                raise ConfigError("growth runs need s")
            a, b = -1.0 / self.p_prime - self.n, -1.0 / self.q_prime - self.n
            if not a < self.s:
                raise ConfigError(f"s = {self.s} violates -1/p' - n < s (-1/p' - n = {a})")
            if not self.s < b:
                raise ConfigError(f"s = {self.s} violates s < -1/q' - n (-1/q' - n = {b})")
        elif self.kind == "endpoint":
            e = self.endpoint_s()
            if self.s is not None and abs(self.s - e) > 1e-12:
                raise ConfigError(f"endpoint runs pin s = -1/q' - n = {e}, got {self.s}")
            self.s = e
            if self.intervals is not None and self.intervals < 1:
                raise ConfigError("intervals must be positive")
            if self.lift < 0 or self.gap < 0:
                raise ConfigError("lift and gap must be nonnegative")
            if not 1 <= self.occupancy <= lo:
                raise ConfigError("occupancy must lie in [1, N] for every N")
        else:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        return self

    def theory_slope(self) -> float:
        if self.kind == "endpoint":
            return 1.0
        return -self.s - 1.0 / self.q_prime - self.n

    def to_json(self) -> dict:
        d = asdict(self)
        d["N_range"] = list(self.N_range)
        if self.k_range is not None:
            d["k_range"] = list(self.k_range)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        d = dict(d)
        for key in ("N_range", "k_range"):
            if d.get(key) is not None:
                d[key] = tuple(int(v) for v in d[key])
        return cls(**d)


@dataclass
class GrowthFit:
    points: list
    slope: float
    intercept: float
    residual: float
    theory_slope: float
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"points": [list(p) for p in self.points], "slope": self.slope,
                "intercept": self.intercept, "residual": self.residual,
                "theory_slope": self.theory_slope, **self.extra}


def fit_slope(xs, ys, theory: float = float("nan"), **extra) -> GrowthFit:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3:
        raise ConfigError("a growth fit needs at least three points")
    if not np.all(np.isfinite(ys)):
        raise NumericalError("non-finite values in growth fit")
    slope, icpt = np.polyfit(xs, ys, 1)
    res = float(np.sqrt(np.mean((ys - (slope * xs + icpt)) ** 2)))
    return GrowthFit([(float(a), float(b)) for a, b in zip(xs, ys)], float(slope), float(icpt),
                     res, theory, extra)


def q_mean(values, q: float) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.mean(v ** q) ** (1.0 / q))


# -- systems and kernels ---------------------------------------------------------------

def make_system(n: int, trunc_tol: float = 1e-8):
    if n == 0:
        return sw.haar_system()
    return sw.build_system(n, tol=trunc_tol)


@dataclass
class Toolkit:
    sys: object
    eta: lm.BumpProfile
    phi0: lm.BumpProfile
    phi: lm.BumpProfile
    K0: int


def make_toolkit(n: int, K0="auto", trunc_tol: float = 1e-8, eta_rule="standard") -> Toolkit:
    sys = make_system(n, trunc_tol)
    eta = lm.make_eta(n, eta_rule)
    phi0, phi = lm.make_mollifier_pair(n)
    k = tf.choose_K0(sys) if K0 == "auto" else int(K0)
    return Toolkit(sys, eta, phi0, phi, k)


# -- coefficients and projections ------------------------------------------------------

def wavelet_coefficient(f: tf.SparseSuperposition, sys, k: int, mu: int,
                        cutoff: float = 0.0) -> tuple[float, float]:
    """``2^k <f, psi(2^k . - mu)>`` and a bound on the mass skipped by ``cutoff``.

    Atoms are kept while ``C exp(-gamma |y|)`` at their nearest point exceeds
    ``cutoff``; the bound sums ``cutoff * 2^k ||atom||_1`` over skipped atoms
    inside the stored support of psi.
    """
    pairing = ms.Pairing(sys, f.profile)
    th0, th1 = pairing.knot_range
    total, skipped = 0.0, 0.0
    if cutoff > 0 and math.isfinite(sys.decay_gamma):
        reach = math.log(max(sys.decay_C, 1.0) / cutoff) / sys.decay_gamma
    else:
        reach = math.inf
    l1 = f.profile.l1_norm()
    for g in f.groups:
        d = g.scale - k
        Rw = pairing.rho * 2.0 ** -d
        lo, hi = th0 / 2.0 - Rw, th1 / 2.0 + Rw
        y0 = math.ldexp(g.c0, k) - mu
        sA = math.ldexp(g.spacing, k)
        if g.count == 1 or sA == 0:
            nus = np.array([0])
        else:
            nus = pairing.partners(y0, sA, 0, g.count - 1, d)
            if nus.size == 0:
                continue
        y = y0 + sA * nus
        keep = np.abs(y) - Rw <= reach
        sgn = f.sign(g) * g.amplitude
        if keep.any():
            total += sgn * float(np.sum(pairing(y[keep], d)))
        skipped += float((~keep).sum()) * abs(g.amplitude) * cutoff * l1 * 2.0 ** (k - g.scale)
    return total, skipped


def apply_signed_operator(f: tf.SparseSuperposition, levels: list, t: float, K0: int, sys,
                          cutoff: float = 0.0) -> dict:
    """``{(j, mu): r_j(t) 2^j <f, psi_{j, K0 mu}>}`` over explicit wavelet levels."""
    out = {}
    if not f.groups:
        return out
    for L in levels:
        r = tf.rademacher(L.j, t)
        for m in range(L.count):
            mu = L.mu_start + m * L.mu_step
            c, _ = wavelet_coefficient(f, sys, L.j, K0 * mu, cutoff)
            if c != 0.0:
                out[(L.j, mu)] = r * c
    return out


def split_projection_sets(levels: list, t: float) -> tuple[list, list]:
    """Levels with ``r_j(t) = +1`` and ``-1``."""
    plus = [L for L in levels if tf.rademacher(L.j, t) > 0]
    minus = [L for L in levels if tf.rademacher(L.j, t) < 0]
    return plus, minus


# -- single-scale checks ---------------------------------------------------------------

def convolution_profile(sys, phi: lm.BumpProfile, y: np.ndarray, shift: float = 0.0) -> np.ndarray:
    """``phi * psi(. - shift)`` at ``y`` via the jumps of ``psi^(n)``."""
    th, J = sys.jump_table()
    Phi = phi.primitive(sys.order + 1)
    y = np.asarray(y, dtype=float)
    out = np.zeros(y.shape)
    for kap, Jk in zip(th, J):
        if Jk != 0.0:
            out += Jk * Phi(y - shift - kap / 2.0)
    return out


def check_local_lower_bound(sys, phi: lm.BumpProfile, points: int = 4001):
    """Longest ``J`` in ``[1/4, 3/4]`` with ``|phi * psi| >= c0``, ``c0`` half the scan maximum."""
    x = np.linspace(0.25, 0.75, points)
    v = np.abs(convolution_profile(sys, phi, x))
    vmax = float(v.max())
    if vmax < 1e-6:
        raise NumericalError("phi * psi is numerically zero on [1/4, 3/4]")
    c0 = 0.5 * vmax
    ok = v >= c0
    best, start, best_iv = 0, None, None
    for i, flag in enumerate(np.append(ok, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start > best:
                best, best_iv = i - start, (float(x[start]), float(x[i - 1]))
            start = None
    return best_iv, c0


def sandwich_reference(sys, eta, N: int, s: float, q: float) -> float:
    n = sys.order
    half = abs(eta.moment(n, lo=0.0, hi=0.5))
    return abs(sys.A_tilde) * 2.0 ** (N * (-s + 1.0 / q - n - 1)) * half


def check_inner_product_sandwich(sys, eta, N: int, s: float, q: float, K0: int,
                                 pairs: list | None = None, max_pairs: int = 64, seed: int = 0) -> dict:
    """Measured ``|2^k <Upsilon_k, psi_{k, K0 mu}>|`` against the predicted size."""
    fs = tf.frequency_set_for_N(N)
    if pairs is None:
        rng = np.random.default_rng(seed)
        pairs = []
        for k in fs.exponents:
            mus = range(2 ** k) if 2 ** k <= 4 else sorted(set(
                [0, 2 ** k - 1] + [int(v) for v in rng.integers(0, 2 ** k, 2)]))
            pairs += [(k, int(m)) for m in mus]
        if len(pairs) > max_pairs:
            idx = np.sort(rng.choice(len(pairs), max_pairs, replace=False))
            pairs = [pairs[i] for i in idx]
    ref = sandwich_reference(sys, eta, N, s, q)
    rows = []
    for k, mu in pairs:
        ups = tf.build_upsilon(k, fs, s, q, K0, eta)
        c, _ = wavelet_coefficient(ups, sys, k, K0 * mu)
        rows.append({"k": k, "mu": mu, "value": c, "ratio": abs(c) / ref})
    ratios = np.array([r["ratio"] for r in rows])
    inside = (ratios >= 0.5) & (ratios <= 2.0)
    return {"reference": ref, "rows": rows, "fraction_inside": float(inside.mean()),
            "ok": bool(inside.mean() >= 0.95), "K0": K0, "N": N}


def check_convolution_decay(sys, phi, K0: int, offsets=(1, 2, 3), points: int = 401) -> dict:
    """``sup |phi_k * psi_{k, K0 mu'}|`` over ``J_{k, K0 mu}`` against ``|mu - mu'|``.

    After rescaling by ``2^k`` the quantity is independent of ``k`` and ``mu``,
    so it is measured on ``K0 mu + J`` with ``mu = 0``.
    """
    Jiv, c0 = check_local_lower_bound(sys, phi)
    y = np.linspace(Jiv[0], Jiv[1], points)
    sups = []
    for d in offsets:
        a = np.abs(convolution_profile(sys, phi, y, shift=K0 * d))
        b = np.abs(convolution_profile(sys, phi, y, shift=-K0 * d))
        sups.append(float(max(a.max(), b.max())))
    sups = np.array(sups)
    gamma = sys.decay_gamma
    out = {"offsets": list(offsets), "sup": sups.tolist(), "J": list(Jiv), "c0": c0,
           "gamma_fit": gamma, "K0": K0,
           "bound": [sys.decay_C * math.exp(7 * gamma / 8) * math.exp(-gamma * K0 * d)
                     if math.isfinite(gamma) else 0.0 for d in offsets]}
    if np.all(sups > 0):
        slope = float(np.polyfit(np.array(offsets, dtype=float), np.log(sups), 1)[0])
        out["log_slope"] = slope
        out["threshold"] = -0.8 * gamma * K0
        out["ok"] = bool(slope <= -0.8 * gamma * K0)
    else:
        out["log_slope"] = -math.inf
        out["ok"] = bool(np.all(sups == 0))
    return out


# -- growth experiments ----------------------------------------------------------------

def trial_points(trials: int, seed: int) -> np.ndarray:
    return tf.sample_ts(trials, seed=seed, dim=2)


def _settings(cfg: ExperimentConfig, K0: int, seed: int) -> ms.NormSettings:
    lo, hi = cfg.k_range if cfg.k_range is not None else (0, None)
    # endpoint runs integrate the square function in L^q: with only a few of
    # the 4^N intervals present the L^p norm would see their sparse supports
    outer = cfg.q if cfg.kind == "endpoint" else cfg.p
    return ms.NormSettings(s=cfg.s, p=outer, q=cfg.q, i_min=lo, i_max=hi, depth=cfg.depth,
                           pair_depth=cfg.pair_depth, samples=cfg.samples, seed=seed,
                           prune_tol=cfg.coefficient_cutoff, domain=(-1.0, float(K0)))


def growth_problem(cfg: ExperimentConfig, N: int, kit: Toolkit):
    """Atom groups and wavelet levels for one ``N``, with per-trial sign maps."""
    ts = trial_points(cfg.trials, cfg.seed)
    if cfg.kind == "endpoint":
        fs = tf.build_endpoint_intervals(N, cfg.intervals, cfg.occupancy, cfg.gap, cfg.lift)
        f = tf.build_endpoint_test(fs, None, cfg.q, kit.K0, kit.eta, cfg.n)
        levels = tf.endpoint_levels(fs)
    else:
        fs = tf.frequency_set_for_N(N)
        f = tf.build_test_function(fs, None, cfg.s, cfg.q, kit.K0, kit.eta)
        levels = tf.lacunary_levels(fs)
    gkeys = sorted({g.sign_key for g in f.groups})
    lkeys = sorted({L.sign_key for L in levels})
    signs = [(tf.sign_map(lkeys, t1), tf.sign_map(gkeys, t2)) for t1, t2 in ts]
    return fs, f, levels, signs, ts


def _job_seed(cfg: ExperimentConfig, N: int) -> int:
    return int(np.random.SeedSequence([cfg.seed, N, 7]).generate_state(1)[0])


def run_single_N(cfg: ExperimentConfig, N: int, kit: Toolkit | None = None) -> dict:
    """Norms of ``f_{t2}`` and ``T_{t1} f_{t2}`` for every trial at one ``N``."""
    if kit is None:
        kit = make_toolkit(cfg.n, cfg.K0, cfg.trunc_tol)
    fs, f, levels, signs, ts = growth_problem(cfg, N, kit)
    st = _settings(cfg, kit.K0, _job_seed(cfg, N))
    try:
        res, info = ms.estimate(f.groups, levels, kit.sys, kit.K0, kit.eta, kit.phi0, kit.phi, st, signs)
    except (ValueError, ArithmeticError) as e:
        raise NumericalError(str(e)) from e
    scale = 1.0
    if cfg.kind == "endpoint":
        # M intervals stand in for 4^N; their q-th powers add
        scale = (4.0 ** N / len(fs.intervals)) ** (1.0 / cfg.q)
    rows = []
    for trial, (r, (t1, t2)) in enumerate(zip(res, ts)):
        if not (math.isfinite(r.norm_f) and math.isfinite(r.norm_Tf)):
            raise NumericalError(f"non-finite norm at N={N}, trial {trial}")
        rows.append({"n": cfg.n, "p": cfg.p, "q": cfg.q, "s": cfg.s, "N": N, "trial": trial,
                     "norm_f": r.norm_f * scale, "norm_Tf": r.norm_Tf * scale,
                     "K0": kit.K0, "Z": fs.Z if cfg.kind == "endpoint" else "",
                     "t1": float(t1), "t2": float(t2),
                     "norm_Pplus": r.norm_Pplus * scale, "norm_Pminus": r.norm_Pminus * scale,
                     "rel_err_f": r.rel_err_f, "rel_err_Tf": r.rel_err_Tf})
    return {"N": N, "rows": rows, "info": info, "scale": scale}


def plan_counts(cfg: ExperimentConfig) -> list[dict]:
    """Atom and pairing counts per ``N`` without running the estimator."""
    kit = make_toolkit(cfg.n, cfg.K0, cfg.trunc_tol)
    out = []
    for N in range(cfg.N_range[0], cfg.N_range[1] + 1):
        fs, f, levels, signs, ts = growth_problem(cfg, N, kit)
        st = _settings(cfg, kit.K0, 0)
        lk = ms.LevelKernels(cfg.n, kit.phi0, kit.phi, kit.eta)
        plan = ms.make_plan(f.groups, levels, kit.K0, ms.Pairing(kit.sys, kit.eta), lk, st)
        c = plan.counts()
        c.update({"N": N, "wavelets": int(sum(L.count for L in levels)), "K0": kit.K0})
        out.append(c)
    return out


def _job(args):
    cfg_json, N = args
    return run_single_N(ExperimentConfig.from_json(cfg_json), N)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> tuple[GrowthFit, list[dict], dict]:
    cfg.validate()
    Ns = list(range(cfg.N_range[0], cfg.N_range[1] + 1))
    if workers > 1 and len(Ns) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(Ns))) as ex:
            outs = list(ex.map(_job, [(cfg.to_json(), N) for N in Ns]))
    else:
        kit = make_toolkit(cfg.n, cfg.K0, cfg.trunc_tol)
        outs = [run_single_N(cfg, N, kit) for N in Ns]
    rows = [r for o in outs for r in o["rows"]]
    qT = [q_mean([r["norm_Tf"] for r in o["rows"]], cfg.q) for o in outs]
    fmax = [max(r["norm_f"] for r in o["rows"]) for o in outs]
    pmax = [max(max(r["norm_Pplus"], r["norm_Pminus"]) for r in o["rows"]) for o in outs]
    if cfg.kind == "endpoint":
        xs = np.log2(Ns)
        fq = [q_mean([r["norm_f"] for r in o["rows"]], cfg.q) for o in outs]
        f_fit = fit_slope(xs, np.log2(fq), 1.0 / cfg.q)
        fit = fit_slope(xs, np.log2(qT), 1.0, abscissa="log2 N",
                        norm_f_fit=f_fit.to_json(), max_norm_f=fmax, max_projection=pmax)
    else:
        f_fit = fit_slope(Ns, np.log2(fmax), 0.0)
        fit = fit_slope(Ns, np.log2(qT), cfg.theory_slope(), abscissa="N",
                        norm_f_fit=f_fit.to_json(), max_norm_f=fmax, max_projection=pmax)
    info = {str(o["N"]): o["info"] for o in outs}
    return fit, rows, info


def run_growth_experiment(cfg: ExperimentConfig, workers: int = 1):
    cfg.kind = "growth"
    return run_experiment(cfg, workers)


def run_endpoint_experiment(cfg: ExperimentConfig, workers: int = 1):
    cfg.kind = "endpoint"
    if cfg.s is not None and abs(cfg.s - cfg.endpoint_s()) > 1e-12:
        raise ConfigError(f"endpoint runs pin s = -1/q' - n = {cfg.endpoint_s()}, got {cfg.s}")
    cfg.s = None
    return run_experiment(cfg, workers)


def default_workers() -> int:
    return os.cpu_count() or 1


# -- brute-force oracle ----------------------------------------------------------------

def _gauss_conv(kernel, kr: float, g, a: float, b: float, x: np.ndarray, panels: int = 8,
                nodes: int = 48) -> np.ndarray:
    """``int_a^b kernel(x - u) g(u) du`` for each ``x`` with the kernel supported on ``[-kr, kr]``."""
    X, W = np.polynomial.legendre.leggauss(nodes)
    out = np.zeros(x.shape)
    lo = np.maximum(a, x - kr)
    hi = np.minimum(b, x + kr)
    ok = hi > lo
    if not ok.any():
        return out
    lo, hi, xs = lo[ok], hi[ok], x[ok]
    acc = np.zeros(xs.shape)
    for pnl in range(panels):
        pa = lo + (hi - lo) * pnl / panels
        pb = lo + (hi - lo) * (pnl + 1) / panels
        half = 0.5 * (pb - pa)
        U = 0.5 * (pa + pb)[:, None] + half[:, None] * X[None, :]
        acc += np.sum(W[None, :] * kernel(xs[:, None] - U) * g(U), axis=1) * half
    out[ok] = acc
    return out


def bruteforce_estimate(groups, levels, sys, K0, eta, phi0, phi, st: ms.NormSettings, trial_signs,
                        return_fields: bool = False):
    """Direct-quadrature version of :func:`multiscale.estimate` on the same samples.

    Every atom/wavelet pairing and every local mean is an explicit Gauss
    quadrature; nothing is tabulated or pruned.
    Practical only for a few hundred atoms and wavelets.
    """
    n = sys.order
    psi = sys.psi
    sampler = ms.ImportanceSampler(groups, st.domain, eta.radius, st.uniform_weight)
    rng = np.random.default_rng(st.seed)
    x = sampler.draw(st.samples, rng)
    q = sampler.density(x)
    a, b = st.domain
    wgt = np.where((x >= a) & (x <= b), 1.0 / np.maximum(q, 1e-300), 0.0) / st.samples
    i_max = st.i_max if st.i_max is not None else ms.default_i_max(groups)
    lv = np.arange(st.i_min, i_max + 1)
    order = np.argsort(x)
    xs = x[order]

    def kern(i):
        if i == 0:
            return phi0, phi0.radius
        return (lambda v: 2.0 ** i * phi(np.ldexp(v, i))), phi.radius * 2.0 ** -i

    G, Lc = len(groups), len(levels)
    T = len(trial_signs)
    fpart = np.zeros((G, lv.size, x.size))
    for gi, g in enumerate(groups):
        R = eta.radius * 2.0 ** -g.scale
        for nu in range(g.count):
            c = g.c0 + nu * g.spacing
            prof = (lambda u, c=c, l=g.scale: eta(np.ldexp(u - c, l)))
            for ii, i in enumerate(lv):
                K, kr = kern(int(i))
                s0, s1 = np.searchsorted(xs, [c - R - kr, c + R + kr])
                if s1 > s0:
                    fpart[gi, ii, order[s0:s1]] += g.amplitude * _gauss_conv(K, kr, prof, c - R, c + R, xs[s0:s1])
    U = np.zeros((G, Lc, lv.size, x.size))
    if levels:
        lo_s, hi_s = psi.support
        pw = psi.width
        for li, L in enumerate(levels):
            j = L.j
            for m in range(L.count):
                mu = L.mu_start + m * L.mu_step
                shift = K0 * mu
                # coefficients by direct quadrature on the pieces of psi
                coefs = np.zeros(G)
                for gi, g in enumerate(groups):
                    R = eta.radius * 2.0 ** -g.scale
                    for nu in range(g.count):
                        c = g.c0 + nu * g.spacing
                        ua, ub = max(math.ldexp(c - R, j) - shift, lo_s), min(math.ldexp(c + R, j) - shift, hi_s)
                        if ub <= ua:
                            continue
                        cuts = np.arange(math.ceil(ua / pw), math.floor(ub / pw) + 1) * pw
                        edges = np.unique(np.concatenate([[ua], cuts, [ub]]))
                        X, W = np.polynomial.legendre.leggauss(48)
                        tot = 0.0
                        for e0, e1 in zip(edges[:-1], edges[1:]):
                            for s0_, s1_ in zip(np.linspace(e0, e1, 9)[:-1], np.linspace(e0, e1, 9)[1:]):
                                hh = 0.5 * (s1_ - s0_)
                                uu = 0.5 * (s0_ + s1_) + hh * X
                                xx = np.ldexp(uu + shift, -j)
                                tot += hh * np.sum(W * eta(np.ldexp(xx - c, g.scale)) * psi(uu))
                        coefs[gi] += g.amplitude * tot
                if not np.any(coefs):
                    continue
                xa, xb = math.ldexp(lo_s + shift, -j), math.ldexp(hi_s + shift, -j)
                wfun = (lambda v, j=j, shift=shift: psi(np.ldexp(v, j) - shift))
                pieces = np.arange(xa, xb, pw * 2.0 ** -j)
                for ii, i in enumerate(lv):
                    K, kr = kern(int(i))
                    s0, s1 = np.searchsorted(xs, [xa - kr, xb + kr])
                    if s1 <= s0:
                        continue
                    val = np.zeros(s1 - s0)
                    for pa in pieces:
                        val += _gauss_conv(K, kr, wfun, pa, pa + pw * 2.0 ** -j, xs[s0:s1], panels=8, nodes=48)
                    U[:, li, ii, order[s0:s1]] += coefs[:, None] * val[None, :]
    lw = 2.0 ** (lv * st.s * st.q)
    results = []
    for sl, sg in trial_signs:
        gs = np.array([sg.get(g.sign_key, 1) for g in groups], dtype=float)
        ls = np.array([sl.get(L.sign_key, 1) for L in levels], dtype=float)
        F = np.einsum("g,gis->is", gs, fpart)
        vals = [F]
        if levels:
            vals.append(np.einsum("g,l,glis->is", gs, ls, U))
            vals.append(np.einsum("g,l,glis->is", gs, (ls > 0).astype(float), U))
            vals.append(np.einsum("g,l,glis->is", gs, (ls < 0).astype(float), U))
        norms = []
        for A in vals:
            Gq = lw @ np.abs(A) ** st.q
            norms.append(float(np.sum(Gq ** (st.p / st.q) * wgt) ** (1.0 / st.p)))
        r = ms.TrialResult(norm_f=norms[0])
        if levels:
            r.norm_Tf, r.norm_Pplus, r.norm_Pminus = norms[1:]
        results.append(r)
    if return_fields:
        return results, (x, lv, fpart, U)
    return results
