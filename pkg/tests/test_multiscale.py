from dataclasses import replace

import numpy as np
import pytest

from splinelab import experiments as ex
from splinelab import multiscale as ms


def _compare(n, N, group_key=None, level=None, samples=2 ** 10, trials=2):
    cfg = ex.ExperimentConfig(n=n, s=-0.6 - n, trials=trials, samples=samples)
    kit = ex.make_toolkit(n)
    fs, f, levels, signs, ts = ex.growth_problem(cfg, N, kit)
    groups = f.groups
    if group_key is not None:
        groups = [g for g in groups if g.sign_key == group_key]
        levels = [L for L in levels if L.j == level]
        signs = [({level: 1}, {group_key: 1})]
    st = ex._settings(cfg, kit.K0, 5)
    eng, _ = ms.estimate(groups, levels, kit.sys, kit.K0, kit.eta, kit.phi0, kit.phi, st, signs)
    ref = ex.bruteforce_estimate(groups, levels, kit.sys, kit.K0, kit.eta, kit.phi0, kit.phi, st, signs)
    return eng, ref


def test_isolated_spline_group_matches_bruteforce():
    # one translate group against one wavelet level, wide psi: no interior run
    eng, ref = _compare(1, 2, group_key=2, level=2)
    for a, b in zip(eng, ref):
        assert a.norm_f == pytest.approx(b.norm_f, rel=1e-6)
        assert a.norm_Tf == pytest.approx(b.norm_Tf, rel=1e-6)


def test_haar_pipeline_matches_bruteforce():
    eng, ref = _compare(0, 2)
    for a, b in zip(eng, ref):
        assert a.norm_f == pytest.approx(b.norm_f, rel=1e-6)
        assert a.norm_Tf == pytest.approx(b.norm_Tf, rel=1e-6)
        assert a.norm_Pplus == pytest.approx(b.norm_Pplus, rel=1e-6)


def test_sampler_density_is_normalised():
    g = ms.AtomGroup(3, 0.25, 0.5, 4, 1.0, 0)
    smp = ms.ImportanceSampler([g], (-1.0, 3.0), 2.0 ** -5, 0.5)
    x = np.linspace(-1.0, 3.0, 400001)
    dens = smp.density(x)
    assert np.sum(dens) * (x[1] - x[0]) == pytest.approx(1.0, abs=1e-3)
    draws = smp.draw(20000, np.random.default_rng(0))
    assert np.all((draws >= -1.0) & (draws <= 3.0))


def test_sampling_error_shrinks():
    cfg = ex.ExperimentConfig(n=0, s=-0.6, trials=1, samples=2 ** 10)
    kit = ex.make_toolkit(0)
    fs, f, levels, signs, ts = ex.growth_problem(cfg, 2, kit)
    errs = []
    for m in (2 ** 10, 2 ** 14):
        st = ex._settings(replace(cfg, samples=m), kit.K0, 1)
        res, _ = ms.estimate(f.groups, levels, kit.sys, kit.K0, kit.eta, kit.phi0, kit.phi, st, signs)
        errs.append(res[0].rel_err_f)
    assert errs[1] < errs[0] / 2


def test_settings_validation():
    with pytest.raises(ValueError):
        ms.NormSettings(s=0.0, p=1.0, q=2.0).validate()
    with pytest.raises(ValueError):
        ms.NormSettings(s=0.0, p=2.0, q=2.0, i_min=5, i_max=3).validate()
