import json

import pytest

from splinelab import cli
from splinelab import local_means as lm
from splinelab import test_functions as tf


def _run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_build_wavelet_haar(tmp_path, capsys):
    code, out, _ = _run(["build-wavelet", "--order", "0", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert json.loads(out)["ok"]
    header = (tmp_path / "psi_n0.csv").read_text().splitlines()[0]
    for key in ("n", "grid_scale", "window", "trunc_tol"):
        assert key in header
    assert (tmp_path / "psi_n0.csv").read_text().splitlines()[1].startswith("theta,j,coeff")


def test_build_wavelet_order_cap(tmp_path, capsys):
    code, _, err = _run(["build-wavelet", "--order", "99", "--out", str(tmp_path)], capsys)
    assert code == 2
    assert json.loads(err)["exit_code"] == 2


def test_verify_roundtrip(tmp_path, capsys):
    _run(["build-wavelet", "--order", "1", "--out", str(tmp_path)], capsys)
    code, out, _ = _run(["verify", "--order", "1", "--coeffs", str(tmp_path / "psi_n1.csv")], capsys)
    assert code == 0
    rep = json.loads(out)
    assert all(rep["passed"].values())
    assert rep["gram_defect"] <= 1e-6


def test_norm_command(tmp_path, capsys):
    eta = lm.make_eta(0)
    f = tf.build_test_function(tf.frequency_set_for_N(1), 0.3, -0.6, 1.5, 1, eta)
    f.save(tmp_path / "atoms.json")
    argv = ["norm", "--atoms", str(tmp_path / "atoms.json"), "--s", "-0.6", "--p", "4", "--q", "1.5",
            "--samples", "2048"]
    code, out, _ = _run(argv, capsys)
    assert code == 0
    assert json.loads(out)["norm"] > 0
    code, _, err = _run(argv[:-6] + ["--s", "-0.6", "--p", "1", "--q", "1.5"], capsys)
    assert code == 2


def test_growth_range_violation(capsys):
    code, _, err = _run(["growth", "--n", "0", "--s", "0.2", "--dry-run"], capsys)
    assert code == 2
    msg = json.loads(err)
    assert msg["error"] == "ConfigError" and "-1/q' - n" in msg["message"]


def test_endpoint_pins_s(capsys):
    code, _, _ = _run(["endpoint", "--n", "0", "--s", "-0.5", "--dry-run"], capsys)
    assert code == 2
    code, out, _ = _run(["endpoint", "--n", "0", "--dry-run"], capsys)
    assert code == 0
    plan = json.loads(out)
    assert plan["manifest"]["config"]["s"] == pytest.approx(-1 / 3)
    assert any("interval spec missing" in n for n in plan["manifest"]["notes"])


def test_config_file_with_override(tmp_path, capsys):
    cfgp = tmp_path / "cfg.json"
    cfgp.write_text(json.dumps({"n": 0, "s": -0.6, "trials": 3, "N_range": [2, 4]}))
    code, out, _ = _run(["growth", "--config", str(cfgp), "--trials", "5", "--dry-run"], capsys)
    assert code == 0
    assert json.loads(out)["manifest"]["config"]["trials"] == 5
    cfgp.write_text("{not json")
    code, _, _ = _run(["growth", "--config", str(cfgp), "--dry-run"], capsys)
    assert code == 2


def test_growth_outputs_independent_of_workers(tmp_path, capsys):
    outs = []
    for name, workers in (("a", "1"), ("b", "2")):
        d = tmp_path / name
        argv = ["growth", "--n", "0", "--s", "-0.6", "--N-range", "1", "3", "--trials", "2",
                "--samples", "1024", "--workers", workers, "--emit-plot-data", "--out", str(d)]
        code, _, _ = _run(argv, capsys)
        assert code == 0
        outs.append([(d / f).read_bytes() for f in ("growth_results.csv", "growth_fit.json", "growth_plot.csv")])
    assert outs[0] == outs[1]
    header = outs[0][0].decode().splitlines()[1].split(",")
    assert header[:10] == ["n", "p", "q", "s", "N", "trial", "norm_f", "norm_Tf", "K0", "Z"]


def test_bad_usage_exit_code(capsys):
    code, _, err = _run(["growth", "--n", "notanint"], capsys)
    assert code == 2
