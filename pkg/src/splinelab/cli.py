"""Command-line interface: ``splinelab <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.  Errors
are printed to stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

RESULT_FIELDS = ["n", "p", "q", "s", "N", "trial", "norm_f", "norm_Tf", "K0", "Z"]


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind, self.message = code, kind, message


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return v


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(_canonical(cfg).encode()).hexdigest()


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _emit(obj, out: Path | None):
    if out is None:
        print(json.dumps(obj, indent=1, sort_keys=True))
    else:
        _write_json(out, obj)


# -- commands ---------------------------------------------------------------------------

def cmd_build_wavelet(args) -> int:
    from . import piecewise_poly as pw
    from . import spline_wavelets as sw
    try:
        sys_ = sw.haar_system() if args.order == 0 else sw.build_system(args.order, tol=args.tol)
    except sw.OrderCapError as e:
        raise CliError(EXIT_CONFIG, "OrderCapError", str(e))
    except sw.DegenerateWaveletError as e:
        raise CliError(EXIT_NUMERICAL, "DegenerateWaveletError", str(e))
    rep = sw.verify_properties(sys_, tol=args.gram_tol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pw.to_csv(sys_.psi, out / f"psi_n{args.order}.csv", order=args.order)
    pw.to_csv(sys_.scaling, out / f"scaling_n{args.order}.csv", order=args.order)
    _write_json(out / f"properties_n{args.order}.json", rep.to_json())
    print(json.dumps({"order": args.order, "ok": rep.ok, "outputs": sorted(
        p.name for p in out.glob(f"*_n{args.order}.*"))}, sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    from . import piecewise_poly as pw
    from . import spline_wavelets as sw
    try:
        if args.coeffs:
            psi = pw.from_csv(args.coeffs)
            base = sw.haar_system() if args.order == 0 else sw.build_system(args.order, tol=args.tol)
            if psi.coeffs.shape != base.psi.coeffs.shape:
                raise CliError(EXIT_CONFIG, "ShapeMismatch", "coefficient file does not match the order")
            sys_ = sw.refit_decay(replace(base, psi=psi))
        else:
            sys_ = sw.haar_system() if args.order == 0 else sw.build_system(args.order, tol=args.tol)
    except sw.OrderCapError as e:
        raise CliError(EXIT_CONFIG, "OrderCapError", str(e))
    except (OSError, KeyError) as e:
        raise CliError(EXIT_CONFIG, type(e).__name__, str(e))
    rep = sw.verify_properties(sys_, tol=args.gram_tol)
    _emit(rep.to_json(), Path(args.out) if args.out else None)
    return EXIT_OK if rep.ok else EXIT_NUMERICAL


def cmd_norm(args) -> int:
    from . import local_means as lm
    from . import multiscale as ms
    from . import test_functions as tf
    try:
        f = tf.SparseSuperposition.load(args.atoms)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as e:
        raise CliError(EXIT_CONFIG, type(e).__name__, f"cannot read atoms file: {e}")
    if not (1 < args.p < math.inf and 1 < args.q < math.inf):
        raise CliError(EXIT_CONFIG, "ConfigError", "need 1 < p, q < infinity")
    kr = tuple(args.k_range) if args.k_range else None
    n = args.order if args.order is not None else max(f.profile.order - 3, 0)
    try:
        if args.method == "local-means":
            res = ms.fspq_norm(f, args.s, args.p, args.q, kr, samples=args.samples, seed=args.seed, n=n)
            out = res.to_json()
        else:
            kmax = kr[1] if kr else f.finest_scale + 4
            val = lm.littlewood_paley_norm(f, args.s, args.p, args.q, kmax=kmax)
            out = {"norm": val, "k_range": [0, kmax], "domain": list(f.domain),
                   "resolution": {"method": "littlewood-paley"}}
    except (lm.ResolutionError, lm.ScaleOffsetCapError, ArithmeticError) as e:
        raise CliError(EXIT_NUMERICAL, type(e).__name__, str(e))
    _emit(out, Path(args.out) if args.out else None)
    return EXIT_OK


def _load_config(args, kind: str):
    from .experiments import ConfigError, ExperimentConfig
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(EXIT_CONFIG, type(e).__name__, f"cannot read config: {e}")
    for key in ("n", "p", "q", "s", "trials", "seed", "samples", "intervals", "occupancy", "lift", "gap",
                "depth"):
        v = getattr(args, key, None)
        if v is not None:
            base[key] = v
    if args.N_range is not None:
        base["N_range"] = list(args.N_range)
    if args.K0 is not None:
        base["K0"] = args.K0 if args.K0 == "auto" else int(args.K0)
    if args.cutoff is not None:
        base["coefficient_cutoff"] = args.cutoff
    notes = []
    if kind == "endpoint":
        if "s" not in base:
            base["s"] = None
        if "intervals" not in base:
            notes.append("interval spec missing: consecutive intervals built automatically")
    base["kind"] = kind
    try:
        cfg = ExperimentConfig.from_json(base)
        cfg.validate()
    except (ConfigError, TypeError) as e:
        raise CliError(EXIT_CONFIG, "ConfigError", str(e))
    return cfg, notes


def _write_results(path: Path, rows: list[dict], manifest: dict):
    buf = io.StringIO()
    buf.write("# manifest " + _canonical(manifest) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    extra = ["t1", "t2", "norm_Pplus", "norm_Pminus", "rel_err_f", "rel_err_Tf"]
    w.writerow(RESULT_FIELDS + extra)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in RESULT_FIELDS + extra])
    path.write_text(buf.getvalue())


def _run_experiment(args, kind: str) -> int:
    from . import experiments as ex
    cfg, notes = _load_config(args, kind)
    cfg_json = cfg.to_json()
    manifest = {"config_hash": config_hash(cfg_json), "version": __version__, "seed": cfg.seed,
                "config": cfg_json, "notes": notes}
    if args.dry_run:
        try:
            plan = ex.plan_counts(cfg)
        except (ValueError, ArithmeticError) as e:
            raise CliError(EXIT_NUMERICAL, type(e).__name__, str(e))
        print(json.dumps({"dry_run": True, "manifest": manifest, "plan": plan}, indent=1, sort_keys=True))
        return EXIT_OK
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = {"results": f"{kind}_results.csv", "fit": f"{kind}_fit.json"}
    if args.emit_plot_data:
        names["plot"] = f"{kind}_plot.csv"
    manifest["outputs"] = sorted(names.values())
    t0 = time.time()
    try:
        run = ex.run_endpoint_experiment if kind == "endpoint" else ex.run_growth_experiment
        fit, rows, info = run(cfg, workers=args.workers)
    except ex.ConfigError as e:
        raise CliError(EXIT_CONFIG, "ConfigError", str(e))
    except (ex.NumericalError, ArithmeticError, ValueError) as e:
        raise CliError(EXIT_NUMERICAL, type(e).__name__, str(e))
    wall = time.time() - t0
    _write_results(out / names["results"], rows, manifest)
    _write_json(out / names["fit"], {"manifest": manifest, "fit": fit.to_json(), "estimator": info})
    if args.emit_plot_data:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "log2_norm"] if kind == "growth" else ["log2_N", "log2_norm"])
        for x, y in fit.points:
            w.writerow([_fmt(x), _fmt(y)])
        (out / names["plot"]).write_text(buf.getvalue())
    # wall-clock lives only here so the result files stay reproducible
    _write_json(out / f"{kind}_manifest.json", {**manifest, "wall_clock_s": wall})
    print(json.dumps({"slope": fit.slope, "theory_slope": fit.theory_slope,
                      "outputs": manifest["outputs"]}, sort_keys=True))
    return EXIT_OK


def cmd_growth(args) -> int:
    return _run_experiment(args, "growth")


def cmd_endpoint(args) -> int:
    return _run_experiment(args, "endpoint")


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splinelab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build-wavelet", help="construct a spline wavelet and dump its coefficients")
    b.add_argument("--order", type=int, required=True)
    b.add_argument("--tol", type=float, default=1e-8, help="truncation tolerance")
    b.add_argument("--gram-tol", type=float, default=1e-6)
    b.add_argument("--out", default=".")
    b.set_defaults(func=cmd_build_wavelet)

    v = sub.add_parser("verify", help="check the wavelet properties and print the report")
    v.add_argument("--order", type=int, required=True)
    v.add_argument("--tol", type=float, default=1e-8)
    v.add_argument("--gram-tol", type=float, default=1e-6)
    v.add_argument("--coeffs", help="coefficient CSV to verify instead of a fresh build")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    nm = sub.add_parser("norm", help="local-means norm of a superposition in atoms.json")
    nm.add_argument("--atoms", required=True)
    nm.add_argument("--s", type=float, required=True)
    nm.add_argument("--p", type=float, required=True)
    nm.add_argument("--q", type=float, required=True)
    nm.add_argument("--k-range", type=int, nargs=2)
    nm.add_argument("--order", type=int)
    nm.add_argument("--samples", type=int, default=2 ** 14)
    nm.add_argument("--seed", type=int, default=0)
    nm.add_argument("--method", choices=["local-means", "littlewood-paley"], default="local-means")
    nm.add_argument("--out")
    nm.set_defaults(func=cmd_norm)

    for name, func in (("growth", cmd_growth), ("endpoint", cmd_endpoint)):
        g = sub.add_parser(name, help=f"run the {name} experiment")
        g.add_argument("--config", help="JSON config; flags override its entries")
        g.add_argument("--n", type=int)
        g.add_argument("--p", type=float)
        g.add_argument("--q", type=float)
        g.add_argument("--s", type=float)
        g.add_argument("--N-range", dest="N_range", type=int, nargs=2)
        g.add_argument("--trials", type=int)
        g.add_argument("--seed", type=int)
        g.add_argument("--samples", type=int)
        g.add_argument("--depth", type=int)
        g.add_argument("--K0")
        g.add_argument("--cutoff", type=float, help="relative pruning threshold")
        if name == "endpoint":
            g.add_argument("--intervals", type=int, help="number of intervals (at most 4^N)")
            g.add_argument("--occupancy", type=int, help="members per interval (Z)")
            g.add_argument("--lift", type=int, help="octaves added to the first base point")
            g.add_argument("--gap", type=int, help="empty octaves between intervals")
        g.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        g.add_argument("--out", default=".")
        g.add_argument("--dry-run", action="store_true")
        g.add_argument("--emit-plot-data", action="store_true")
        g.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        if e.code not in (0, None):
            print(json.dumps({"error": "UsageError", "message": "invalid arguments", "exit_code": EXIT_CONFIG}),
                  file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK
    try:
        return args.func(args)
    except CliError as e:
        print(json.dumps({"error": e.kind, "message": e.message, "exit_code": e.code}), file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
