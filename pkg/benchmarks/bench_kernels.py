"""Compiled vs numpy kernels: micro timings plus one end-to-end norm estimate.

Run ``python3 benchmarks/bench_kernels.py``.  The end-to-end part runs the
estimator in a subprocess with ``SPLINELAB_PURE_PYTHON=1`` for comparison.
"""

import json
import os
import subprocess
import sys
import timeit

import numpy as np

from splinelab import _pykernels as py
from splinelab.local_means import bump_poly

try:
    from splinelab import _ckernels as cy
except ImportError:
    cy = None

E2E = """
import json, time
from splinelab import experiments as ex, kernels
cfg = ex.ExperimentConfig(n=1, s=-1.6, trials=4, samples=2 ** 14)
kit = ex.make_toolkit(1)
ex.run_single_N(cfg, 2, kit)
t0 = time.perf_counter()
ex.run_single_N(cfg, 3, kit)
print(json.dumps({"backend": kernels.BACKEND, "seconds": time.perf_counter() - t0}))
"""


def micro(repeat=5):
    rng = np.random.default_rng(0)
    S = 200_000
    x = np.sort(rng.uniform(-1, 1, S))
    vals = np.sin(np.linspace(0, 3, 4097))
    poly = np.array(bump_poly(3), dtype=float)
    kv = np.cos(np.linspace(-1.5, 1.5, 1025))
    w = rng.normal(size=64)
    cases = {
        "bump_eval": lambda m: m.bump_eval(poly, 3, x),
        "interp_cubic": lambda m: m.interp_cubic(vals, -1.0, 2.0 / 4096, x),
        "prog_table_sum": lambda m: m.prog_table_sum(x, -0.9, 0.05, 30, vals, -0.1, 0.2 / 4096),
        "knot_sum": lambda m: m.knot_sum(x, 2.0 ** -6, -64, 2, 32, w, kv, -1.0, 2.0 / 1024, 64.0),
    }
    rows = []
    for name, fn in cases.items():
        tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=repeat))
        tc = min(timeit.repeat(lambda: fn(cy), number=1, repeat=repeat)) if cy else float("nan")
        rows.append((name, tp, tc))
    return rows


def end_to_end():
    out = {}
    for pure in ("0", "1"):
        env = dict(os.environ, SPLINELAB_PURE_PYTHON=pure)
        res = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
        d = json.loads(res.stdout.strip().splitlines()[-1])
        out[d["backend"]] = d["seconds"]
    return out


def main():
    print(f"{'kernel':<16}{'numpy [s]':>12}{'compiled [s]':>14}{'speedup':>10}")
    for name, tp, tc in micro():
        print(f"{name:<16}{tp:>12.4f}{tc:>14.4f}{tp / tc:>10.1f}")
    e2e = end_to_end()
    print("\nn=1 growth problem at N=3, 4 trials, 2^14 samples:")
    for k, v in sorted(e2e.items()):
        print(f"  {k:<8}{v:8.2f} s")


if __name__ == "__main__":
    main()
