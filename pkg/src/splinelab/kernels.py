"""Hot-kernel dispatch: compiled extension when available, numpy otherwise.

Set ``SPLINELAB_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

BACKEND = "python"

if os.environ.get("SPLINELAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._ckernels import bump_eval, interp_cubic, jump_sum, knot_sum, ppoly_eval, prog_table_sum  # noqa: F401
        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from ._pykernels import bump_eval, interp_cubic, jump_sum, knot_sum, ppoly_eval, prog_table_sum  # noqa: F401
