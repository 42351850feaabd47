"""Selects the interpolation kernel backend.

The hot kernels are numba-compiled by default. Setting the environment
variable ``DIFFEOLAB_NO_NUMBA=1`` (or the standard ``NUMBA_DISABLE_JIT=1``)
selects the pure-numpy fallback; the fallback is also used automatically when
numba is not importable. Both backends implement identical semantics.
"""

import os


def _env_disabled() -> bool:
    if os.environ.get("DIFFEOLAB_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}:
        return True
    return os.environ.get("NUMBA_DISABLE_JIT", "").strip() == "1"


if _env_disabled():
    from . import _interp_numpy as _impl

    USING_NUMBA = False
else:
    try:
        from . import _interp_numba as _impl

        USING_NUMBA = True
    except ImportError:
        from . import _interp_numpy as _impl

        USING_NUMBA = False

interp_flat = _impl.interp_flat


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"
