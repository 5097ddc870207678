"""Kernel backend selection.

The compiled extension is preferred; the numpy fallback is bit-identical.
Set EVTRACK_NO_ACCEL=1 to force the fallback (used by the benchmark and the
backend-equivalence tests).
"""

import os

from . import fallback

if os.environ.get("EVTRACK_NO_ACCEL"):
    _impl = fallback
    BACKEND = "numpy"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = fallback
        BACKEND = "numpy"

accumulate_events = _impl.accumulate_events
bilinear_resample = _impl.bilinear_resample

__all__ = ["BACKEND", "accumulate_events", "bilinear_resample", "fallback"]
