"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
bit-compatible in shape and agrees numerically to rounding. Set
LINKER_PURE_PY=1 to force the fallback (used by the benchmark and tests).
"""

import os

if os.environ.get("LINKER_PURE_PY"):
    from . import fallback as _impl
    BACKEND = "python"
else:
    try:
        from . import _convcore as _impl
        BACKEND = "cython"
    except ImportError:
        from . import fallback as _impl
        BACKEND = "python"

conv2d_fwd = _impl.conv2d_fwd
conv2d_bwd_input = _impl.conv2d_bwd_input
conv2d_bwd_weight = _impl.conv2d_bwd_weight
maxpool2d_fwd = _impl.maxpool2d_fwd
maxpool2d_bwd = _impl.maxpool2d_bwd
