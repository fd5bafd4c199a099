"""Select the compiled kernels when available, else the numpy fallback.

Set ``CASCADE_LAB_PURE=1`` to force the fallback (used by the benchmark).
"""

import os

from . import _fallback

BACKEND = "python"
if os.environ.get("CASCADE_LAB_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _fallback
    else:
        BACKEND = "cython"
else:
    _impl = _fallback

toy_rhs = _impl.toy_rhs
cubic_sum = _impl.cubic_sum
spreading_partners = _impl.spreading_partners

__all__ = ["BACKEND", "toy_rhs", "cubic_sum", "spreading_partners"]
