"""Pick the compiled kernels when available, else the numpy fallback.

Set ``SILO_DP_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and by the backend-equivalence tests).
"""

import os

from . import _fallback

BACKENDS = {"python": _fallback}

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None
else:
    BACKENDS["compiled"] = _kernels

if _kernels is not None and os.environ.get("SILO_DP_PURE_PYTHON", "") in ("", "0"):
    NAME = "compiled"
else:
    NAME = "python"

kernels = BACKENDS[NAME]


def get(name=None):
    """Kernel module by name (``"compiled"`` or ``"python"``); default is active."""
    if name is None:
        return kernels
    try:
        return BACKENDS[name]
    except KeyError:
        raise ImportError(f"kernel backend {name!r} is not available") from None
