"""Sampling kernels with a compiled core and a numpy fallback.

The compiled extension is used when it imports; set ``EWSIM_PURE_PYTHON=1``
to force the fallback.  ``BACKEND`` names the active implementation.
"""

import os

from . import _fallback as fallback

native = None
if os.environ.get("EWSIM_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _native as native
    except ImportError:  # extension not built
        native = None

_impl = native if native is not None else fallback
BACKEND = "native" if native is not None else "python"

stream_keys = _impl.stream_keys
uniforms = _impl.uniforms
branch_walk = _impl.branch_walk
route_walk = _impl.route_walk

__all__ = ["BACKEND", "branch_walk", "fallback", "native", "route_walk", "stream_keys", "uniforms"]
