"""Select the compiled kernels when available, the numpy fallback otherwise.

Set ``HONEST_OTR_PURE=1`` to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("HONEST_OTR_PURE", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _core as _impl
    except ImportError:  # extension not built
        _impl = _fallback

BACKEND = "compiled" if _impl is not _fallback else "python"

loo_smooth = _impl.loo_smooth
simplex_iterate = _impl.simplex_iterate
OPTIMAL, UNBOUNDED, ITERATION_LIMIT = _fallback.OPTIMAL, _fallback.UNBOUNDED, _fallback.ITERATION_LIMIT
