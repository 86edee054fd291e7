"""Select the compiled kernels when available, the numpy fallback otherwise.

Set ``FILTNOISE_PURE=1`` to force the fallback.
"""

import os

from . import _fallback

NAME = "python"

if not os.environ.get("FILTNOISE_PURE"):
    try:
        from . import _ext as _impl
    except ImportError:
        _impl = _fallback
    else:
        NAME = "cython"
else:
    _impl = _fallback

mode_velocity = _impl.mode_velocity
spline_velocity = _impl.spline_velocity
