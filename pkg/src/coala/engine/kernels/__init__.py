"""Backend selection for the conv hot kernels.

The compiled extension (``_fast``, Cython) is used for float32 when it
imported cleanly; the numpy reference implementation is the fallback and
always handles float64.  ``COALA_BACKEND=reference`` forces the fallback.
"""

import os

from . import reference

try:
    from . import _fast
except ImportError:
    _fast = None

if os.environ.get("COALA_BACKEND") == "reference":
    _fast = None

ACTIVE_BACKEND = "fast" if _fast is not None else "reference"


def _backend_for(dtype):
    import numpy as np

    if _fast is not None and dtype == np.float32:
        return _fast
    return reference


def im2col(x, kh, kw, sh, sw, ph, pw):
    return _backend_for(x.dtype).im2col(x, kh, kw, sh, sw, ph, pw)


def col2im(cols, c, h, w, kh, kw, sh, sw, ph, pw):
    return _backend_for(cols.dtype).col2im(cols, c, h, w, kh, kw, sh, sw, ph, pw)
