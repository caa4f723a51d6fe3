"""Pure-numpy conv kernels: im2col / col2im patch gather-scatter.

These are the hot inner loops of conv2d / conv_transpose2d.  A compiled
Cython twin lives in ``_fast.pyx``; this module is the fallback and the
only path for float64 (used by the gradient-check harness).
"""

import numpy as np

BACKEND_NAME = "reference"


def im2col(x, kh, kw, sh, sw, ph, pw):
    """[B,C,H,W] -> patch matrix [B, C*kh*kw, Ho*Wo]."""
    b, c, h, w = x.shape
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (w + 2 * pw - kw) // sw + 1
    if ph or pw:
        xp = np.zeros((b, c, h + 2 * ph, w + 2 * pw), dtype=x.dtype)
        xp[:, :, ph:ph + h, pw:pw + w] = x
    else:
        xp = x
    cols = np.empty((b, c, kh, kw, ho, wo), dtype=x.dtype)
    for u in range(kh):
        for v in range(kw):
            cols[:, :, u, v] = xp[:, :, u:u + sh * ho:sh, v:v + sw * wo:sw]
    return cols.reshape(b, c * kh * kw, ho * wo)


def col2im(cols, c, h, w, kh, kw, sh, sw, ph, pw):
    """Adjoint of im2col: scatter-add patches back to [B,C,H,W]."""
    b = cols.shape[0]
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (w + 2 * pw - kw) // sw + 1
    cols6 = cols.reshape(b, c, kh, kw, ho, wo)
    xp = np.zeros((b, c, h + 2 * ph, w + 2 * pw), dtype=cols.dtype)
    # for a fixed (u,v) the strided targets are disjoint, so slice += is exact
    for u in range(kh):
        for v in range(kw):
            xp[:, :, u:u + sh * ho:sh, v:v + sw * wo:sw] += cols6[:, :, u, v]
    if ph or pw:
        return np.ascontiguousarray(xp[:, :, ph:ph + h, pw:pw + w])
    return xp
