"""Pure-numpy conv/pool kernels (im2col + BLAS).

Same signatures as the compiled `_convcore` module; used when the extension
is not built or LINKER_PURE_PY=1. All arrays are float64 C-contiguous;
layout is channels-first (C, H, W) per sample.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(x, kh, kw, stride):
    # (C, Ho, Wo, kh, kw) view of the padded input
    w = sliding_window_view(x, (kh, kw), axis=(1, 2))
    return w[:, ::stride, ::stride]


def conv2d_fwd(x, w, stride, ph, pw):
    kh, kw = w.shape[2], w.shape[3]
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    win = _windows(xp, kh, kw, stride)
    return np.ascontiguousarray(np.tensordot(w, win, axes=([1, 2, 3], [0, 3, 4])))


def conv2d_bwd_weight(x, gy, stride, ph, pw, kh, kw):
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    win = _windows(xp, kh, kw, stride)
    # gy: (O, Ho, Wo); win: (C, Ho, Wo, kh, kw) -> (O, C, kh, kw)
    return np.ascontiguousarray(np.tensordot(gy, win, axes=([1, 2], [1, 2])))


def conv2d_bwd_input(gy, w, stride, ph, pw, h, wdim):
    o, ho, wo = gy.shape
    _, c, kh, kw = w.shape
    if stride > 1:
        # trailing zeros cover the stride remainder so edge rows/cols that
        # the last window reached still receive their gradient
        rh = (h + 2 * ph - kh) % stride
        rw = (wdim + 2 * pw - kw) % stride
        up = np.zeros((o, (ho - 1) * stride + 1 + rh, (wo - 1) * stride + 1 + rw))
        up[:, ::stride, ::stride] = gy
    else:
        up = gy
    # full correlation with the spatially flipped kernel, channels swapped
    wt = np.ascontiguousarray(w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    gx = conv2d_fwd(up, wt, 1, kh - 1 - ph, kw - 1 - pw)
    assert gx.shape == (c, h, wdim)
    return gx


def maxpool2d_fwd(x, k, stride):
    c, h, w = x.shape
    win = _windows(x, k, k, stride)
    ho, wo = win.shape[1], win.shape[2]
    flat = win.reshape(c, ho, wo, k * k)
    off = flat.argmax(axis=3)
    iu, iv = off // k, off % k
    ii = np.arange(ho)[None, :, None] * stride + iu
    jj = np.arange(wo)[None, None, :] * stride + iv
    idx = (ii * w + jj).astype(np.int64)
    y = np.ascontiguousarray(flat.max(axis=3))
    return y, np.ascontiguousarray(idx)


def maxpool2d_bwd(gy, idx, h, w):
    c = gy.shape[0]
    gx = np.zeros((c, h * w))
    ci = np.repeat(np.arange(c), idx[0].size)
    np.add.at(gx, (ci, idx.reshape(-1)), gy.reshape(-1))
    return gx.reshape(c, h, w)
