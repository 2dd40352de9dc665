"""Pure-numpy reference kernels for the convolution and pooling hot paths.

Shared conventions with the compiled backend (`_opt`):

    x       (N, C_in, H, W)   float64
    w       (C_out, C_in, KH, KW)
    y       (N, C_out, HO, WO)
    stride  (sh, sw), pad (ph, pw), zero padding
    pool    non-overlapping (ph, pw) windows, trailing remainder cropped

`maxpool2d_forward` returns window-local flat argmax indices so backward is
a pure scatter.
"""

import numpy as np


def _im2col(x, kh, kw, stride, pad):
    n, c, h, w = x.shape
    sh, sw = stride
    ph, pw = pad
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (w + 2 * pw - kw) // sw + 1
    if ho < 1 or wo < 1:
        raise ValueError(f"kernel ({kh}x{kw}) does not fit input ({h}x{w}) with pad {pad}")
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
    cols = np.empty((n, c, kh, kw, ho, wo), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i : i + sh * ho : sh, j : j + sw * wo : sw]
    return cols, ho, wo


def conv2d_forward(x, w, stride=(1, 1), pad=(0, 0)):
    cout, cin, kh, kw = w.shape
    cols, ho, wo = _im2col(x, kh, kw, stride, pad)
    n = x.shape[0]
    flat = cols.reshape(n, cin * kh * kw, ho * wo)
    y = np.matmul(w.reshape(cout, -1)[None], flat)
    return y.reshape(n, cout, ho, wo)


def conv2d_backward(x, w, gy, stride=(1, 1), pad=(0, 0)):
    n, c, h, wid = x.shape
    cout, cin, kh, kw = w.shape
    sh, sw = stride
    ph, pw = pad
    cols, ho, wo = _im2col(x, kh, kw, stride, pad)
    gy_flat = gy.reshape(n, cout, ho * wo)

    gw = np.einsum("ncl,nkl->ck", gy_flat, cols.reshape(n, cin * kh * kw, ho * wo))
    gw = gw.reshape(w.shape)

    gcols = np.matmul(w.reshape(cout, -1).T[None], gy_flat)
    gcols = gcols.reshape(n, cin, kh, kw, ho, wo)
    gxp = np.zeros((n, c, h + 2 * ph, wid + 2 * pw), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i : i + sh * ho : sh, j : j + sw * wo : sw] += gcols[:, :, i, j]
    gx = gxp[:, :, ph : ph + h, pw : pw + wid] if (ph or pw) else gxp
    return gx, gw


def maxpool2d_forward(x, pool):
    n, c, h, w = x.shape
    ph, pw = pool
    ho, wo = h // ph, w // pw
    if ho < 1 or wo < 1:
        raise ValueError(f"pool ({ph}x{pw}) larger than input ({h}x{w})")
    cropped = x[:, :, : ho * ph, : wo * pw]
    windows = cropped.reshape(n, c, ho, ph, wo, pw).transpose(0, 1, 2, 4, 3, 5)
    windows = windows.reshape(n, c, ho, wo, ph * pw)
    argmax = np.argmax(windows, axis=4)
    y = np.take_along_axis(windows, argmax[..., None], axis=4)[..., 0]
    return y, argmax.astype(np.int64)


def maxpool2d_backward(gy, argmax, x_shape, pool):
    n, c, h, w = x_shape
    ph, pw = pool
    ho, wo = h // ph, w // pw
    gwin = np.zeros((n, c, ho, wo, ph * pw), dtype=gy.dtype)
    np.put_along_axis(gwin, argmax[..., None], gy[..., None], axis=4)
    gwin = gwin.reshape(n, c, ho, wo, ph, pw).transpose(0, 1, 2, 4, 3, 5)
    gx = np.zeros(x_shape, dtype=gy.dtype)
    gx[:, :, : ho * ph, : wo * pw] = gwin.reshape(n, c, ho * ph, wo * pw)
    return gx
