# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the convolution and pooling hot paths.

API mirrors `_ref`; patch extraction, scatter and pooling run as typed C
loops, the convolution GEMM stays on numpy's BLAS.
"""

import numpy as np

cimport numpy as cnp
cimport cython

cnp.import_array()


def conv2d_forward(cnp.ndarray x, cnp.ndarray w, stride=(1, 1), pad=(0, 0)):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wid = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t sh = stride[0], sw = stride[1]
    cdef Py_ssize_t ph = pad[0], pw = pad[1]
    cdef Py_ssize_t ho = (h + 2 * ph - kh) // sh + 1
    cdef Py_ssize_t wo = (wid + 2 * pw - kw) // sw + 1
    if ho < 1 or wo < 1:
        raise ValueError(f"kernel ({kh}x{kw}) does not fit input ({h}x{wid}) with pad ({ph}, {pw})")

    cols = np.empty((n, c * kh * kw, ho * wo), dtype=np.float64)
    _fill_cols(np.ascontiguousarray(x, dtype=np.float64), cols, kh, kw, sh, sw, ph, pw, ho, wo)
    y = np.matmul(w.reshape(cout, -1)[None], cols)
    return np.ascontiguousarray(y.reshape(n, cout, ho, wo))


def conv2d_backward(cnp.ndarray x, cnp.ndarray w, cnp.ndarray gy, stride=(1, 1), pad=(0, 0)):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wid = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t sh = stride[0], sw = stride[1]
    cdef Py_ssize_t ph = pad[0], pw = pad[1]
    cdef Py_ssize_t ho = gy.shape[2], wo = gy.shape[3]

    cols = np.empty((n, c * kh * kw, ho * wo), dtype=np.float64)
    _fill_cols(np.ascontiguousarray(x, dtype=np.float64), cols, kh, kw, sh, sw, ph, pw, ho, wo)
    gy_flat = np.ascontiguousarray(gy, dtype=np.float64).reshape(n, cout, ho * wo)

    gw = np.einsum("ncl,nkl->ck", gy_flat, cols).reshape(w.shape[0], w.shape[1], w.shape[2], w.shape[3])
    gcols = np.ascontiguousarray(np.matmul(w.reshape(cout, -1).T[None], gy_flat))
    gx = np.zeros((n, c, h, wid), dtype=np.float64)
    _scatter_cols(gcols, gx, kh, kw, sh, sw, ph, pw, ho, wo)
    return gx, gw


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _fill_cols(double[:, :, :, ::1] x, double[:, :, ::1] cols,
                     Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t sh, Py_ssize_t sw,
                     Py_ssize_t ph, Py_ssize_t pw, Py_ssize_t ho, Py_ssize_t wo) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t b, ch, i, j, oy, ox, iy, ix, row
    cdef double v
    for b in range(n):
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    row = (ch * kh + i) * kw + j
                    for oy in range(ho):
                        iy = oy * sh + i - ph
                        for ox in range(wo):
                            ix = ox * sw + j - pw
                            if 0 <= iy < h and 0 <= ix < w:
                                v = x[b, ch, iy, ix]
                            else:
                                v = 0.0
                            cols[b, row, oy * wo + ox] = v


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _scatter_cols(double[:, :, ::1] gcols, double[:, :, :, ::1] gx,
                        Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t sh, Py_ssize_t sw,
                        Py_ssize_t ph, Py_ssize_t pw, Py_ssize_t ho, Py_ssize_t wo) noexcept nogil:
    cdef Py_ssize_t n = gx.shape[0], c = gx.shape[1], h = gx.shape[2], w = gx.shape[3]
    cdef Py_ssize_t b, ch, i, j, oy, ox, iy, ix, row
    for b in range(n):
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    row = (ch * kh + i) * kw + j
                    for oy in range(ho):
                        iy = oy * sh + i - ph
                        if iy < 0 or iy >= h:
                            continue
                        for ox in range(wo):
                            ix = ox * sw + j - pw
                            if 0 <= ix < w:
                                gx[b, ch, iy, ix] += gcols[b, row, oy * wo + ox]


def maxpool2d_forward(cnp.ndarray x, pool):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ph = pool[0], pw = pool[1]
    cdef Py_ssize_t ho = h // ph, wo = w // pw
    if ho < 1 or wo < 1:
        raise ValueError(f"pool ({ph}x{pw}) larger than input ({h}x{w})")
    y = np.empty((n, c, ho, wo), dtype=np.float64)
    argmax = np.empty((n, c, ho, wo), dtype=np.int64)
    _pool_fwd(np.ascontiguousarray(x, dtype=np.float64), y, argmax, ph, pw)
    return y, argmax


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _pool_fwd(double[:, :, :, ::1] x, double[:, :, :, ::1] y,
                    long long[:, :, :, ::1] argmax, Py_ssize_t ph, Py_ssize_t pw) noexcept nogil:
    cdef Py_ssize_t n = y.shape[0], c = y.shape[1], ho = y.shape[2], wo = y.shape[3]
    cdef Py_ssize_t b, ch, oy, ox, i, j
    cdef double best, v
    cdef Py_ssize_t besti
    for b in range(n):
        for ch in range(c):
            for oy in range(ho):
                for ox in range(wo):
                    best = x[b, ch, oy * ph, ox * pw]
                    besti = 0
                    for i in range(ph):
                        for j in range(pw):
                            v = x[b, ch, oy * ph + i, ox * pw + j]
                            if v > best:
                                best = v
                                besti = i * pw + j
                    y[b, ch, oy, ox] = best
                    argmax[b, ch, oy, ox] = besti


def maxpool2d_backward(cnp.ndarray gy, cnp.ndarray argmax, x_shape, pool):
    cdef Py_ssize_t ph = pool[0], pw = pool[1]
    gx = np.zeros(x_shape, dtype=np.float64)
    _pool_bwd(np.ascontiguousarray(gy, dtype=np.float64),
              np.ascontiguousarray(argmax, dtype=np.int64), gx, ph, pw)
    return gx


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _pool_bwd(double[:, :, :, ::1] gy, long long[:, :, :, ::1] argmax,
                    double[:, :, :, ::1] gx, Py_ssize_t ph, Py_ssize_t pw) noexcept nogil:
    cdef Py_ssize_t n = gy.shape[0], c = gy.shape[1], ho = gy.shape[2], wo = gy.shape[3]
    cdef Py_ssize_t b, ch, oy, ox, k
    for b in range(n):
        for ch in range(c):
            for oy in range(ho):
                for ox in range(wo):
                    k = <Py_ssize_t> argmax[b, ch, oy, ox]
                    gx[b, ch, oy * ph + k // pw, ox * pw + k % pw] += gy[b, ch, oy, ox]
