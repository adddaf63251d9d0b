# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled same-size 2D correlation for single-channel float64 images.

Semantics are identical to ``gabordefect._kernels.pyfallback.corr2d``:
correlation orientation (no kernel flip), odd kernel sides, output the
same size as the input, border handled either by mirror-without-edge
reflection or by zeros. Input validation lives in the Python wrapper.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _reflect(Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    # mirror index without repeating the edge sample; caller guarantees
    # -n < i < 2n - 1 so a single fold suffices
    if i < 0:
        return -i
    if i >= n:
        return 2 * n - 2 - i
    return i


def corr2d(double[:, ::1] img, double[:, ::1] kernel, bint zero_pad):
    """Correlate ``img`` with ``kernel``; same-size output.

    zero_pad=False mirrors the image at the borders, zero_pad=True
    treats outside pixels as zero.
    """
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t kh = kernel.shape[0]
    cdef Py_ssize_t kw = kernel.shape[1]
    cdef Py_ssize_t cy = kh // 2
    cdef Py_ssize_t cx = kw // 2

    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t y, x, u, v, yy, xx
    cdef double acc

    with nogil:
        if zero_pad:
            for y in range(h):
                for x in range(w):
                    acc = 0.0
                    for u in range(kh):
                        yy = y + u - cy
                        if yy < 0 or yy >= h:
                            continue
                        for v in range(kw):
                            xx = x + v - cx
                            if xx < 0 or xx >= w:
                                continue
                            acc += kernel[u, v] * img[yy, xx]
                    out[y, x] = acc
        else:
            for y in range(h):
                for x in range(w):
                    acc = 0.0
                    for u in range(kh):
                        yy = _reflect(y + u - cy, h)
                        for v in range(kw):
                            xx = _reflect(x + v - cx, w)
                            acc += kernel[u, v] * img[yy, xx]
                    out[y, x] = acc
    return out_arr
