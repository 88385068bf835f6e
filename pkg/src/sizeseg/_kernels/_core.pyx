# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: 3x3 same-padding convolution and the symmetric
half-edge matvec.  Contracts mirror numpy_backend exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

NAME = "compiled"


def conv3x3_forward(double[:, :, ::1] x, double[:, :, :, ::1] w, double[::1] b):
    cdef Py_ssize_t h = x.shape[0], ww = x.shape[1], cin = x.shape[2]
    cdef Py_ssize_t cout = w.shape[0]
    out_arr = np.empty((h, ww, cout), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    # kernel rearranged to (3, 3, cin, cout) so the inner loop is contiguous
    wk_arr = np.ascontiguousarray(np.transpose(np.asarray(w), (2, 3, 1, 0)))
    cdef double[:, :, :, ::1] wk = wk_arr
    cdef Py_ssize_t y, xx, dy, dx, ci, co, sy, sx
    cdef double xv

    with nogil:
        for y in range(h):
            for xx in range(ww):
                for co in range(cout):
                    out[y, xx, co] = b[co]
                for dy in range(3):
                    sy = y + dy - 1
                    if sy < 0 or sy >= h:
                        continue
                    for dx in range(3):
                        sx = xx + dx - 1
                        if sx < 0 or sx >= ww:
                            continue
                        for ci in range(cin):
                            xv = x[sy, sx, ci]
                            for co in range(cout):
                                out[y, xx, co] += xv * wk[dy, dx, ci, co]
    return out_arr


def conv3x3_backward(double[:, :, ::1] x, double[:, :, :, ::1] w,
                     double[:, :, ::1] gout):
    cdef Py_ssize_t h = x.shape[0], ww = x.shape[1], cin = x.shape[2]
    cdef Py_ssize_t cout = w.shape[0]
    gx_arr = np.zeros((h, ww, cin), dtype=np.float64)
    gw_arr = np.zeros((cout, cin, 3, 3), dtype=np.float64)
    gb_arr = np.zeros(cout, dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t y, xx, dy, dx, ci, co, sy, sx
    cdef double g

    with nogil:
        for y in range(h):
            for xx in range(ww):
                for co in range(cout):
                    g = gout[y, xx, co]
                    gb[co] += g
                    for dy in range(3):
                        sy = y + dy - 1
                        if sy < 0 or sy >= h:
                            continue
                        for dx in range(3):
                            sx = xx + dx - 1
                            if sx < 0 or sx >= ww:
                                continue
                            for ci in range(cin):
                                gw[co, ci, dy, dx] += g * x[sy, sx, ci]
                                gx[sy, sx, ci] += g * w[co, ci, dy, dx]
    return gx_arr, gw_arr, gb_arr


def edge_matvec(int[::1] p, int[::1] q, double[::1] weights,
                double[:, ::1] x, double[:, ::1] out):
    cdef Py_ssize_t e, k
    cdef Py_ssize_t ne = p.shape[0], nk = x.shape[1]
    cdef int a, bb
    cdef double wv
    with nogil:
        for e in range(ne):
            a = p[e]
            bb = q[e]
            wv = weights[e]
            for k in range(nk):
                out[a, k] += wv * x[bb, k]
                out[bb, k] += wv * x[a, k]
    return np.asarray(out)
