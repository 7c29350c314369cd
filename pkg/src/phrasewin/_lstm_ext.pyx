# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled LSTM recurrence; drop-in for ``phrasewin._lstm_py``."""
import numpy as np
from libc.math cimport tanh


cdef inline double _sigmoid(double x) nogil:
    return 0.5 * (tanh(0.5 * x) + 1.0)


def lstm_forward(double[:, ::1] xproj, double[:, ::1] U):
    cdef Py_ssize_t T = xproj.shape[0]
    cdef Py_ssize_t H4 = xproj.shape[1]
    cdef Py_ssize_t H = H4 // 4
    h_arr = np.zeros((T, H))
    c_arr = np.zeros((T, H))
    g_arr = np.empty((T, H4))
    z_arr = np.empty(H4)
    # U transposed so the hidden-state product is a run of contiguous axpys
    cdef double[:, ::1] UT = np.ascontiguousarray(np.asarray(U).T)
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] c = c_arr
    cdef double[:, ::1] gates = g_arr
    cdef double[::1] z = z_arr
    cdef Py_ssize_t t, j, k
    cdef double hk, cp, ig, fg, gg, og, ct
    with nogil:
        for t in range(T):
            for j in range(H4):
                z[j] = xproj[t, j]
            if t > 0:
                for k in range(H):
                    hk = h[t - 1, k]
                    for j in range(H4):
                        z[j] += UT[k, j] * hk
            for j in range(H):
                ig = _sigmoid(z[j])
                fg = _sigmoid(z[H + j])
                gg = tanh(z[2 * H + j])
                og = _sigmoid(z[3 * H + j])
                cp = c[t - 1, j] if t > 0 else 0.0
                ct = fg * cp + ig * gg
                c[t, j] = ct
                h[t, j] = og * tanh(ct)
                gates[t, j] = ig
                gates[t, H + j] = fg
                gates[t, 2 * H + j] = gg
                gates[t, 3 * H + j] = og
    return h_arr, c_arr, g_arr


def lstm_backward(double[:, ::1] dh, double[:, ::1] gates, double[:, ::1] c, double[:, ::1] U):
    cdef Py_ssize_t T = dh.shape[0]
    cdef Py_ssize_t H = dh.shape[1]
    cdef Py_ssize_t H4 = 4 * H
    dz_arr = np.empty((T, H4))
    cdef double[:, ::1] dz = dz_arr
    cdef double[::1] dh_next = np.zeros(H)
    cdef double[::1] dc_next = np.zeros(H)
    cdef Py_ssize_t t, j, k
    cdef double ig, fg, gg, og, tc, dht, dc, cp, dzj
    with nogil:
        for t in range(T - 1, -1, -1):
            for j in range(H):
                ig = gates[t, j]
                fg = gates[t, H + j]
                gg = gates[t, 2 * H + j]
                og = gates[t, 3 * H + j]
                cp = c[t - 1, j] if t > 0 else 0.0
                tc = tanh(c[t, j])
                dht = dh[t, j] + dh_next[j]
                dc = dc_next[j] + dht * og * (1.0 - tc * tc)
                dz[t, j] = dc * gg * ig * (1.0 - ig)
                dz[t, H + j] = dc * cp * fg * (1.0 - fg)
                dz[t, 2 * H + j] = dc * ig * (1.0 - gg * gg)
                dz[t, 3 * H + j] = dht * tc * og * (1.0 - og)
                dc_next[j] = dc * fg
            for k in range(H):
                dh_next[k] = 0.0
            for j in range(H4):
                dzj = dz[t, j]
                for k in range(H):
                    dh_next[k] += U[j, k] * dzj
    return dz_arr
