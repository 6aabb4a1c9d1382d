# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled LSTM recurrence and span pruning. Mirrors ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh
from libc.string cimport memset
from scipy.linalg.cython_blas cimport dgemv, dger

cnp.import_array()


cdef inline double _sigmoid(double x) nogil:
    return 1.0 / (1.0 + exp(-x))


def lstm_forward(double[:, ::1] xproj, double[:, ::1] w_hh, cnp.int64_t[::1] lengths, bint reverse=False):
    cdef Py_ssize_t total = xproj.shape[0]
    cdef Py_ssize_t four_h = xproj.shape[1]
    cdef int hidden = <int>(four_h // 4)
    cdef int m = <int>four_h
    cdef int n = hidden
    cdef int inc = 1
    cdef double one = 1.0
    h_arr = np.zeros((total, hidden))
    c_arr = np.zeros((total, hidden))
    g_arr = np.zeros((total, four_h))
    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] c = c_arr
    cdef double[:, ::1] gates = g_arr
    cdef double[::1] pre = np.zeros(four_h)
    cdef Py_ssize_t seg, k, t, p, j, start = 0, length
    cdef double cp
    with nogil:
        for seg in range(lengths.shape[0]):
            length = lengths[seg]
            p = -1
            for k in range(length):
                t = start + length - 1 - k if reverse else start + k
                for j in range(four_h):
                    pre[j] = xproj[t, j]
                if p >= 0:
                    # pre += w_hh^T h_prev (column-major view of row-major w_hh)
                    dgemv("N", &m, &n, &one, &w_hh[0, 0], &m, &h[p, 0], &inc, &one, &pre[0], &inc)
                for j in range(hidden):
                    gates[t, j] = _sigmoid(pre[j])
                    gates[t, hidden + j] = _sigmoid(pre[hidden + j])
                    gates[t, 2 * hidden + j] = _sigmoid(pre[2 * hidden + j])
                    gates[t, 3 * hidden + j] = tanh(pre[3 * hidden + j])
                    cp = c[p, j] if p >= 0 else 0.0
                    c[t, j] = gates[t, hidden + j] * cp + gates[t, j] * gates[t, 3 * hidden + j]
                    h[t, j] = gates[t, 2 * hidden + j] * tanh(c[t, j])
                p = t
            start += length
    return h_arr, c_arr, g_arr


def lstm_backward(double[:, ::1] dh, double[:, ::1] w_hh, double[:, ::1] h, double[:, ::1] c,
                  double[:, ::1] gates, cnp.int64_t[::1] lengths, bint reverse=False):
    cdef Py_ssize_t total = h.shape[0]
    cdef int hidden = <int>h.shape[1]
    cdef int m = 4 * hidden
    cdef int n = hidden
    cdef int inc = 1
    cdef double one = 1.0
    cdef double zero = 0.0
    dx_arr = np.zeros((total, 4 * hidden))
    dw_arr = np.zeros((hidden, 4 * hidden))
    cdef double[:, ::1] dx = dx_arr
    cdef double[:, ::1] dw = dw_arr
    cdef double[::1] dh_next = np.zeros(hidden)
    cdef double[::1] dc_next = np.zeros(hidden)
    cdef Py_ssize_t seg, k, t, p, j, start = 0, length
    cdef double i_, f_, o_, g_, tc, dht, dc, cp
    with nogil:
        for seg in range(lengths.shape[0]):
            length = lengths[seg]
            memset(&dh_next[0], 0, hidden * sizeof(double))
            memset(&dc_next[0], 0, hidden * sizeof(double))
            for k in range(length - 1, -1, -1):
                t = start + length - 1 - k if reverse else start + k
                if k > 0:
                    p = start + length - k if reverse else start + k - 1
                else:
                    p = -1
                for j in range(hidden):
                    i_ = gates[t, j]
                    f_ = gates[t, hidden + j]
                    o_ = gates[t, 2 * hidden + j]
                    g_ = gates[t, 3 * hidden + j]
                    cp = c[p, j] if p >= 0 else 0.0
                    tc = tanh(c[t, j])
                    dht = dh[t, j] + dh_next[j]
                    dc = dc_next[j] + dht * o_ * (1.0 - tc * tc)
                    dx[t, j] = dc * g_ * i_ * (1.0 - i_)
                    dx[t, hidden + j] = dc * cp * f_ * (1.0 - f_)
                    dx[t, 2 * hidden + j] = dht * tc * o_ * (1.0 - o_)
                    dx[t, 3 * hidden + j] = dc * i_ * (1.0 - g_ * g_)
                    dc_next[j] = dc * f_
                if p >= 0:
                    # dw += outer(h_prev, dpre), i.e. rank-1 update in the column-major view
                    dger(&m, &n, &one, &dx[t, 0], &inc, &h[p, 0], &inc, &dw[0, 0], &m)
                # dh_prev = w_hh @ dpre
                dgemv("T", &m, &n, &one, &w_hh[0, 0], &m, &dx[t, 0], &inc, &zero, &dh_next[0], &inc)
            start += length
    return dx_arr, dw_arr


def greedy_prune(cnp.int64_t[::1] starts, cnp.int64_t[::1] ends, cnp.int64_t[::1] order, Py_ssize_t max_keep):
    cdef Py_ssize_t n = order.shape[0]
    kept_arr = np.empty(min(n, max_keep), dtype=np.int64)
    cdef cnp.int64_t[::1] kept = kept_arr
    cdef Py_ssize_t count = 0, a, b, idx
    cdef cnp.int64_t s, e, ks, ke
    cdef bint crossing
    with nogil:
        for a in range(n):
            if count >= max_keep:
                break
            idx = order[a]
            s = starts[idx]
            e = ends[idx]
            crossing = False
            for b in range(count):
                ks = starts[kept[b]]
                ke = ends[kept[b]]
                if (s < ks and ks <= e and e < ke) or (ks < s and s <= ke and ke < e):
                    crossing = True
                    break
            if not crossing:
                kept[count] = idx
                count += 1
    return kept_arr[:count].copy()
