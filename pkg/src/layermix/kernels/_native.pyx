# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``layermix.kernels.pyref`` (same contracts).

Only the inherently sequential parts run as C loops: the per-step recurrent
matvec, the gate activations and the state/derivative propagation.  The large
batched products (input projection, weight gradients) go through numpy so
they still hit BLAS.
"""

from libc.math cimport exp, tanh

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double _sigmoid(double x) nogil:
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    cdef double ex = exp(x)
    return ex / (1.0 + ex)


def lstm_forward(x_seq, w_x, w_h, b, rec_mask):
    """See ``pyref.lstm_forward``; identical signature and semantics."""
    x_arr = np.ascontiguousarray(x_seq, dtype=np.float64)
    wx_arr = np.ascontiguousarray(w_x, dtype=np.float64)
    cdef double[:, ::1] wh = np.ascontiguousarray(w_h, dtype=np.float64)
    cdef double[::1] mask = np.ascontiguousarray(rec_mask, dtype=np.float64)

    cdef Py_ssize_t n = x_arr.shape[0]
    cdef Py_ssize_t hidden = wh.shape[1]

    # gates start as pre-activations from the input path; the recurrent path
    # and the nonlinearities are filled in below
    gates_arr = x_arr @ wx_arr.T + np.ascontiguousarray(b, dtype=np.float64)
    h_seq_arr = np.empty((n, hidden), dtype=np.float64)
    c_seq_arr = np.empty((n, hidden), dtype=np.float64)

    cdef double[:, ::1] gates = gates_arr
    cdef double[:, ::1] h_seq = h_seq_arr
    cdef double[:, ::1] c_seq = c_seq_arr

    hm_arr = np.zeros(hidden, dtype=np.float64)
    cdef double[::1] hm = hm_arr

    cdef Py_ssize_t t, r, k
    cdef double acc, i_g, f_g, g_g, o_g, c_val

    with nogil:
        for t in range(n):
            if t > 0:
                for k in range(hidden):
                    hm[k] = mask[k] * h_seq[t - 1, k]
                for r in range(4 * hidden):
                    acc = 0.0
                    for k in range(hidden):
                        acc += wh[r, k] * hm[k]
                    gates[t, r] += acc
            for k in range(hidden):
                i_g = _sigmoid(gates[t, k])
                f_g = _sigmoid(gates[t, hidden + k])
                g_g = tanh(gates[t, 2 * hidden + k])
                o_g = _sigmoid(gates[t, 3 * hidden + k])
                if t > 0:
                    c_val = f_g * c_seq[t - 1, k] + i_g * g_g
                else:
                    c_val = i_g * g_g
                gates[t, k] = i_g
                gates[t, hidden + k] = f_g
                gates[t, 2 * hidden + k] = g_g
                gates[t, 3 * hidden + k] = o_g
                c_seq[t, k] = c_val
                h_seq[t, k] = o_g * tanh(c_val)
    return h_seq_arr, c_seq_arr, gates_arr


def lstm_backward(grad_h_seq, x_seq, w_x, w_h, rec_mask, h_seq, c_seq, gates):
    """See ``pyref.lstm_backward``; identical signature and semantics."""
    cdef double[:, ::1] gh = np.ascontiguousarray(grad_h_seq, dtype=np.float64)
    wh_arr = np.ascontiguousarray(w_h, dtype=np.float64)
    cdef double[:, ::1] wh = wh_arr
    cdef double[::1] mask = np.ascontiguousarray(rec_mask, dtype=np.float64)
    hs_arr = np.ascontiguousarray(h_seq, dtype=np.float64)
    cdef double[:, ::1] hs = hs_arr
    cdef double[:, ::1] cs = np.ascontiguousarray(c_seq, dtype=np.float64)
    cdef double[:, ::1] gt = np.ascontiguousarray(gates, dtype=np.float64)

    cdef Py_ssize_t n = gh.shape[0]
    cdef Py_ssize_t hidden = wh.shape[1]

    grad_pre_arr = np.empty((n, 4 * hidden), dtype=np.float64)
    cdef double[:, ::1] grad_pre = grad_pre_arr
    dh_arr = np.zeros(hidden, dtype=np.float64)
    dc_arr = np.zeros(hidden, dtype=np.float64)
    cdef double[::1] dh = dh_arr
    cdef double[::1] dc_next = dc_arr

    cdef Py_ssize_t t, r, k
    cdef double i_g, f_g, g_g, o_g, tanh_c, c_prev, dc, pre_r

    with nogil:
        for t in range(n - 1, -1, -1):
            for k in range(hidden):
                dh[k] += gh[t, k]
            for k in range(hidden):
                i_g = gt[t, k]
                f_g = gt[t, hidden + k]
                g_g = gt[t, 2 * hidden + k]
                o_g = gt[t, 3 * hidden + k]
                tanh_c = tanh(cs[t, k])
                c_prev = cs[t - 1, k] if t > 0 else 0.0
                dc = dh[k] * o_g * (1.0 - tanh_c * tanh_c) + dc_next[k]
                grad_pre[t, k] = dc * g_g * i_g * (1.0 - i_g)
                grad_pre[t, hidden + k] = dc * c_prev * f_g * (1.0 - f_g)
                grad_pre[t, 2 * hidden + k] = dc * i_g * (1.0 - g_g * g_g)
                grad_pre[t, 3 * hidden + k] = dh[k] * tanh_c * o_g * (1.0 - o_g)
                dc_next[k] = dc * f_g
            # dh = mask * (wh.T @ grad_pre[t]), streamed row-major over wh
            for k in range(hidden):
                dh[k] = 0.0
            for r in range(4 * hidden):
                pre_r = grad_pre[t, r]
                for k in range(hidden):
                    dh[k] += wh[r, k] * pre_r
            for k in range(hidden):
                dh[k] *= mask[k]

    x_arr = np.ascontiguousarray(x_seq, dtype=np.float64)
    h_masked = np.zeros_like(hs_arr)
    h_masked[1:] = hs_arr[:-1] * np.asarray(mask)
    grad_x_seq = grad_pre_arr @ np.ascontiguousarray(w_x, dtype=np.float64)
    grad_w_x = grad_pre_arr.T @ x_arr
    grad_w_h = grad_pre_arr.T @ h_masked
    grad_b = grad_pre_arr.sum(axis=0)
    return grad_x_seq, grad_w_x, grad_w_h, grad_b
