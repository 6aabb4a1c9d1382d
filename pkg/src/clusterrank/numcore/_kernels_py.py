"""Pure numpy versions of the hot loops. Used when the compiled module is absent."""
from __future__ import annotations

import numpy as np


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _segment_steps(lengths, reverse):
    start = 0
    for n in lengths:
        n = int(n)
        steps = range(start + n - 1, start - 1, -1) if reverse else range(start, start + n)
        yield steps
        start += n


def lstm_forward(xproj, w_hh, lengths, reverse=False):
    total, four_h = xproj.shape
    hidden = four_h // 4
    h = np.zeros((total, hidden))
    c = np.zeros((total, hidden))
    gates = np.zeros((total, four_h))
    for steps in _segment_steps(lengths, reverse):
        h_prev = np.zeros(hidden)
        c_prev = np.zeros(hidden)
        for t in steps:
            pre = xproj[t] + h_prev @ w_hh
            i = _sigmoid(pre[:hidden])
            f = _sigmoid(pre[hidden:2 * hidden])
            o = _sigmoid(pre[2 * hidden:3 * hidden])
            g = np.tanh(pre[3 * hidden:])
            c_t = f * c_prev + i * g
            h_t = o * np.tanh(c_t)
            gates[t, :hidden] = i
            gates[t, hidden:2 * hidden] = f
            gates[t, 2 * hidden:3 * hidden] = o
            gates[t, 3 * hidden:] = g
            c[t] = c_t
            h[t] = h_t
            h_prev, c_prev = h_t, c_t
    return h, c, gates


def lstm_backward(dh, w_hh, h, c, gates, lengths, reverse=False):
    total, hidden = h.shape
    dx = np.zeros((total, 4 * hidden))
    dw = np.zeros_like(w_hh)
    for steps in _segment_steps(lengths, reverse):
        steps = list(steps)
        dh_next = np.zeros(hidden)
        dc_next = np.zeros(hidden)
        for k in range(len(steps) - 1, -1, -1):
            t = steps[k]
            p = steps[k - 1] if k > 0 else None
            i = gates[t, :hidden]
            f = gates[t, hidden:2 * hidden]
            o = gates[t, 2 * hidden:3 * hidden]
            g = gates[t, 3 * hidden:]
            c_prev = c[p] if p is not None else np.zeros(hidden)
            tc = np.tanh(c[t])
            dh_t = dh[t] + dh_next
            dc = dc_next + dh_t * o * (1.0 - tc * tc)
            dpre = np.concatenate([
                dc * g * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                dh_t * tc * o * (1.0 - o),
                dc * i * (1.0 - g * g),
            ])
            dx[t] = dpre
            if p is not None:
                dw += np.outer(h[p], dpre)
            dh_next = w_hh @ dpre
            dc_next = dc * f
    return dx, dw


def greedy_prune(starts, ends, order, max_keep):
    """Walk ``order`` and keep spans that do not cross any kept span."""
    kept = []
    kept_s = []
    kept_e = []
    for idx in order:
        if len(kept) >= max_keep:
            break
        s = starts[idx]
        e = ends[idx]
        crossing = False
        for ks, ke in zip(kept_s, kept_e):
            if (s < ks <= e < ke) or (ks < s <= ke < e):
                crossing = True
                break
        if not crossing:
            kept.append(int(idx))
            kept_s.append(s)
            kept_e.append(e)
    return np.asarray(kept, dtype=np.int64)
