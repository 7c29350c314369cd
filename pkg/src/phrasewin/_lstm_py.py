"""Pure numpy LSTM recurrence. Same contract as the compiled ``_lstm_ext``.

Gate layout along the 4H axis is ``[input, forget, cell, output]``.
``xproj`` already holds ``x_t @ W.T + b`` for every step, so only the
hidden-to-hidden product remains inside the loop.
"""
import numpy as np


def _sigmoid(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def lstm_forward(xproj, U):
    """Run the recurrence left to right.

    Returns ``(h, c, gates)`` with shapes (T, H), (T, H), (T, 4H); ``gates``
    holds post-activation values.
    """
    T, H4 = xproj.shape
    H = H4 // 4
    h = np.zeros((T, H))
    c = np.zeros((T, H))
    gates = np.empty((T, H4))
    h_prev = np.zeros(H)
    c_prev = np.zeros(H)
    for t in range(T):
        z = xproj[t] + U @ h_prev
        i = _sigmoid(z[:H])
        f = _sigmoid(z[H : 2 * H])
        g = np.tanh(z[2 * H : 3 * H])
        o = _sigmoid(z[3 * H :])
        c_prev = f * c_prev + i * g
        h_prev = o * np.tanh(c_prev)
        gates[t, :H] = i
        gates[t, H : 2 * H] = f
        gates[t, 2 * H : 3 * H] = g
        gates[t, 3 * H :] = o
        c[t] = c_prev
        h[t] = h_prev
    return h, c, gates


def lstm_backward(dh, gates, c, U):
    """Backpropagate ``dh`` (T, H) through time; returns pre-activation grads (T, 4H)."""
    T, H = dh.shape
    dz = np.empty((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    zero = np.zeros(H)
    for t in range(T - 1, -1, -1):
        i = gates[t, :H]
        f = gates[t, H : 2 * H]
        g = gates[t, 2 * H : 3 * H]
        o = gates[t, 3 * H :]
        c_prev = c[t - 1] if t > 0 else zero
        tc = np.tanh(c[t])
        dht = dh[t] + dh_next
        dc = dc_next + dht * o * (1.0 - tc * tc)
        dz[t, :H] = dc * g * i * (1.0 - i)
        dz[t, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        dz[t, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        dz[t, 3 * H :] = dht * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = U.T @ dz[t]
    return dz
