"""Pure numpy implementation of the per-layer LIF kernels.

Same signatures and semantics as the compiled ``_kernels`` module; used when
the extension is not built or ``SNNVAD_PURE_PYTHON=1`` is set.

Arrays are batch-major: inputs ``x`` are ``(B, T, n_pre)`` uint8 or float64, weights
``(n_pre, n_post)``. Modes: 0 readout (never spikes), 1 Heaviside spikes,
2 smoothed fast-sigmoid activation (gradient checks only).
"""
import numpy as np

READOUT = 0
HARD = 1
SMOOTH = 2


def layer_forward(x, W, alpha, beta, theta, lam, mode, reset=None, record_current=True):
    """Simulate one layer over all time steps.

    Per step: S(t) from V(t), V(t+1) = alpha V(t) + I(t) - R(t),
    I(t+1) = beta I(t) + x(t) W, with R = S unless ``reset`` is given.
    Returns ``(V, I, S)`` holding the pre-update states at each step; I is
    ``None`` when ``record_current`` is false. S is uint8 except in smoothed
    mode, where it is float64.
    """
    B, T, _ = x.shape
    n = W.shape[1]
    V = np.empty((B, T, n))
    I = np.empty((B, T, n)) if record_current else None
    S = np.zeros((B, T, n), dtype=np.float64 if mode == SMOOTH else np.uint8)
    v = np.zeros((B, n))
    i = np.zeros((B, n))
    for t in range(T):
        V[:, t] = v
        if record_current:
            I[:, t] = i
        if mode == HARD:
            S[:, t] = v >= theta
        elif mode == SMOOTH:
            d = v - theta
            S[:, t] = d / (1.0 + lam * np.abs(d))
        r = S[:, t] if reset is None else reset[:, t]
        v = alpha * v + i - r
        i = beta * i + x[:, t] @ W
    return V, I, S


def layer_backward(x, W, V, g_ext, alpha, beta, theta, lam, mode, reset_coeff=0.0, need_gx=True):
    """Reverse-time adjoint of :func:`layer_forward`.

    ``g_ext`` is dL/dV(t) for a readout layer and dL/dS(t) (through the next
    layer only) for a spiking layer. dS/dV is replaced by the fast-sigmoid
    derivative. The reset path contributes only when ``reset_coeff`` is nonzero.

    Returns ``(dW, gx)`` with dW summed over the batch and gx = dL/dx(t)
    (``None`` when ``need_gx`` is false).
    """
    B, T, n_pre = x.shape
    n = W.shape[1]
    gv = np.zeros((B, n))
    gi = np.zeros((B, n))
    gi_next = np.empty((B, T, n))
    for t in range(T - 1, -1, -1):
        gi_next[:, t] = gi
        if mode == READOUT:
            gv_t = g_ext[:, t] + alpha * gv
        else:
            sg = 1.0 / (1.0 + lam * np.abs(V[:, t] - theta)) ** 2
            if reset_coeff:
                gv_t = alpha * gv + sg * (g_ext[:, t] - reset_coeff * gv)
            else:
                gv_t = alpha * gv + sg * g_ext[:, t]
        gi = gv + beta * gi
        gv = gv_t
    dW = x.reshape(B * T, n_pre).T @ gi_next.reshape(B * T, n)
    gx = gi_next @ W.T if need_gx else None
    return dW, gx
