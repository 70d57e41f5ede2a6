# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled LIF layer kernels. Mirrors ``_kernels_py`` exactly in semantics.

Input accumulation is event driven: a presynaptic row of W is only touched
when the corresponding input is nonzero, which makes the sparse TTFS rasters
cheap to integrate. Inputs may be uint8 (binary rasters) or float64.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

READOUT = 0
HARD = 1
SMOOTH = 2

ctypedef fused spike_t:
    unsigned char
    double


def layer_forward(const spike_t[:, :, ::1] x, const double[:, ::1] W,
                  double alpha, double beta, double theta, double lam, int mode,
                  reset=None, bint record_current=True):
    cdef Py_ssize_t B = x.shape[0], T = x.shape[1], n_pre = x.shape[2]
    cdef Py_ssize_t n = W.shape[1]
    if W.shape[0] != n_pre:
        raise ValueError("weight rows do not match input width")
    V_arr = np.empty((B, T, n))
    I_arr = np.empty((B if record_current else 1, T, n))
    # binary spikes are stored as uint8, smoothed activations as float64
    cdef bint smooth = mode == 2
    S_arr = np.zeros((B, T, n), dtype=np.float64 if smooth else np.uint8)
    cdef double[:, :, ::1] V = V_arr
    cdef double[:, :, ::1] I = I_arr
    cdef double[:, :, ::1] Sd
    cdef unsigned char[:, :, ::1] S8
    if smooth:
        Sd = S_arr
    else:
        S8 = S_arr
    cdef const double[:, :, ::1] R
    cdef bint frozen = reset is not None
    if frozen:
        R = np.ascontiguousarray(reset, dtype=np.float64)
        if R.shape[0] != B or R.shape[1] != T or R.shape[2] != n:
            raise ValueError("reset sequence has the wrong shape")
    cdef double[::1] v = np.zeros(n)
    cdef double[::1] i = np.zeros(n)
    cdef double[::1] acc = np.zeros(n)
    cdef Py_ssize_t b, t, j, k
    cdef double s, d, xv
    with nogil:
        for b in range(B):
            for j in range(n):
                v[j] = 0.0
                i[j] = 0.0
            for t in range(T):
                if mode == 0:
                    for j in range(n):
                        V[b, t, j] = v[j]
                        if record_current:
                            I[b, t, j] = i[j]
                        v[j] = alpha * v[j] + i[j]
                else:
                    for j in range(n):
                        V[b, t, j] = v[j]
                        if record_current:
                            I[b, t, j] = i[j]
                        if smooth:
                            d = v[j] - theta
                            s = d / (1.0 + lam * fabs(d))
                            Sd[b, t, j] = s
                        elif v[j] >= theta:
                            s = 1.0
                            S8[b, t, j] = 1
                        else:
                            s = 0.0
                        if frozen:
                            s = R[b, t, j]
                        v[j] = alpha * v[j] + i[j] - s
                for j in range(n):
                    acc[j] = 0.0
                for k in range(n_pre):
                    if x[b, t, k] != 0:
                        xv = <double>x[b, t, k]
                        for j in range(n):
                            acc[j] += xv * W[k, j]
                for j in range(n):
                    i[j] = beta * i[j] + acc[j]
    return V_arr, (I_arr if record_current else None), S_arr


def layer_backward(const spike_t[:, :, ::1] x, const double[:, ::1] W,
                   const double[:, :, ::1] V, const double[:, :, ::1] g_ext,
                   double alpha, double beta, double theta, double lam, int mode,
                   double reset_coeff=0.0, bint need_gx=True):
    cdef Py_ssize_t B = x.shape[0], T = x.shape[1], n_pre = x.shape[2]
    cdef Py_ssize_t n = W.shape[1]
    dW_arr = np.zeros((n_pre, n))
    cdef double[:, ::1] dW = dW_arr
    gx_arr = np.empty((B, T, n_pre)) if need_gx else None
    cdef double[:, :, ::1] gx
    if need_gx:
        gx = gx_arr
    cdef double[::1] gv = np.zeros(n)
    cdef double[::1] gi = np.zeros(n)
    cdef double gv_t, sg, d, xv, acc
    cdef Py_ssize_t b, t, j, k
    with nogil:
        for b in range(B):
            for j in range(n):
                gv[j] = 0.0
                gi[j] = 0.0
            for t in range(T - 1, -1, -1):
                # gi holds dL/dI(t+1) here
                for k in range(n_pre):
                    if x[b, t, k] != 0:
                        xv = <double>x[b, t, k]
                        for j in range(n):
                            dW[k, j] += xv * gi[j]
                if need_gx:
                    for k in range(n_pre):
                        acc = 0.0
                        for j in range(n):
                            acc = acc + W[k, j] * gi[j]
                        gx[b, t, k] = acc
                for j in range(n):
                    if mode == 0:
                        gv_t = g_ext[b, t, j] + alpha * gv[j]
                    else:
                        d = fabs(V[b, t, j] - theta)
                        sg = 1.0 / ((1.0 + lam * d) * (1.0 + lam * d))
                        if reset_coeff != 0.0:
                            gv_t = alpha * gv[j] + sg * (g_ext[b, t, j] - reset_coeff * gv[j])
                        else:
                            gv_t = alpha * gv[j] + sg * g_ext[b, t, j]
                    gi[j] = gv[j] + beta * gi[j]
                    gv[j] = gv_t
    return dW_arr, gx_arr
