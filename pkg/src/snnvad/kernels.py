"""Backend selection for the LIF layer kernels.

The compiled extension is used when importable; set ``SNNVAD_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py

READOUT, HARD, SMOOTH = _kernels_py.READOUT, _kernels_py.HARD, _kernels_py.SMOOTH

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("SNNVAD_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass


def available_backends():
    backends = {"python": _kernels_py}
    try:
        from . import _kernels

        backends["cython"] = _kernels
    except ImportError:
        pass
    return backends


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _spikes(a):
    """Binary rasters stay uint8 (8x less memory traffic); anything else becomes float64."""
    a = np.asarray(a)
    if a.dtype == np.uint8 or a.dtype == np.bool_:
        return np.ascontiguousarray(a, dtype=np.uint8)
    return _f64(a)


def layer_forward(x, W, alpha, beta, theta, lam, mode, reset=None, record_current=True, impl=None):
    impl = impl or _impl
    return impl.layer_forward(_spikes(x), _f64(W), float(alpha), float(beta), float(theta),
                              float(lam), int(mode), None if reset is None else _f64(reset),
                              bool(record_current))


def layer_backward(x, W, V, g_ext, alpha, beta, theta, lam, mode, reset_coeff=0.0,
                   need_gx=True, impl=None):
    impl = impl or _impl
    return impl.layer_backward(_spikes(x), _f64(W), _f64(V), _f64(g_ext), float(alpha), float(beta),
                               float(theta), float(lam), int(mode), float(reset_coeff), bool(need_gx))
