"""Hot loops, compiled when the extension is built.

The Cython module is used when importable; otherwise (or when the
environment variable ``TDDLINK_PURE_PYTHON`` is set) the numpy fallback
is selected. ``BACKEND`` names the active implementation.
"""

import os

import numpy as np

from . import _fallback

try:
    if os.environ.get("TDDLINK_PURE_PYTHON"):
        raise ImportError("pure-python backend requested")
    from . import _posterior as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "numpy"


def _impl(backend):
    if backend is None:
        backend = BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return _compiled
    if backend == "numpy":
        return _fallback
    raise ValueError(f"unknown backend {backend!r}")


def posterior_moments(obs, pred, own, interf, noise_var=1.0, backend=None):
    """Importance-weighted posterior moments for a batch of observations.

    For each row ``x`` of ``obs`` the bank samples are weighted by the
    complex Gaussian noise density ``exp(-||x - pred_j||^2 / noise_var)``
    (log-space, max-subtracted) and the weighted means of ``own``,
    ``|own|^2`` and ``interf`` are returned.

    Parameters
    ----------
    obs : (n, tf) complex
    pred : (L, tf) complex
        Noiseless observations predicted for each bank sample.
    own : (L,) complex
    interf : (L,) float
    noise_var : float

    Returns
    -------
    mean, second, interference : arrays of length n

    Raises
    ------
    FloatingPointError
        If the weights of any observation are degenerate.
    """
    obs = np.ascontiguousarray(obs, dtype=np.complex128)
    pred = np.ascontiguousarray(pred, dtype=np.complex128)
    if obs.ndim != 2 or pred.ndim != 2 or obs.shape[1] != pred.shape[1]:
        raise ValueError("obs and pred must be 2-d with matching pilot dimension")
    if pred.shape[0] == 0:
        raise FloatingPointError("empty sample bank")
    own = np.ascontiguousarray(own, dtype=np.complex128)
    interf = np.ascontiguousarray(interf, dtype=np.float64)
    return _impl(backend).posterior_moments(obs, pred, own, interf, float(noise_var))
