# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled importance-weighted posterior moments."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, INFINITY, isfinite

cnp.import_array()


def posterior_moments(const double complex[:, ::1] obs,
                      const double complex[:, ::1] pred,
                      const double complex[::1] own,
                      const double[::1] interf,
                      double noise_var):
    cdef Py_ssize_t n = obs.shape[0], L = pred.shape[0], tf = pred.shape[1]
    cdef Py_ssize_t i, j, t
    cdef double lw, lw_max, wt, wsum, dr, di, second, inter
    cdef double complex mean, d
    cdef double inv_var = 1.0 / noise_var
    cdef double[::1] buf = np.empty(L, dtype=np.float64)

    out_mean = np.empty(n, dtype=np.complex128)
    out_second = np.empty(n, dtype=np.float64)
    out_interf = np.empty(n, dtype=np.float64)
    cdef double complex[::1] m_view = out_mean
    cdef double[::1] s_view = out_second
    cdef double[::1] i_view = out_interf
    cdef bint bad = False

    with nogil:
        for i in range(n):
            lw_max = -INFINITY
            for j in range(L):
                lw = 0.0
                for t in range(tf):
                    d = obs[i, t] - pred[j, t]
                    dr = d.real
                    di = d.imag
                    lw -= (dr * dr + di * di) * inv_var
                buf[j] = lw
                if lw > lw_max:
                    lw_max = lw
            wsum = 0.0
            mean = 0.0
            second = 0.0
            inter = 0.0
            for j in range(L):
                wt = exp(buf[j] - lw_max)
                wsum += wt
                mean += wt * own[j]
                second += wt * (own[j].real * own[j].real + own[j].imag * own[j].imag)
                inter += wt * interf[j]
            if not isfinite(wsum) or wsum <= 0.0:
                bad = True
                break
            m_view[i] = mean / wsum
            s_view[i] = second / wsum
            i_view[i] = inter / wsum
    if bad:
        raise FloatingPointError("posterior weights degenerate")
    return out_mean, out_second, out_interf
