"""Pure-numpy implementation of the posterior kernel."""

import numpy as np

_BLOCK = 1 << 21


def posterior_moments(obs, pred, own, interf, noise_var):
    n, L = obs.shape[0], pred.shape[0]
    mean = np.empty(n, dtype=complex)
    second = np.empty(n)
    inter = np.empty(n)
    own_pow = np.abs(own) ** 2
    step = max(1, _BLOCK // max(L * max(pred.shape[1], 1), 1))
    for start in range(0, n, step):
        sl = slice(start, start + step)
        diff = obs[sl, None, :] - pred[None, :, :]
        lw = -np.sum(diff.real ** 2 + diff.imag ** 2, axis=-1) / noise_var
        w = np.exp(lw - lw.max(axis=1, keepdims=True))
        wsum = w.sum(axis=1)
        if not np.all(np.isfinite(wsum)) or np.any(wsum <= 0):
            raise FloatingPointError("posterior weights degenerate")
        mean[sl] = (w @ own) / wsum
        second[sl] = (w @ own_pow) / wsum
        inter[sl] = (w @ interf) / wsum
    return mean, second, inter
