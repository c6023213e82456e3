"""Rayleigh block fading, reverse-link pilots and LMMSE channel estimation.

Channel convention: ``H`` is ``K x M`` and row ``k`` is the channel of
user ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig, complex_normal

__all__ = [
    "ChannelEstimate",
    "draw_channel",
    "identity_pilots",
    "dft_pilots",
    "reverse_train",
    "lmmse_estimate",
    "draw_estimate_direct",
]


@dataclass(frozen=True)
class ChannelEstimate:
    H_hat: np.ndarray
    est_var: np.ndarray
    err_var: np.ndarray


def draw_channel(M: int, K: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw a ``K x M`` matrix of i.i.d. CN(0, 1) entries (or a stack of them)."""
    shape = (K, M) if size is None else (size, K, M)
    return complex_normal(rng, shape)


def identity_pilots(tau_r: int, K: int) -> np.ndarray:
    """First ``K`` columns of the ``tau_r x tau_r`` identity."""
    return np.eye(tau_r, K, dtype=complex)


def dft_pilots(tau_r: int, K: int) -> np.ndarray:
    """First ``K`` columns of the unitary DFT matrix of size ``tau_r``."""
    n = np.arange(tau_r)
    F = np.exp(-2j * np.pi * np.outer(n, n) / tau_r) / np.sqrt(tau_r)
    return F[:, :K]


def reverse_train(H, cfg: SystemConfig, rng: np.random.Generator, pilots=None, noise: bool = True):
    """Simulate the ``M x tau_r`` reverse training block received at the base station.

    ``Y = sqrt(tau_r) H^T E_r Psi^H + V``, with ``E_r = diag(sqrt(rho_r))``
    and ``V`` i.i.d. CN(0, 1). ``H`` may carry a leading batch axis.
    """
    Psi = identity_pilots(cfg.tau_r, cfg.K) if pilots is None else pilots
    Er = np.sqrt(cfg.rho_r_arr)
    Y = np.sqrt(cfg.tau_r) * (np.swapaxes(H, -1, -2) * Er) @ Psi.conj().T
    if noise:
        Y = Y + complex_normal(rng, Y.shape)
    return Y


def lmmse_estimate(Y, cfg: SystemConfig, pilots=None) -> ChannelEstimate:
    """LMMSE (= conditional mean) estimate of ``H`` from the training block ``Y``."""
    Psi = identity_pilots(cfg.tau_r, cfg.K) if pilots is None else pilots
    x = cfg.rho_r_arr * cfg.tau_r
    scale = np.sqrt(x) / (1.0 + x)
    H_hat = scale[:, None] * (Psi.T @ np.swapaxes(Y, -1, -2))
    return ChannelEstimate(H_hat, cfg.est_var, cfg.err_var)


def draw_estimate_direct(cfg: SystemConfig, rng: np.random.Generator, size: int | None = None):
    """Draw ``(H, estimate)`` from the joint law of channel and LMMSE estimate.

    Uses the independence of estimate and error; distributionally equal to
    ``draw_channel -> reverse_train -> lmmse_estimate`` but much cheaper.
    With ``size`` the matrices carry a leading batch axis.
    """
    shape = (cfg.K, cfg.M) if size is None else (size, cfg.K, cfg.M)
    est_var, err_var = cfg.est_var, cfg.err_var
    H_hat = complex_normal(rng, shape, est_var[:, None])
    H = H_hat + complex_normal(rng, shape, err_var[:, None])
    return H, ChannelEstimate(H_hat, est_var, err_var)
