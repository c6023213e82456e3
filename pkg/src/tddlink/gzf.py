"""Generalized zero-forcing precoding and its large-array parameter optimization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig

__all__ = [
    "SingularChannelError",
    "GzfPrecoder",
    "AsymptoticCoefficients",
    "compute_chi",
    "build_gzf",
    "asymptotic_coefficients",
    "large_m_chi",
    "objective_j",
    "optimize_precoder_params",
]

GRAM_COND_LIMIT = 1e12


class SingularChannelError(np.linalg.LinAlgError):
    """The scaled channel estimate does not have full row rank."""


@dataclass(frozen=True)
class GzfPrecoder:
    A: np.ndarray
    chi: float
    selection: np.ndarray


@dataclass(frozen=True)
class AsymptoticCoefficients:
    a: np.ndarray
    b: np.ndarray


def _gram_inverse(H_ds: np.ndarray) -> np.ndarray:
    gram = H_ds @ H_ds.conj().T
    if np.linalg.cond(gram) > GRAM_COND_LIMIT:
        raise SingularChannelError("Gram matrix of the scaled estimate is (numerically) singular")
    return np.linalg.inv(gram)


def compute_chi(H_ds) -> float:
    """Common effective gain ``Tr[(H H^H)^-1]^(-1/2)`` of the scaled estimate."""
    H_ds = np.atleast_2d(np.asarray(H_ds, dtype=complex))
    return float(np.trace(_gram_inverse(H_ds)).real ** -0.5)


def build_gzf(H_hat_S, p_S, selection=None) -> GzfPrecoder:
    """Build the trace-normalized generalized ZF precoder for the selected rows.

    Parameters
    ----------
    H_hat_S : (N, M) complex array
        Estimated channel rows of the selected users, in column order.
    p_S : (N,) array
        Strictly positive precoder parameters of those users.
    selection : sequence of int, optional
        User indices to record on the result (defaults to ``0..N-1``).

    Returns
    -------
    GzfPrecoder
        ``A`` is ``M x N`` with ``Tr(A^H A) = 1`` and
        ``D_S H_hat_S A = chi * I``.
    """
    H_hat_S = np.atleast_2d(np.asarray(H_hat_S, dtype=complex))
    p_S = np.atleast_1d(np.asarray(p_S, dtype=float))
    if H_hat_S.shape[0] > H_hat_S.shape[1]:
        raise SingularChannelError(f"cannot zero-force {H_hat_S.shape[0]} users with {H_hat_S.shape[1]} antennas")
    if np.any(p_S <= 0):
        raise ValueError("precoder parameters of selected users must be strictly positive")
    H_ds = H_hat_S / np.sqrt(p_S)[:, None]
    inv = _gram_inverse(H_ds)
    trace = np.trace(inv).real
    A = H_ds.conj().T @ inv / np.sqrt(trace)
    sel = np.arange(len(p_S)) if selection is None else np.asarray(selection)
    return GzfPrecoder(A, float(trace ** -0.5), sel)


def batch_gzf(H_S: np.ndarray, p_S: np.ndarray):
    """Vectorized :func:`build_gzf` over a leading batch axis.

    No rank check is performed; returns ``(A, chi)`` with shapes
    ``(B, M, N)`` and ``(B,)``.
    """
    H_ds = H_S / np.sqrt(p_S)[..., :, None]
    inv = np.linalg.inv(H_ds @ np.conj(np.swapaxes(H_ds, -1, -2)))
    trace = np.trace(inv, axis1=-2, axis2=-1).real
    A = np.conj(np.swapaxes(H_ds, -1, -2)) @ inv / np.sqrt(trace)[:, None, None]
    return A, trace ** -0.5


def asymptotic_coefficients(cfg: SystemConfig) -> AsymptoticCoefficients:
    x = cfg.rho_r_arr * cfg.tau_r
    a = (1.0 + x) / x
    b = cfg.M * cfg.rho_f_arr / (1.0 + cfg.rho_f_arr / (1.0 + x))
    return AsymptoticCoefficients(a, b)


def large_m_chi(p, a, M: int) -> float:
    """Large-array approximation ``sqrt(M / sum_j a_j p_j)`` of chi."""
    s = float(np.dot(a, p))
    if s <= 0:
        raise ValueError("sum of a_j p_j must be positive")
    return float(np.sqrt(M / s))


def objective_j(p, coeffs: AsymptoticCoefficients, w) -> float:
    """Asymptotic weighted-sum rate ``J(p)``; invariant to scaling of ``p``."""
    p = np.asarray(p, dtype=float)
    return float(np.sum(np.asarray(w) * np.log2(1.0 + coeffs.b * p / np.dot(coeffs.a, p))))


def _water_level(inv_nu, w, a, b):
    return np.maximum(0.0, w * inv_nu / a - 1.0 / b)


def optimize_precoder_params(cfg: SystemConfig, tol: float = 1e-10, max_iter: int = 200):
    """Water-filling solution maximizing ``J(p)`` over all users.

    Returns ``(p_bar, nu_star)`` where ``p_bar`` is the maximizer scaled so
    that ``sum_i a_i p_bar_i = 1``. The constraint sum is increasing in
    ``1/nu``, so ``1/nu`` is bracketed by doubling and then bisected.
    """
    coeffs = asymptotic_coefficients(cfg)
    a, b, w = coeffs.a, coeffs.b, cfg.w_arr

    def residual(inv_nu):
        return float(np.dot(a, _water_level(inv_nu, w, a, b))) - 1.0

    # the constraint sum is zero at 1/nu = min(a / (w b)); start there
    lo = float(np.min(a / (w * b)))
    hi = 2.0 * lo
    while residual(hi) < 0:
        lo, hi = hi, 2.0 * hi
    inv_nu = hi
    for _ in range(max_iter):
        inv_nu = 0.5 * (lo + hi)
        r = residual(inv_nu)
        if abs(r) < tol:
            break
        if r < 0:
            lo = inv_nu
        else:
            hi = inv_nu
    p_bar = _water_level(inv_nu, w, a, b)
    # remove the residual bisection error from the normalization
    p_bar = p_bar / np.dot(a, p_bar)
    return p_bar, 1.0 / inv_nu
