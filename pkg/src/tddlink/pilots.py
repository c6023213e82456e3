"""Forward (downlink) pilots and posterior statistics of effective gains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import SystemConfig, complex_normal

__all__ = [
    "DegeneratePosteriorError",
    "PilotPattern",
    "PosteriorGainStats",
    "build_pilot_pattern",
    "receive_pilots",
    "conditional_mean_mc",
    "posterior_gain_stats",
    "GainBank",
]


class DegeneratePosteriorError(FloatingPointError):
    """All importance weights vanished; more samples are needed."""


@dataclass(frozen=True)
class PilotPattern:
    tau_f: int
    q_vectors: np.ndarray  # (tau_f, N)

    @property
    def Q(self) -> np.ndarray:
        """``N x tau_f`` matrix whose columns are the pilot symbol vectors."""
        return self.q_vectors.T


@dataclass(frozen=True)
class PosteriorGainStats:
    mean_gain: np.ndarray
    var_gain: np.ndarray
    interference: np.ndarray

    def sinr(self) -> np.ndarray:
        return np.abs(self.mean_gain) ** 2 / (1.0 + self.interference + self.var_gain)


def build_pilot_pattern(tau_f: int, N: int) -> PilotPattern:
    """Pilot vectors: all-ones for one pilot, scaled residue-class indicators otherwise.

    Pilot ``t`` is ``sqrt(tau_f)`` times the indicator of the columns
    ``n`` with ``n mod tau_f == t``.
    """
    if tau_f < 0:
        raise ValueError("tau_f must be non-negative")
    cols = np.arange(N)
    q = np.array([(cols % tau_f == t) for t in range(tau_f)], dtype=float).reshape(tau_f, N)
    return PilotPattern(tau_f, np.sqrt(tau_f) * q if tau_f > 1 else q)


def receive_pilots(H, A, pattern: PilotPattern, cfg: SystemConfig, rng: np.random.Generator,
                   users=None, noise: bool = True) -> np.ndarray:
    """Pilot observations ``x_k = sqrt(rho_f_k) h_k^T A q_t + z`` for the given users.

    ``H`` rows are indexed by ``users`` (default: all rows). Returns a
    ``(len(users), tau_f)`` complex array.
    """
    users = np.arange(H.shape[0]) if users is None else np.asarray(users)
    G = np.sqrt(cfg.rho_f_arr[users])[:, None] * (H[users] @ A)
    x = G @ pattern.Q
    if noise:
        x = x + complex_normal(rng, x.shape)
    return x


def conditional_mean_mc(values, predicted, observed, noise_var: float = 1.0, noise: str = "complex"):
    """Weighted-sample estimate of ``E[value | observation]`` under additive noise.

    Each sample is weighted by the noise density at ``observed - predicted``;
    weights are formed in log space with the maximum subtracted.

    Parameters
    ----------
    values : (L, ...) array
        Quantity whose conditional mean is wanted, one entry per sample.
    predicted : (L,) or (L, d) array
        Noiseless observation implied by each sample.
    observed : scalar or (d,) array
    noise_var : float
        Per-component noise variance.
    noise : {"complex", "real"}
        Circular complex Gaussian or real Gaussian noise density.
    """
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    values = np.asarray(values)
    predicted = np.asarray(predicted)
    if predicted.ndim == 1:
        predicted = predicted[:, None]
    if len(values) < 1 or len(values) != len(predicted):
        raise ValueError("need at least one sample and matching lengths")
    scale = 1.0 / noise_var if noise == "complex" else 0.5 / noise_var
    with np.errstate(over="ignore", invalid="ignore"):
        dist = np.sum(np.abs(np.atleast_1d(observed)[None, :] - predicted) ** 2, axis=1)
        log_w = -dist * scale
        w = np.exp(log_w - np.max(log_w))
        total = w.sum()
    if not np.isfinite(total) or total <= 0:
        raise DegeneratePosteriorError("all importance weights underflowed")
    return np.tensordot(w, values, axes=(0, 0)) / total


def _split_gains(G_rows, own_col):
    """Own gain and interference power of effective-channel rows."""
    idx = np.arange(len(G_rows))
    own = G_rows[idx, own_col]
    interf = np.sum(np.abs(G_rows) ** 2, axis=1) - np.abs(own) ** 2
    return own, np.maximum(interf, 0.0)


def _moments(obs, pred, own, interf, noise_var=1.0) -> PosteriorGainStats:
    try:
        mean, second, inter = kernels.posterior_moments(obs, pred, own, interf, noise_var)
    except FloatingPointError as exc:
        raise DegeneratePosteriorError(str(exc)) from exc
    return PosteriorGainStats(mean, np.maximum(second - np.abs(mean) ** 2, 0.0), inter)


def posterior_gain_stats(H_hat_S, err_var_S, rho_f_S, A, pattern: PilotPattern, x_p,
                         L_post: int, rng: np.random.Generator) -> PosteriorGainStats:
    """Posterior gain statistics of each served user given ``H_hat`` and its pilots.

    Only each user's own estimation-error row is treated as unknown: for
    user ``n`` (column ``n`` of ``A``) ``L_post`` error rows are drawn,
    the effective gains ``sqrt(rho_f) (h_hat + h_err)^T A`` and their
    noiseless pilot observations formed, and the conditional moments
    obtained by importance weighting against ``x_p[n]``.
    """
    H_hat_S = np.atleast_2d(H_hat_S)
    N, M = H_hat_S.shape
    err_var_S = np.broadcast_to(np.asarray(err_var_S, dtype=float), (N,))
    rho_f_S = np.broadcast_to(np.asarray(rho_f_S, dtype=float), (N,))
    x_p = np.asarray(x_p).reshape(N, pattern.tau_f)
    mean, var, inter = (np.empty(N, dtype=complex), np.empty(N), np.empty(N))
    for n in range(N):
        h = H_hat_S[n][None, :] + complex_normal(rng, (L_post, M), err_var_S[n])
        G_rows = np.sqrt(rho_f_S[n]) * (h @ A)
        own, interf = _split_gains(G_rows, np.full(L_post, n))
        stats = _moments(x_p[n][None, :], G_rows @ pattern.Q, own, interf)
        mean[n], var[n], inter[n] = stats.mean_gain[0], stats.var_gain[0], stats.interference[0]
    return PosteriorGainStats(mean, var, inter)


class GainBank:
    """Samples from the joint law of (effective-gain row, pilot observation).

    Each stored sample is one served user's row of ``G = E_f H A`` drawn
    from the full channel/estimate/precoder pipeline; a user's
    conditional moments given its pilots are importance-weighted averages
    over the bank. With ``pooled=True`` samples of all users are shared
    (valid when users are statistically exchangeable).
    """

    def __init__(self, user, own, interf, pred, pooled: bool):
        self.user = np.asarray(user)
        self.own = np.asarray(own)
        self.interf = np.asarray(interf)
        self.pred = np.asarray(pred)
        self.pooled = pooled

    @classmethod
    def from_effective(cls, G_list, sel_list, pattern_fn, pooled: bool) -> "GainBank":
        users, owns, interfs, preds = [], [], [], []
        for G, sel in zip(G_list, sel_list):
            N = len(sel)
            own, interf = _split_gains(G, np.arange(N))
            users.append(sel)
            owns.append(own)
            interfs.append(interf)
            preds.append(G @ pattern_fn(N).Q)
        return cls(np.concatenate(users), np.concatenate(owns), np.concatenate(interfs),
                   np.concatenate(preds), pooled)

    def __len__(self):
        return len(self.own)

    def stats(self, users, obs) -> PosteriorGainStats:
        """Posterior moments for observations ``obs`` (rows) of ``users``."""
        users = np.asarray(users)
        obs = np.asarray(obs).reshape(len(users), self.pred.shape[1])
        if self.pooled:
            return _moments(obs, self.pred, self.own, self.interf)
        mean, var, inter = np.empty(len(users), dtype=complex), np.empty(len(users)), np.empty(len(users))
        for k in np.unique(users):
            rows = users == k
            mask = self.user == k
            if not mask.any():
                raise DegeneratePosteriorError(f"no bank samples for user {k}")
            s = _moments(obs[rows], self.pred[mask], self.own[mask], self.interf[mask])
            mean[rows], var[rows], inter[rows] = s.mean_gain, s.var_gain, s.interference
        return PosteriorGainStats(mean, var, inter)
