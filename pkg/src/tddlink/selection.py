"""Opportunistic user selection rules and selection-probability estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .estimation import draw_estimate_direct

__all__ = [
    "SelectionStats",
    "select_top_norm",
    "select_weighted_norm",
    "selection_scores",
    "select_by_score",
    "estimate_selection_probabilities",
]


@dataclass(frozen=True)
class SelectionStats:
    gamma: np.ndarray
    trials: int


def select_by_score(scores: np.ndarray, N: int) -> np.ndarray:
    """Indices of the ``N`` largest scores along the last axis.

    Works on a single score vector or a batch. Ties go to the lowest index.
    """
    if N < 1 or N > scores.shape[-1]:
        raise ValueError(f"N must be in 1..{scores.shape[-1]}, got {N}")
    # stable sort of -score keeps index order among ties
    return np.argsort(-scores, axis=-1, kind="stable")[..., :N]


def selection_scores(H_hat: np.ndarray, rule: str, cfg: SystemConfig | None = None, p_bar=None) -> np.ndarray:
    """Ranking score of every user (batched over leading axes of ``H_hat``)."""
    gains = np.sum(np.abs(H_hat) ** 2, axis=-1)
    if rule == "top-norm":
        return gains
    if rule == "weighted-norm":
        if cfg is None or p_bar is None:
            raise ValueError("weighted-norm selection needs cfg and p_bar")
        p_bar = np.asarray(p_bar, dtype=float)
        z_gain = gains / cfg.est_var
        score = p_bar * z_gain
        # zero-parameter users rank after every positive-parameter user
        return np.where(p_bar > 0, score, -1.0 - 1.0 / (1.0 + z_gain))
    raise ValueError(f"unknown selection rule {rule!r}")


def select_top_norm(H_hat, N: int) -> np.ndarray:
    """The ``N`` users with the largest estimated channel gain ``||h_k||^2``."""
    return select_by_score(selection_scores(np.asarray(H_hat), "top-norm"), N)


def select_weighted_norm(H_hat, p_bar_star, cfg: SystemConfig, N: int) -> np.ndarray:
    """Order users by ``p_bar_k ||z_k||^2`` (whitened estimate rows) and keep ``N``."""
    return select_by_score(selection_scores(np.asarray(H_hat), "weighted-norm", cfg, p_bar_star), N)


def estimate_selection_probabilities(rule: str, cfg: SystemConfig, N: int, trials: int,
                                     rng: np.random.Generator, p_bar=None,
                                     chunk: int = 4096) -> SelectionStats:
    """Monte Carlo estimate of the per-user selection probabilities."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    counts = np.zeros(cfg.K)
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        _, est = draw_estimate_direct(cfg, rng, size=n)
        sel = select_by_score(selection_scores(est.H_hat, rule, cfg, p_bar), N)
        counts += np.bincount(sel.ravel(), minlength=cfg.K)
        done += n
    return SelectionStats(counts / trials, trials)
