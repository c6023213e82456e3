"""Fixed-point sum-rate precoders (SVH) and the sampled-error variant (Mod-SVH).

All routines work on *effective* channels whose row ``k`` is already
scaled by ``sqrt(rho_f[k])``, so the receiver noise variance is 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import complex_normal

__all__ = [
    "SvhResult",
    "sum_rate",
    "average_rate",
    "svh_precoder",
    "mod_svh_precoder",
    "multi_restart_best",
    "random_init",
]

COND_LIMIT = 1e12


@dataclass
class SvhResult:
    A: np.ndarray
    objective: list = field(default_factory=list)
    residual: float = np.inf

    @property
    def normalized(self) -> np.ndarray:
        """``A`` scaled to ``Tr(A^H A) = 1``."""
        return self.A / np.linalg.norm(self.A)


def sum_rate(H, A, sigma2: float = 1.0):
    """Sum rate ``sum_j log2(1 + |h_j a_j|^2 / (sigma2 Tr(AA^H) + sum_{l!=j} |h_j a_l|^2))``.

    ``H`` may carry leading batch axes; ``A`` is a single ``M x K`` matrix.
    The value does not change when ``A`` is scaled.
    """
    G = H @ A
    power = np.abs(G) ** 2
    signal = np.diagonal(power, axis1=-2, axis2=-1)
    denom = sigma2 * np.sum(np.abs(A) ** 2) + power.sum(axis=-1) - signal
    return np.sum(np.log2(1.0 + signal / denom), axis=-1)


def average_rate(H_samples, A, sigma2: float = 1.0) -> float:
    return float(np.mean(sum_rate(H_samples, A, sigma2)))


def _weights(Hs, A, sigma2):
    """Per-sample ``Delta`` (complex) and ``D`` (real) diagonals at precoder ``A``."""
    G = Hs @ A
    power = np.abs(G) ** 2
    b = np.diagonal(power, axis1=-2, axis2=-1)
    c = sigma2 * np.sum(np.abs(A) ** 2) + power.sum(axis=-1) - b
    delta = np.diagonal(G, axis1=-2, axis2=-1) / c
    d = b / (c * (b + c))
    return delta, d


def _solve(V, T):
    M = V.shape[0]
    if np.linalg.cond(V) > COND_LIMIT:
        V = V + 1e-12 * (np.trace(V).real / M) * np.eye(M)
    return np.linalg.solve(V, T)


def _precoder_from_weights(Hs, delta, d, sigma2):
    # Hs: (L, K, M); delta, d: (L, K)
    M = Hs.shape[-1]
    V = np.einsum("lkm,lk,lkn->mn", Hs.conj(), d, Hs) + sigma2 * d.sum() * np.eye(M)
    T = np.einsum("lkm,lk->mk", Hs.conj(), delta)
    return _solve(V, T)


def _iterate(Hs, sigma2, iterations, delta, d) -> SvhResult:
    result = SvhResult(None)
    A = None
    for _ in range(iterations):
        A = _precoder_from_weights(Hs, delta, d, sigma2)
        result.objective.append(float(np.mean(sum_rate(Hs, A, sigma2))))
        delta, d = _weights(Hs, A, sigma2)
    update = _precoder_from_weights(Hs, delta, d, sigma2)
    result.A = A
    result.residual = float(np.linalg.norm(A - update) / np.linalg.norm(A))
    return result


def random_init(rng: np.random.Generator, L: int, K: int):
    """Random diagonal starting weights: complex ``Delta``, positive ``D``."""
    return complex_normal(rng, (L, K)), rng.exponential(size=(L, K))


def svh_precoder(Heff, iterations: int = 5, sigma2: float = 1.0, init=None) -> SvhResult:
    """Alternate ``A = (sigma2 Tr(D) I + H^H D H)^-1 H^H Delta`` with the weight update.

    ``init`` is an optional ``(delta, d)`` pair of length-K vectors; the
    default starts from ``Delta = D = I``.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    Hs = np.asarray(Heff, dtype=complex)[None]
    K = Hs.shape[1]
    if init is None:
        delta, d = np.ones((1, K), dtype=complex), np.ones((1, K))
    else:
        delta, d = (np.asarray(x)[None] for x in init)
    return _iterate(Hs, sigma2, iterations, delta, d)


def sample_channels(H_hat_eff, err_var_eff, L: int, rng: np.random.Generator):
    """``L`` channel samples ``H_hat + H_err`` with per-row error variances."""
    K, M = H_hat_eff.shape
    return H_hat_eff[None] + complex_normal(rng, (L, K, M), np.asarray(err_var_eff, dtype=float)[:, None])


def mod_svh_precoder(H_hat_eff, err_var_eff, L: int = 50, iterations: int = 5,
                     rng: np.random.Generator | None = None, sigma2: float = 1.0,
                     init=None, samples=None) -> SvhResult:
    """Precoder maximizing the sample-average sum rate over ``L`` error draws.

    ``A = V^-1 T`` with ``V = sum_i (H_i^H D_i H_i + sigma2 Tr(D_i) I)`` and
    ``T = sum_i H_i^H Delta_i``. ``samples`` overrides the internal draw.
    ``init`` is an optional ``(delta, d)`` pair of shape ``(L, K)`` each.
    """
    if iterations < 1 or L < 1:
        raise ValueError("iterations and L must be >= 1")
    H_hat_eff = np.asarray(H_hat_eff, dtype=complex)
    Hs = sample_channels(H_hat_eff, err_var_eff, L, rng) if samples is None else np.asarray(samples)
    L, K = Hs.shape[:2]
    if init is None:
        delta, d = np.ones((L, K), dtype=complex), np.ones((L, K))
    else:
        delta, d = init
    return _iterate(Hs, sigma2, iterations, delta, d)


def multi_restart_best(H_hat_eff, err_var_eff, restarts: int, L: int = 50, iterations: int = 5,
                       rng_stream=None, sigma2: float = 1.0) -> tuple[SvhResult, float]:
    """Best of ``restarts`` Mod-SVH runs, the first from identity weights.

    Every candidate is scored on one common fresh batch of ``L`` error
    samples (independent of the batches used for the iterations). Returns
    the winning result and its score.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    H_hat_eff = np.asarray(H_hat_eff, dtype=complex)
    K = H_hat_eff.shape[0]
    scoring = sample_channels(H_hat_eff, err_var_eff, L, rng_stream.child(0).generator())
    best, best_score = None, -np.inf
    for r in range(restarts):
        gen = rng_stream.child(1, r).generator()
        init = None if r == 0 else random_init(gen, L, K)
        res = mod_svh_precoder(H_hat_eff, err_var_eff, L, iterations, gen, sigma2, init=init)
        score = average_rate(scoring, res.A, sigma2)
        if score > best_score:
            best, best_score = res, score
    return best, best_score
