"""Achievable rates, bounds and the Monte Carlo statistics they need."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig, complex_normal
from .estimation import draw_estimate_direct
from .pilots import DegeneratePosteriorError, GainBank, build_pilot_pattern, posterior_gain_stats
from .selection import select_by_score, selection_scores

__all__ = [
    "ChiStats",
    "EtaStats",
    "RateReport",
    "sample_chi",
    "estimate_chi_stats",
    "sample_eta",
    "estimate_eta_stats",
    "rate_reverse_only",
    "rate_homogeneous",
    "net_rate",
    "overhead_factor",
    "genie_upper_bound",
    "effective_channels",
    "simulate_forward",
    "rate_forward_pilots",
    "half_width",
]

Z95 = 1.959963984540054


@dataclass(frozen=True)
class ChiStats:
    mean: float
    variance: float
    trials: int


@dataclass(frozen=True)
class EtaStats:
    mean: float
    variance: float
    M: int
    K: int
    N: int
    trials: int = 0


@dataclass
class RateReport:
    """Rates of one scheme at one operating point (bits per channel use)."""

    per_user_rate: np.ndarray
    weighted_sum: float
    net: float
    tau_r_used: int
    tau_f_used: int
    N_used: int
    scheme: str = ""
    half_width: float = 0.0
    upper_bound: float | None = None
    extra: dict = field(default_factory=dict)


def half_width(samples) -> float:
    """95% normal half-width of the mean of i.i.d. ``samples``."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        return 0.0
    return float(Z95 * samples.std(ddof=1) / np.sqrt(samples.size))


# -- chi / eta statistics ------------------------------------------------------

def _chi_from_rows(H_S, p_S):
    H_ds = H_S / np.sqrt(p_S)[..., :, None]
    gram = H_ds @ np.conj(np.swapaxes(H_ds, -1, -2))
    trace = np.trace(np.linalg.inv(gram), axis1=-2, axis2=-1).real
    return trace ** -0.5


def _gather_rows(H, sel):
    return np.take_along_axis(H, sel[..., :, None], axis=-2)


def sample_chi(cfg: SystemConfig, rule: str, p, N: int | None, trials: int,
               rng: np.random.Generator | None, chunk: int = 2048, unit_bank=None):
    """Draw ``trials`` samples of chi under a selection rule.

    Parameters
    ----------
    rule : {"all", "top-norm", "weighted-norm"}
        ``"all"`` serves every user with ``p > 0``.
    p : (K,) array
        Precoder parameters (also the weights of the weighted-norm rule).
    N : int or None
        Number of selected users (ignored for ``"all"``).
    unit_bank : (trials, K, M) complex array, optional
        Pre-drawn CN(0, 1) matrices; the estimates are these rows scaled by
        the estimate standard deviation. Lets callers reuse one set of draws
        across training lengths and selection sizes. ``rng`` is then unused.

    Returns
    -------
    chi : (trials,) array
    selections : (trials, N) int array
    """
    p = np.asarray(p, dtype=float)
    positive = np.flatnonzero(p > 0)
    chis, sels = [], []
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        if unit_bank is None:
            H_hat = draw_estimate_direct(cfg, rng, size=n)[1].H_hat
        else:
            H_hat = unit_bank[done:done + n] * np.sqrt(cfg.est_var)[:, None]
        if rule == "all":
            sel = np.broadcast_to(positive, (n, len(positive)))
        else:
            if N > len(positive):
                raise ValueError(f"cannot select {N} users, only {len(positive)} have p > 0")
            sel = select_by_score(selection_scores(H_hat, rule, cfg, p), N)
        chis.append(_chi_from_rows(_gather_rows(H_hat, sel), p[sel]))
        sels.append(np.array(sel))
        done += n
    return np.concatenate(chis), np.concatenate(sels)


def estimate_chi_stats(cfg: SystemConfig, rule: str, p, N: int | None, trials: int,
                       rng: np.random.Generator) -> ChiStats:
    chi, _ = sample_chi(cfg, rule, p, N, trials, rng)
    return ChiStats(float(chi.mean()), float(chi.var()), trials)


def sample_eta(M: int, K: int, N: int, trials: int, rng: np.random.Generator, chunk: int = 2048):
    """Samples of ``Tr[(U U^H)^-1]^(-1/2)`` for the top-``N``-norm rows ``U`` of CN(0,1) draws."""
    if N > K or N > M:
        raise ValueError("need N <= K and N <= M")
    out = []
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        Z = complex_normal(rng, (n, K, M))
        sel = select_by_score(np.sum(np.abs(Z) ** 2, axis=-1), N)
        out.append(_chi_from_rows(_gather_rows(Z, sel), np.ones(N)))
        done += n
    return np.concatenate(out)


def estimate_eta_stats(M: int, K: int, N: int, trials: int, rng: np.random.Generator) -> EtaStats:
    eta = sample_eta(M, K, N, trials, rng)
    return EtaStats(float(eta.mean()), float(eta.var()), M, K, N, trials)


# -- closed-form rate expressions -------------------------------------------------

def overhead_factor(cfg: SystemConfig, tau_r: int | None = None, tau_f: int | None = None) -> float:
    tau_r = cfg.tau_r if tau_r is None else tau_r
    tau_f = cfg.tau_f if tau_f is None else tau_f
    return max(cfg.T - tau_r - tau_f - cfg.comp_delay, 0) / cfg.T


def net_rate(cfg: SystemConfig, R_sigma: float, tau_r: int | None = None,
             tau_f: int | None = None, N: int | None = None) -> float:
    """Net rate after pilot, computation and selection-signalling overheads, floored at 0."""
    N = cfg.K if N is None else N
    penalty = cfg.w_arr.sum() / cfg.T if N < cfg.K else 0.0
    return max(overhead_factor(cfg, tau_r, tau_f) * R_sigma - penalty, 0.0)


def _reverse_only_terms(cfg: SystemConfig, p, chi_mean, chi_var, gamma):
    p = np.asarray(p, dtype=float)
    rho_f = cfg.rho_f_arr
    sinr = rho_f * p * chi_mean ** 2 / (1.0 + rho_f * (cfg.err_var + p * chi_var))
    return np.asarray(gamma) * cfg.w_arr * np.log2(1.0 + sinr)


def rate_reverse_only(cfg: SystemConfig, p, chi: ChiStats, gamma, N: int | None = None,
                      scheme: str = "") -> RateReport:
    """Weighted-sum rate of generalized ZF with reverse pilots only.

    ``sum_k gamma_k w_k log2(1 + rho_k p_k E[chi]^2 / (1 + rho_k (1/(1+rho_r tau) + p_k var chi)))``
    """
    per_user = _reverse_only_terms(cfg, p, chi.mean, chi.variance, gamma)
    total = float(per_user.sum())
    N = cfg.K if N is None else N
    return RateReport(per_user, total, net_rate(cfg, total, N=N), cfg.tau_r, 0, N, scheme)


def rate_homogeneous(cfg: SystemConfig, N: int, eta: EtaStats, scheme: str = "") -> RateReport:
    """Sum rate of top-``N``-norm ZF for statistically identical unit-weight users."""
    if not cfg.is_homogeneous or cfg.w[0] != 1.0:
        raise ValueError("rate_homogeneous needs equal SNRs and unit weights")
    rho_f = cfg.rho_f[0]
    s2, e2 = cfg.est_var[0], cfg.err_var[0]
    sinr = rho_f * s2 * eta.mean ** 2 / (1.0 + rho_f * (e2 + s2 * eta.variance))
    per_user_total = np.log2(1.0 + sinr)
    total = float(N * per_user_total)
    per_user = np.full(cfg.K, total / cfg.K)
    return RateReport(per_user, total, net_rate(cfg, total, N=N), cfg.tau_r, 0, N, scheme)


# -- effective channels and the genie bound ------------------------------------

def effective_channels(H, A, sel, rho_f):
    """``G = E_f H_S A`` for a batch: ``H`` (B, K, M), ``A`` (B, M, N), ``sel`` (B, N)."""
    H_S = _gather_rows(H, sel)
    return np.sqrt(np.asarray(rho_f)[sel])[..., None] * (H_S @ A)


def _genie_terms(G):
    power = np.abs(G) ** 2
    signal = np.diagonal(power, axis1=-2, axis2=-1)
    return np.log2(1.0 + signal / (1.0 + power.sum(axis=-1) - signal))


def genie_upper_bound(H, A, rho_f, w=None):
    """Rate with perfect knowledge of the effective channel at the users.

    ``H`` holds the true channel rows of the served users (column order
    of ``A``); ``rho_f`` and ``w`` are their SNRs and weights. Returns
    ``(per_user, weighted_sum)``.
    """
    H = np.atleast_2d(H)
    rho_f = np.broadcast_to(np.asarray(rho_f, dtype=float), (H.shape[0],))
    w = np.ones(H.shape[0]) if w is None else np.asarray(w, dtype=float)
    per_user = w * _genie_terms(np.sqrt(rho_f)[:, None] * (H @ A))
    return per_user, float(per_user.sum())


# -- forward pilots ---------------------------------------------------------------

@dataclass
class ForwardSimulation:
    """Per-trial outcome of a forward-pilot Monte Carlo run."""

    rates: np.ndarray  # (trials,) weighted rate per coherence interval
    bounds: np.ndarray  # (trials,) genie bound on the same draws
    per_user: np.ndarray  # (K,) average weighted rate per user
    N: int


def _draw_effective(cfg, precoder_fn, n, gen):
    H, est = draw_estimate_direct(cfg, gen, size=n)
    A, sel = precoder_fn(est.H_hat, gen)
    return H, est.H_hat, A, sel, effective_channels(H, A, sel, cfg.rho_f_arr)


def build_gain_bank(cfg, precoder_fn, tau_f: int, draws: int, gen, chunk: int = 512) -> GainBank:
    Gs, sels = [], []
    done = 0
    while done < draws:
        n = min(chunk, draws - done)
        *_, sel, G = _draw_effective(cfg, precoder_fn, n, gen)
        Gs.extend(G)
        sels.extend(sel)
        done += n
    return GainBank.from_effective(Gs, sels, lambda N: build_pilot_pattern(tau_f, N), pooled=cfg.is_homogeneous)


def simulate_forward(cfg: SystemConfig, precoder_fn, tau_f: int, trials_outer: int, L_post: int,
                     rng_stream, posterior: str = "joint", chunk: int = 256,
                     max_retries: int = 3) -> ForwardSimulation:
    """Monte Carlo evaluation of the forward-pilot rate and its genie bound.

    ``precoder_fn(H_hat_batch, gen) -> (A, sel)`` maps a ``(B, K, M)``
    stack of estimates to normalized precoders ``(B, M, N)`` and served
    users ``(B, N)``.

    ``posterior="joint"`` gives each user only the long-term statistics:
    its conditional moments come from a bank of ``L_post`` independent
    pipeline draws. ``posterior="conditional"`` additionally conditions
    on the estimate (only the user's own error row is unknown).
    """
    if trials_outer < 1 or L_post < 1:
        raise ValueError("trials_outer and L_post must be >= 1")
    bank = None
    bank_draws = L_post
    if posterior == "joint":
        for attempt in range(max_retries + 1):
            bank = build_gain_bank(cfg, precoder_fn, tau_f, bank_draws, rng_stream.child(0, attempt).generator())
            if bank.pooled or set(range(cfg.K)) <= set(np.unique(bank.user)):
                break
            bank_draws *= 2
    elif posterior != "conditional":
        raise ValueError(f"unknown posterior mode {posterior!r}")

    gen = rng_stream.child(1).generator()
    w = cfg.w_arr
    rates, bounds = [], []
    per_user = np.zeros(cfg.K)
    N_seen = None
    done = 0
    while done < trials_outer:
        n = min(chunk, trials_outer - done)
        H, H_hat, A, sel, G = _draw_effective(cfg, precoder_fn, n, gen)
        N = sel.shape[1]
        N_seen = N
        pattern = build_pilot_pattern(tau_f, N)
        obs = G @ pattern.Q
        obs = obs + complex_normal(gen, obs.shape)
        for attempt in range(max_retries + 1):
            try:
                if posterior == "joint":
                    stats = bank.stats(sel.ravel(), obs.reshape(n * N, tau_f))
                    sinr = stats.sinr().reshape(n, N)
                else:
                    sinr = np.empty((n, N))
                    for b in range(n):
                        s = posterior_gain_stats(H_hat[b][sel[b]], cfg.err_var[sel[b]], cfg.rho_f_arr[sel[b]],
                                                 A[b], pattern, obs[b], L_post, gen)
                        sinr[b] = s.sinr()
                break
            except DegeneratePosteriorError:
                if attempt == max_retries:
                    raise
                # redraw the pilot noise for this chunk
                obs = G @ pattern.Q + complex_normal(gen, obs.shape)
        user_rates = w[sel] * np.log2(1.0 + sinr)
        rates.append(user_rates.sum(axis=1))
        bounds.append((w[sel] * _genie_terms(G)).sum(axis=1))
        np.add.at(per_user, sel.ravel(), user_rates.ravel())
        done += n
    return ForwardSimulation(np.concatenate(rates), np.concatenate(bounds), per_user / trials_outer, N_seen)


def rate_forward_pilots(cfg: SystemConfig, precoder_fn, tau_f: int, trials_outer: int, L_post: int,
                        rng_stream, scheduled: bool = False, posterior: str = "joint",
                        scheme: str = "") -> RateReport:
    """Forward-pilot weighted-sum rate with posterior effective-gain knowledge.

    Averages ``w_k log2(1 + |E[g_kk|x]|^2 / (1 + sum_i!=k E[|g_ki|^2|x] + var[g_kk|x]))``
    over channel and pilot-noise draws. The genie bound on the same
    draws is stored in ``upper_bound`` (with the reverse-only overhead).
    """
    sim = simulate_forward(cfg, precoder_fn, tau_f, trials_outer, L_post, rng_stream, posterior)
    total = float(sim.rates.mean())
    N = sim.N if scheduled else cfg.K
    cfg_f = cfg.replace(tau_f=tau_f)
    report = RateReport(sim.per_user, total, net_rate(cfg_f, total, N=N), cfg.tau_r, tau_f, sim.N, scheme)
    report.half_width = overhead_factor(cfg_f) * half_width(sim.rates)
    cfg0 = cfg.replace(tau_f=0)
    report.upper_bound = net_rate(cfg0, float(sim.bounds.mean()), N=N)
    report.extra["upper_bound_gross"] = float(sim.bounds.mean())
    report.extra["upper_bound_half_width"] = overhead_factor(cfg0) * half_width(sim.bounds)
    report.extra["trials"] = trials_outer
    return report
