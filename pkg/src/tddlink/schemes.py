"""Transmission schemes: precoder construction, evaluation and parameter search.

Scheme kinds
------------
zf        zero-forcing, all users (Scheme-0)
gzf-opt   generalized ZF with water-filled parameters, all users (Scheme-1)
gzf-sch   gzf-opt plus weighted-norm user selection (Scheme-2)
zf-sch    zero-forcing plus top-norm user selection
svh       fixed-point sum-rate precoder treating the estimate as exact
mod-svh   fixed-point precoder averaged over sampled estimation errors

Any kind takes a forward-pilot count ``fp``; ``fp=0`` means reverse
pilots only.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import RngStream, SystemConfig, complex_normal
from .gzf import batch_gzf, optimize_precoder_params
from .estimation import draw_estimate_direct
from .rates import (
    ChiStats,
    EtaStats,
    RateReport,
    _genie_terms,
    effective_channels,
    half_width,
    net_rate,
    overhead_factor,
    rate_forward_pilots,
    rate_homogeneous,
    rate_reverse_only,
    sample_chi,
    sample_eta,
)
from .selection import select_by_score, selection_scores
from .svh import mod_svh_precoder, svh_precoder

__all__ = [
    "KINDS",
    "Scheme",
    "MonteCarloSettings",
    "make_precoder",
    "evaluate_scheme",
    "scheme_upper_bound",
    "optimize_selection_size",
    "optimize_training_length",
]

KINDS = ("zf", "gzf-opt", "gzf-sch", "zf-sch", "svh", "mod-svh")
_LABELS = {"zf": "ZF", "gzf-opt": "GZF-Opt", "gzf-sch": "GZF-Sch", "zf-sch": "ZF-Sch",
           "svh": "SVH", "mod-svh": "Mod-SVH"}


@dataclass(frozen=True)
class Scheme:
    kind: str
    fp: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scheme {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.fp < 0:
            raise ValueError("forward pilot count must be >= 0")

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        """Parse ``"<kind>"``, ``"<kind>:fp<n>"`` or ``"<kind>:fp:<n>"``."""
        m = re.fullmatch(r"([a-z-]+)(?::fp:?(\d+))?", text.strip().lower())
        if not m:
            raise ValueError(f"cannot parse scheme {text!r}")
        return cls(m.group(1), int(m.group(2) or 0))

    @property
    def scheduled(self) -> bool:
        return self.kind in ("gzf-sch", "zf-sch")

    @property
    def uses_params(self) -> bool:
        return self.kind in ("gzf-opt", "gzf-sch")

    @property
    def closed_form(self) -> bool:
        """Reverse-only zero-forcing schemes are evaluated from chi statistics."""
        return self.fp == 0 and self.kind in ("zf", "gzf-opt", "gzf-sch", "zf-sch")

    @property
    def label(self) -> str:
        return f"{_LABELS[self.kind]}-FP({self.fp})"

    @property
    def bound_label(self) -> str:
        return f"{_LABELS[self.kind]}-UB"

    def __str__(self):
        return f"{self.kind}:fp{self.fp}"


@dataclass(frozen=True)
class MonteCarloSettings:
    trials: int = 10_000  # chi / eta / gamma statistics
    outer_trials: int = 500  # forward-pilot and bound evaluation
    L_post: int = 2000  # posterior bank draws
    svh_L: int = 50
    svh_iterations: int = 5
    batches: int = 20
    posterior: str = "joint"


def _params(cfg: SystemConfig, scheme: Scheme) -> np.ndarray:
    if scheme.uses_params:
        return optimize_precoder_params(cfg)[0]
    return np.ones(cfg.K)


def max_selection(cfg: SystemConfig, scheme: Scheme) -> int:
    n = int(np.count_nonzero(_params(cfg, scheme) > 0))
    if scheme.kind in ("zf", "gzf-opt", "gzf-sch", "zf-sch"):
        n = min(n, cfg.M)
    return n


def make_precoder(cfg: SystemConfig, scheme: Scheme, N: int | None = None,
                  settings: MonteCarloSettings = MonteCarloSettings()):
    """Batch precoder ``fn(H_hat (B,K,M), gen) -> (A (B,M,N), sel (B,N))``."""
    p = _params(cfg, scheme)
    positive = np.flatnonzero(p > 0)
    rho_f = cfg.rho_f_arr

    if scheme.kind in ("zf", "gzf-opt"):
        def fn(H_hat, gen):
            sel = np.broadcast_to(positive, (len(H_hat), len(positive)))
            A, _ = batch_gzf(np.take_along_axis(H_hat, sel[..., None], axis=1), p[sel])
            return A, sel
    elif scheme.scheduled:
        rule = "weighted-norm" if scheme.kind == "gzf-sch" else "top-norm"
        if N is None:
            raise ValueError("scheduled schemes need N")

        def fn(H_hat, gen):
            sel = select_by_score(selection_scores(H_hat, rule, cfg, p), N)
            A, _ = batch_gzf(np.take_along_axis(H_hat, sel[..., None], axis=1), p[sel])
            return A, sel
    else:
        err_eff = rho_f * cfg.err_var
        scale = np.sqrt(rho_f)[:, None]

        def fn(H_hat, gen):
            out = np.empty((len(H_hat), cfg.M, cfg.K), dtype=complex)
            for b, Hh in enumerate(H_hat):
                if scheme.kind == "svh":
                    res = svh_precoder(scale * Hh, settings.svh_iterations)
                else:
                    res = mod_svh_precoder(scale * Hh, err_eff, settings.svh_L, settings.svh_iterations, gen)
                out[b] = res.normalized
            return out, np.broadcast_to(np.arange(cfg.K), (len(H_hat), cfg.K))
    return fn


# -- reverse-only evaluation ---------------------------------------------------

@lru_cache(maxsize=256)
def _eta_batches(M, K, N, trials, batches, stream: RngStream):
    eta = sample_eta(M, K, N, trials, stream.generator())
    return np.array_split(eta, batches)


@lru_cache(maxsize=2)
def _unit_bank(M, K, trials, stream: RngStream):
    bank = complex_normal(stream.generator(), (trials, K, M))
    bank.flags.writeable = False
    return bank


def _closed_form(cfg: SystemConfig, scheme: Scheme, N: int, settings: MonteCarloSettings, stream: RngStream):
    """Reverse-only rate with a batch-means half-width."""
    if scheme.kind == "zf-sch" and cfg.is_homogeneous and cfg.w[0] == 1.0:
        parts = _eta_batches(cfg.M, cfg.K, N, settings.trials, settings.batches, stream)
        eta = np.concatenate(parts)
        full = rate_homogeneous(cfg, N, EtaStats(eta.mean(), eta.var(), cfg.M, cfg.K, N, eta.size))
        nets = [rate_homogeneous(cfg, N, EtaStats(e.mean(), e.var(), cfg.M, cfg.K, N)).net for e in parts]
    else:
        p = _params(cfg, scheme)
        rule = {"zf": "all", "gzf-opt": "all", "gzf-sch": "weighted-norm", "zf-sch": "top-norm"}[scheme.kind]
        chi, sel = sample_chi(cfg, rule, p, N, settings.trials, None,
                              unit_bank=_unit_bank(cfg.M, cfg.K, settings.trials, stream))
        n_sel = sel.shape[1]

        def report(c, s):
            gamma = np.bincount(s.ravel(), minlength=cfg.K) / len(s)
            return rate_reverse_only(cfg, p, ChiStats(c.mean(), c.var(), len(c)), gamma,
                                     N=n_sel if scheme.scheduled else cfg.K)

        full = report(chi, sel)
        nets = [report(c, s).net for c, s in zip(np.array_split(chi, settings.batches),
                                                   np.array_split(sel, settings.batches))]
    full.scheme = scheme.label
    full.half_width = half_width(nets)
    return full


def _genie_draws(cfg, scheme, N, settings, stream):
    """Per-draw genie weighted-sum rates and the number of served users."""
    fn = make_precoder(cfg, scheme, N, settings)
    gen = stream.generator()
    vals = []
    done = 0
    while done < settings.outer_trials:
        n = min(512, settings.outer_trials - done)
        H, est = draw_estimate_direct(cfg, gen, size=n)
        A, sel = fn(est.H_hat, gen)
        G = effective_channels(H, A, sel, cfg.rho_f_arr)
        vals.append((cfg.w_arr[sel] * _genie_terms(G)).sum(axis=1))
        done += n
    return np.concatenate(vals), (sel.shape[1] if scheme.scheduled else cfg.K)


def scheme_upper_bound(cfg: SystemConfig, scheme: Scheme, N: int | None, settings: MonteCarloSettings,
                       stream: RngStream) -> tuple[float, float]:
    """Genie bound on the net rate of ``scheme`` and its half-width.

    The scheme's precoder (built from the estimate) is applied to the true
    channel; overhead counts reverse pilots and computation only.
    """
    return _bound_summary(cfg, *_genie_draws(cfg, scheme, N, settings, stream))[:2]


def _bound_summary(cfg, vals, n_sel):
    """Net bound, its half-width and the gross bound from per-draw genie rates."""
    cfg0 = cfg.replace(tau_f=0)
    gross = float(vals.mean())
    hw = overhead_factor(cfg0) * half_width(vals)
    return net_rate(cfg0, gross, N=n_sel), hw, gross


def _evaluate_fixed(cfg, scheme, N, settings, stream, upper_bound):
    if scheme.closed_form:
        report = _closed_form(cfg, scheme, N, settings, stream.child(0))
        if upper_bound:
            bound, hw, gross = _bound_summary(cfg, *_genie_draws(cfg, scheme, N, settings, stream.child(1)))
            report.upper_bound = bound
            report.extra.update(upper_bound_half_width=hw, upper_bound_gross=gross)
        return report
    fn = make_precoder(cfg, scheme, N, settings)
    report = rate_forward_pilots(cfg, fn, scheme.fp, settings.outer_trials, settings.L_post,
                                 stream.child(2), scheduled=scheme.scheduled,
                                 posterior=settings.posterior, scheme=scheme.label)
    if not upper_bound:
        report.upper_bound = None
    return report


def evaluate_scheme(cfg: SystemConfig, scheme: Scheme, stream: RngStream, N: int | None = None,
                    settings: MonteCarloSettings = MonteCarloSettings(),
                    upper_bound: bool = False) -> RateReport:
    """Net rate of ``scheme`` at ``cfg``; scheduled schemes optimize ``N`` when not given."""
    cfg = cfg.replace(tau_f=scheme.fp)
    if scheme.scheduled and N is None:
        return optimize_selection_size(cfg, scheme, stream, settings, upper_bound)[1]
    return _evaluate_fixed(cfg, scheme, N, settings, stream, upper_bound)


def optimize_selection_size(cfg: SystemConfig, scheme: Scheme, stream: RngStream,
                            settings: MonteCarloSettings = MonteCarloSettings(),
                            upper_bound: bool = False) -> tuple[int, RateReport]:
    """Brute-force search over ``N``; ties go to the largest ``N``.

    Every candidate reuses the same random stream. When ``upper_bound`` is
    set the reported bound is the largest bound over all candidates.
    """
    cfg = cfg.replace(tau_f=scheme.fp)
    if not scheme.scheduled:
        report = _evaluate_fixed(cfg, scheme, None, settings, stream, upper_bound)
        return report.N_used, report
    best_N, best, bound = None, None, None
    sweep = {}
    for N in range(1, max_selection(cfg, scheme) + 1):
        report = _evaluate_fixed(cfg, scheme, N, settings, stream, upper_bound)
        sweep[N] = report.net
        if best is None or report.net >= best.net:
            best_N, best = N, report
        if upper_bound and (bound is None or report.upper_bound > bound.upper_bound):
            bound = report
    if bound is not None:
        best.upper_bound = bound.upper_bound
        best.extra.update(upper_bound_N=bound.N_used, **{k: bound.extra[k] for k in
                                                           ("upper_bound_half_width", "upper_bound_gross")})
    best.extra["N_sweep"] = sweep
    return best_N, best


def optimize_training_length(cfg: SystemConfig, scheme: Scheme, stream: RngStream,
                             settings: MonteCarloSettings = MonteCarloSettings(),
                             upper_bound: bool = False) -> tuple[int, RateReport]:
    """Brute-force search over ``tau_r`` in ``[K, T-1-tau_f-comp_delay]``; ties go to the smallest."""
    tau_f = scheme.fp
    hi = cfg.T - 1 - tau_f - cfg.comp_delay
    if hi < cfg.K:
        raise ValueError("no feasible reverse training length")
    best_tau, best = None, None
    sweep = {}
    for tau in range(cfg.K, hi + 1):
        report = evaluate_scheme(cfg.replace(tau_r=tau, tau_f=tau_f), scheme, stream, None, settings, upper_bound)
        sweep[tau] = report.net
        if best is None or report.net > best.net:
            best_tau, best = tau, report
    best.extra["tau_sweep"] = sweep
    return best_tau, best
