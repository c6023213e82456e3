"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (the lines are
collected in the terminal summary) or ``python tests/test_acceptance.py``.
"""

import sys
import time

import numpy as np
import pytest

from tddlink.config import RngStream, SystemConfig, complex_normal, db_to_linear
from tddlink.estimation import draw_channel, lmmse_estimate, reverse_train, draw_estimate_direct
from tddlink.experiments import heterogeneous_preset, reproduce_table1, training_sweep
from tddlink.gzf import (
    asymptotic_coefficients,
    batch_gzf,
    build_gzf,
    large_m_chi,
    objective_j,
    optimize_precoder_params,
)
from tddlink.pilots import build_pilot_pattern, conditional_mean_mc, posterior_gain_stats
from tddlink.rates import estimate_chi_stats
from tddlink.schemes import (
    KINDS,
    MonteCarloSettings,
    Scheme,
    evaluate_scheme,
    optimize_training_length,
    scheme_upper_bound,
)

pytestmark = pytest.mark.acceptance


def test_table_spot_checks(criterion):
    targets = [("ZF-FP(0)", 20, 8.54), ("ZF-Sch-FP(0)", 10, 7.32), ("ZF-Sch-FP(1)", 25, 19.64),
               ("Mod-SVH-FP(1)", 20, 16.92), ("Mod-SVH-UB", 30, 35.06)]
    ok, parts = True, []
    for label, snr, target in targets:
        start = time.perf_counter()
        (row,) = reproduce_table1(seed=0, snrs_db=(snr,), rows=[label])
        elapsed = time.perf_counter() - start
        good = abs(row.net_rate / target - 1) <= 0.15 and elapsed < 300
        ok &= good
        parts.append(f"{label}@{snr}dB {row.net_rate:.2f} vs {target} ({elapsed:.0f}s)")
    assert criterion(1, "comparison-grid spot checks within 15%", ok, "; ".join(parts))


def test_crossover(criterion):
    rows = reproduce_table1(seed=0, snrs_db=(5, 30), rows=["ZF-Sch-FP(0)", "ZF-Sch-FP(1)"])
    net = {(r.scheme, r.sweep_value): r.net_rate for r in rows}
    low = net[("ZF-Sch-FP(0)", 5)] > net[("ZF-Sch-FP(1)", 5)]
    high = net[("ZF-Sch-FP(1)", 30)] > net[("ZF-Sch-FP(0)", 30)]
    detail = (f"5 dB: FP0 {net[('ZF-Sch-FP(0)', 5)]:.2f} vs FP1 {net[('ZF-Sch-FP(1)', 5)]:.2f}; "
              f"30 dB: FP1 {net[('ZF-Sch-FP(1)', 30)]:.2f} vs FP0 {net[('ZF-Sch-FP(0)', 30)]:.2f}")
    assert criterion(2, "forward-pilot crossover sign", low and high, detail)


def test_training_length_limits(criterion):
    cfg = SystemConfig(M=32, K=8, T=30, tau_r=8)
    snrs = (-20, -10, 0, 10, 20, 30, 40)  # reverse link 10 dB lower
    rows = training_sweep(cfg, Scheme("zf-sch"), snrs, seed=0)
    taus = [r.tau_r for r in rows]
    low = all(t in (14, 15) for snr, t in zip(snrs, taus) if snr - 10 <= -20)
    high = all(t == 8 for snr, t in zip(snrs, taus) if snr - 10 >= 20)
    monotone = all(a >= b for a, b in zip(taus, taus[1:]))
    detail = ", ".join(f"{snr - 10:+d}dB->{t}" for snr, t in zip(snrs, taus))
    assert criterion(3, "optimal reverse training length limits", low and high and monotone, detail)


def _grid_oracle(cfg, rounds=4, points=201):
    """Brute-force max of J on {p >= 0, a.p = 1}, zooming the grid around the best point."""
    coeffs = asymptotic_coefficients(cfg)
    a, b, w = coeffs.a, coeffs.b, cfg.w_arr
    K = cfg.K
    lo, hi = np.zeros(K - 1), np.ones(K - 1)
    best_val = -np.inf
    for _ in range(rounds):
        axes = [np.linspace(l, h, points) for l, h in zip(lo, hi)]
        U = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, K - 1)
        U = U[U.sum(axis=1) <= 1]
        shares = np.column_stack([U, 1 - U.sum(axis=1)])  # shares of a.p = 1
        J = np.sum(w * np.log2(1 + b * shares / a), axis=1)
        i = np.argmax(J)
        best_val = max(best_val, J[i])
        width = (hi - lo) / 10
        lo = np.clip(U[i] - width, 0, 1)
        hi = np.clip(U[i] + width, 0, 1)
    return best_val


def test_kkt_grid_oracle(criterion):
    rng = np.random.default_rng(2)
    worst = 0.0
    for K in (2, 3):
        for _ in range(50):
            rho_f = db_to_linear(rng.uniform(-5, 25, K))
            cfg = SystemConfig(M=int(rng.integers(K, 65)), K=K, T=30, tau_r=int(rng.integers(K, 12)),
                               rho_f=rho_f, rho_r=rho_f / 10, w=rng.uniform(0.5, 3.0, K))
            p, _ = optimize_precoder_params(cfg)
            gap = abs(objective_j(p, asymptotic_coefficients(cfg), cfg.w_arr) - _grid_oracle(cfg))
            worst = max(worst, gap)
    assert criterion(4, "water-filling parameters match grid search", worst < 1e-3,
                     f"largest objective gap {worst:.2e} over 100 instances")


def test_precoder_identities(criterion):
    rng = np.random.default_rng(5)
    worst_trace, worst_zf = 0.0, 0.0
    for _ in range(1000):
        N = int(rng.integers(1, 9))
        H = complex_normal(rng, (N, N + int(rng.integers(0, 9))))
        p = rng.uniform(0.05, 5.0, N)
        pre = build_gzf(H, p)
        worst_trace = max(worst_trace, abs(np.trace(pre.A.conj().T @ pre.A).real - 1))
        H_ds = H / np.sqrt(p)[:, None]
        worst_zf = max(worst_zf, np.max(np.abs(H_ds @ pre.A - pre.chi * np.eye(N))))
    ok = worst_trace < 1e-9 and worst_zf < 1e-9
    assert criterion(5, "precoder normalization and zero-forcing identities", ok,
                     f"max trace error {worst_trace:.1e}, max ZF error {worst_zf:.1e}")


def test_estimation_statistics(criterion):
    rng = np.random.default_rng(6)
    cfg = SystemConfig(M=2, K=2, T=12, tau_r=3, rho_f=1.0, rho_r=[0.3, 4.0])
    n = 100_000
    H = draw_channel(cfg.M, cfg.K, rng, size=n)
    H_hat = lmmse_estimate(reverse_train(H, cfg, rng), cfg).H_hat
    ok, parts = True, []
    for k in range(cfg.K):
        a, e = H_hat[:, k, 0], H[:, k, 0] - H_hat[:, k, 0]
        va, ve = np.mean(np.abs(a) ** 2), np.mean(np.abs(e) ** 2)
        corr = np.abs(np.vdot(a, e)) / np.sqrt(np.vdot(a, a).real * np.vdot(e, e).real)
        ok &= abs(va / cfg.est_var[k] - 1) < 0.02 and abs(ve / cfg.err_var[k] - 1) < 0.02
        ok &= corr < 3 / np.sqrt(n)
        parts.append(f"user {k}: var {va:.4f}/{cfg.est_var[k]:.4f}, err {ve:.4f}/{cfg.err_var[k]:.4f}, "
                     f"|corr| {corr:.1e}")
    assert criterion(6, "estimate and error statistics", ok, "; ".join(parts))


def test_large_array_chi(criterion):
    cfg = SystemConfig(M=256, K=4, T=30, tau_r=4, rho_f=1.0, rho_r=1.0)
    stats = estimate_chi_stats(cfg, "all", np.ones(4), None, 10_000, np.random.default_rng(7))
    approx = large_m_chi(np.ones(4), 1 / cfg.est_var, cfg.M)
    err = abs(stats.mean / approx - 1)
    assert criterion(7, "large-array gain approximation", err < 0.02,
                     f"E[chi] {stats.mean:.4f} vs {approx:.4f} ({100 * err:.2f}%)")


def test_posterior_oracles(criterion):
    # scalar Gaussian: E[X | X + Z = 1] = 1/2; RMS relative error over independent 10^4-sample runs
    errors = []
    for seed in range(40):
        x = np.random.default_rng(seed).standard_normal(10_000)
        errors.append(conditional_mean_mc(x, x, 1.0, noise="real") / 0.5 - 1)
    rms = float(np.sqrt(np.mean(np.square(errors))))

    # law of total variance for the estimate-conditioned posterior of one user's gain
    rng = np.random.default_rng(8)
    rho, err_var = 10.0, 0.3
    H_hat = np.sqrt(1 - err_var) * complex_normal(rng, (2, 4))
    A = build_gzf(H_hat, np.ones(2)).A
    pattern = build_pilot_pattern(1, 2)
    means, variances = [], []
    for _ in range(4000):
        H = H_hat + complex_normal(rng, H_hat.shape, err_var)
        x = np.sqrt(rho) * (H @ A) @ pattern.Q + complex_normal(rng, (2, 1))
        s = posterior_gain_stats(H_hat, err_var, rho, A, pattern, x, 2000, rng)
        means.append(s.mean_gain[0])
        variances.append(s.var_gain[0])
    total = np.mean(variances) + np.var(means)
    exact = rho * err_var * np.sum(np.abs(A[:, 0]) ** 2)
    tv_err = abs(total / exact - 1)
    ok = rms < 0.02 and tv_err < 0.03
    assert criterion(8, "posterior estimator oracles", ok,
                     f"Gaussian RMS error {100 * rms:.2f}%, total-variance error {100 * tv_err:.2f}%")


def _dominance_scenario(seed):
    rng = np.random.default_rng(1000 + seed)
    M = int(rng.choice([4, 6, 8]))
    K = int(rng.integers(2, M + 1))
    rho_f = db_to_linear(rng.uniform(0, 25, K))
    return SystemConfig(M=M, K=K, T=20, tau_r=K, rho_f=rho_f, rho_r=rho_f / 10)


def test_bound_dominance(criterion):
    settings = MonteCarloSettings(trials=4000, outer_trials=200, L_post=1000)
    violations, checks, closest = [], 0, np.inf
    for seed in range(20):
        cfg = _dominance_scenario(seed)
        N = max(1, cfg.K // 2)
        for kind in KINDS:
            for fp in (0, 1):
                scheme = Scheme(kind, fp)
                n_sel = N if scheme.scheduled else None
                stream = RngStream(seed, (KINDS.index(kind), fp))
                report = evaluate_scheme(cfg, scheme, stream, n_sel, settings, upper_bound=True)
                bound = report.upper_bound
                if bound is None:  # closed-form kinds without pilots evaluate the bound separately
                    bound, _ = scheme_upper_bound(cfg, scheme, n_sel, settings, stream.child(1))
                checks += 1
                closest = min(closest, bound - report.net)
                if report.net > bound:
                    violations.append(f"{scheme.label} seed {seed}")
    detail = f"{checks} checks, {len(violations)} violations, smallest margin {closest:.3f}"
    if violations:
        detail += " (" + ", ".join(violations[:5]) + ")"
    assert criterion(9, "genie bound dominates achievable rates", not violations, detail)


def test_effective_noise_uncorrelated(criterion):
    """Received signal = mean gain x symbol + effective noise; noise and symbol are uncorrelated."""
    cfg = SystemConfig(M=8, K=4, T=30, tau_r=4, rho_f=db_to_linear([5, 8, 10, 12]),
                       rho_r=db_to_linear([-5, -2, 0, 2]))
    p, _ = optimize_precoder_params(cfg)
    assert np.all(p > 0)  # every user served, so the full estimate is zero-forced
    n = 100_000
    gen = np.random.default_rng(10)
    _, ref = draw_estimate_direct(cfg, gen, size=n)
    _, chi_ref = batch_gzf(ref.H_hat, np.broadcast_to(p, (n, cfg.K)))
    mean_chi = chi_ref.mean()  # independent draws fix E[chi]
    H, est = draw_estimate_direct(cfg, gen, size=n)
    A, _ = batch_gzf(est.H_hat, np.broadcast_to(p, (n, cfg.K)))
    s = complex_normal(gen, (n, cfg.K, 1))
    z = complex_normal(gen, (n, cfg.K))
    y = np.sqrt(cfg.rho_f_arr) * (H @ A @ s)[..., 0] + z
    noise = y - np.sqrt(cfg.rho_f_arr * p) * mean_chi * s[..., 0]
    corr = [abs(np.vdot(s[:, k, 0], noise[:, k])) /
            np.sqrt(np.vdot(s[:, k, 0], s[:, k, 0]).real * np.vdot(noise[:, k], noise[:, k]).real)
            for k in range(cfg.K)]
    limit = 3 / np.sqrt(n)
    assert criterion(10, "effective noise uncorrelated with the symbol", max(corr) < limit,
                     f"max |corr| {max(corr):.1e} < {limit:.1e}")


def test_heterogeneous_ordering(criterion):
    ok, parts = True, []
    for M in (16, 32):
        cfg = heterogeneous_preset(M)
        res = {}
        for kind in ("zf", "gzf-opt", "gzf-sch"):
            _, report = optimize_training_length(cfg, Scheme(kind), RngStream(4, (M,)))
            res[kind] = report
        hw = max(r.half_width for r in res.values())
        ok &= res["gzf-sch"].net >= res["gzf-opt"].net - hw
        ok &= res["gzf-opt"].net >= res["zf"].net - hw
        parts.append(f"M={M}: " + " >= ".join(f"{res[k].net:.3f}" for k in ("gzf-sch", "gzf-opt", "zf"))
                     + f" (half-width {hw:.3f})")
    assert criterion(11, "heterogeneous scheme ordering", ok, "; ".join(parts))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
