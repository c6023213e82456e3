"""Scenario runner: sweeps, the reference comparison grid and CSV output."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .config import ConfigError, RngStream, SystemConfig, db_to_linear, validate_config
from .schemes import MonteCarloSettings, Scheme, evaluate_scheme, optimize_training_length

__all__ = [
    "ScenarioSpec",
    "ResultRow",
    "SWEEP_AXES",
    "TABLE1_ROWS",
    "TABLE1_SNRS_DB",
    "heterogeneous_preset",
    "table1_config",
    "run_scenario",
    "reproduce_table1",
    "training_sweep",
    "write_csv",
    "read_csv",
]

log = logging.getLogger(__name__)

SWEEP_AXES = ("snr_f_db", "K", "M", "tau_r")

# (label, scheme, is_bound) in display order
TABLE1_ROWS = [
    ("ZF-FP(0)", "zf:fp0", False),
    ("ZF-UB", "zf:fp0", True),
    ("ZF-Sch-FP(0)", "zf-sch:fp0", False),
    ("ZF-Sch-FP(1)", "zf-sch:fp1", False),
    ("ZF-Sch-FP(2)", "zf-sch:fp2", False),
    ("ZF-Sch-UB", "zf-sch:fp0", True),
    ("SVH-FP(1)", "svh:fp1", False),
    ("SVH-FP(2)", "svh:fp2", False),
    ("SVH-UB", "svh:fp1", True),
    ("Mod-SVH-FP(1)", "mod-svh:fp1", False),
    ("Mod-SVH-FP(2)", "mod-svh:fp2", False),
    ("Mod-SVH-UB", "mod-svh:fp1", True),
]
TABLE1_SNRS_DB = (5, 10, 15, 20, 25, 30)


@dataclass(frozen=True)
class ScenarioSpec:
    cfg: SystemConfig
    scheme: Scheme
    sweep_axis: str | None = None
    sweep_values: tuple = ()
    seed: int = 0
    settings: MonteCarloSettings = MonteCarloSettings()
    upper_bound: bool = False
    optimize_tau_r: bool = False
    reverse_offset_db: float | None = None  # for snr_f_db sweeps: reverse = forward - offset

    def __post_init__(self):
        if self.sweep_axis is not None and self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {self.sweep_axis!r}; choose from {SWEEP_AXES}")
        validate_config(self.cfg.replace(tau_f=self.scheme.fp))
        for value in self.sweep_values:
            self.point_config(value)

    def point_config(self, value) -> SystemConfig:
        cfg = self.cfg
        if self.sweep_axis == "snr_f_db":
            rho_f = db_to_linear(float(value))
            if self.reverse_offset_db is not None:
                rho_r = rho_f * db_to_linear(-self.reverse_offset_db)
            else:
                # keep the configured forward/reverse ratio per user
                rho_r = cfg.rho_r_arr / cfg.rho_f_arr * rho_f
            cfg = cfg.replace(rho_f=rho_f, rho_r=rho_r)
        elif self.sweep_axis == "K":
            K = int(value)
            if not cfg.is_homogeneous:
                raise ConfigError("K sweeps need homogeneous SNRs and weights")
            # minimum training length tau_r = K at every point
            cfg = cfg.replace(K=K, rho_f=cfg.rho_f[0], rho_r=cfg.rho_r[0], w=cfg.w[0], tau_r=K)
        elif self.sweep_axis == "M":
            cfg = cfg.replace(M=int(value))
        elif self.sweep_axis == "tau_r":
            cfg = cfg.replace(tau_r=int(value))
        return validate_config(cfg.replace(tau_f=self.scheme.fp))

    @property
    def points(self) -> tuple:
        return tuple(self.sweep_values) if self.sweep_axis else (None,)


@dataclass
class ResultRow:
    scheme: str
    sweep_value: float | str
    net_rate: float
    weighted_sum_rate: float
    upper_bound: float | None
    tau_r: int
    N: int
    seed: int
    trials: int
    half_width: float


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return str(value)


def _run_point(spec: ScenarioSpec, index: int) -> ResultRow:
    value = spec.points[index]
    cfg = spec.point_config(value) if spec.sweep_axis else spec.cfg.replace(tau_f=spec.scheme.fp)
    stream = RngStream(spec.seed, (index,))
    if spec.optimize_tau_r:
        tau, report = optimize_training_length(cfg, spec.scheme, stream, spec.settings, spec.upper_bound)
    else:
        report = evaluate_scheme(cfg, spec.scheme, stream, None, spec.settings, spec.upper_bound)
        tau = cfg.tau_r
    trials = spec.settings.trials if spec.scheme.closed_form else spec.settings.outer_trials
    return ResultRow(spec.scheme.label, "" if value is None else value, report.net, report.weighted_sum,
                     report.upper_bound, tau, report.N_used, spec.seed, trials, report.half_width)


def run_scenario(spec: ScenarioSpec, threads: int = 1) -> list[ResultRow]:
    """Evaluate the scheme at every sweep point (or once without a sweep).

    Every point draws from its own substream, so results do not depend on
    ``threads``.
    """
    indices = range(len(spec.points))
    if threads > 1 and len(spec.points) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_run_point, [spec] * len(spec.points), indices))
    rows = []
    for i in indices:
        try:
            rows.append(_run_point(spec, i))
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            raise RuntimeError(f"{spec.scheme.label} at {spec.sweep_axis}={spec.points[i]}: {exc}") from exc
        log.info("%s %s -> net %.4f", spec.scheme.label, spec.points[i], rows[-1].net_rate)
    return rows


def table1_config(snr_f_db: float) -> SystemConfig:
    """8 antennas, 8 users, 8 reverse pilots, T = 30, reverse SNR 10 dB below forward."""
    rho_f = db_to_linear(snr_f_db)
    return SystemConfig(M=8, K=8, T=30, tau_r=8, rho_f=rho_f, rho_r=rho_f / 10.0)


def _table1_cell(args) -> ResultRow:
    label, scheme_text, is_bound, snr, seed, settings = args
    scheme = Scheme.parse(scheme_text)
    cfg = table1_config(snr).replace(tau_f=scheme.fp)
    # substream keyed by (row, SNR in centi-dB, shifted to stay non-negative)
    row = [r[0] for r in TABLE1_ROWS].index(label)
    stream = RngStream(seed, (row, int(round((snr + 1000.0) * 100))))
    report = evaluate_scheme(cfg, scheme, stream, None, settings, upper_bound=is_bound)
    if is_bound:
        value, gross, hw = (report.upper_bound, report.extra["upper_bound_gross"],
                            report.extra["upper_bound_half_width"])
        n_used = report.extra.get("upper_bound_N", report.N_used)
    else:
        value, gross, hw, n_used = report.net, report.weighted_sum, report.half_width, report.N_used
    trials = settings.trials if scheme.closed_form and not is_bound else settings.outer_trials
    return ResultRow(label, snr, value, gross, report.upper_bound, cfg.tau_r, n_used, seed, trials, hw)


def reproduce_table1(seed: int = 0, settings: MonteCarloSettings = MonteCarloSettings(),
                     snrs_db=TABLE1_SNRS_DB, rows=None, threads: int = 1) -> list[ResultRow]:
    """Evaluate the comparison grid (twelve scheme rows by forward SNR).

    ``rows`` restricts the grid to the given labels.
    """
    labels = [r[0] for r in TABLE1_ROWS] if rows is None else list(rows)
    jobs = [(label, scheme, is_bound, snr, seed, settings)
            for label, scheme, is_bound in TABLE1_ROWS if label in labels
            for snr in snrs_db]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_table1_cell, jobs))
    return [_table1_cell(job) for job in jobs]


def training_sweep(cfg: SystemConfig, scheme: Scheme, snrs_db, seed: int = 0,
                   reverse_offset_db: float = 10.0,
                   settings: MonteCarloSettings = MonteCarloSettings(), threads: int = 1) -> list[ResultRow]:
    """Optimal reverse training length and net rate per forward SNR."""
    spec = ScenarioSpec(cfg, scheme, "snr_f_db", tuple(snrs_db), seed, settings,
                        optimize_tau_r=True, reverse_offset_db=reverse_offset_db)
    return run_scenario(spec, threads)


def heterogeneous_preset(M: int = 16, T: int = 30) -> SystemConfig:
    """Twelve users at 0/5/10 dB forward SNR (3/6/3 users), reverse 10 dB lower, unit weights."""
    snr_db = np.array([0, 0, 0, 5, 5, 5, 5, 5, 5, 10, 10, 10], dtype=float)
    rho_f = db_to_linear(snr_db)
    return SystemConfig(M=M, K=12, T=T, tau_r=12, rho_f=rho_f, rho_r=rho_f / 10.0)


CSV_COLUMNS = [f.name for f in fields(ResultRow)]


def write_csv(rows, path) -> None:
    """Write rows (header first, 6 significant digits) to a path or open text file."""
    if hasattr(path, "write"):
        _write_rows(rows, path)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(rows, fh)


def _write_rows(rows, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])


def read_csv(path) -> list[ResultRow]:
    def num(text, cast=float):
        return None if text == "" else cast(text)

    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            try:
                sweep = float(rec["sweep_value"])
            except ValueError:
                sweep = rec["sweep_value"]
            rows.append(ResultRow(rec["scheme"], sweep, num(rec["net_rate"]), num(rec["weighted_sum_rate"]),
                                  num(rec["upper_bound"]), int(rec["tau_r"]), int(rec["N"]), int(rec["seed"]),
                                  int(rec["trials"]), num(rec["half_width"])))
    return rows
