"""Command-line front end.

Scheme identifiers are ``<kind>[:fp<n>]`` with kind one of zf, gzf-opt,
gzf-sch, zf-sch, svh, mod-svh.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import ConfigError, SystemConfig, db_to_linear, load_scenario_file
from .experiments import (
    SWEEP_AXES,
    TABLE1_ROWS,
    TABLE1_SNRS_DB,
    ScenarioSpec,
    reproduce_table1,
    run_scenario,
    training_sweep,
    write_csv,
)
from .schemes import MonteCarloSettings, Scheme

TABLE1_HELP = "comparison grid rows and their pipelines:\n" + "\n".join(
    f"  {label:<14} {scheme:<12} {'genie bound of that precoder' if bound else 'achievable net rate'}"
    for label, scheme, bound in TABLE1_ROWS
)


def _settings(args, base: MonteCarloSettings | None = None) -> MonteCarloSettings:
    s = base or MonteCarloSettings()
    changes = {}
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.outer_trials is not None:
        changes["outer_trials"] = args.outer_trials
    if args.l_post is not None:
        changes["L_post"] = args.l_post
    return dataclasses.replace(s, **changes)


def _emit(rows, out):
    write_csv(rows, out or sys.stdout)


def _spec_from_file(args, force_sweep: bool) -> ScenarioSpec:
    cfg, extra = load_scenario_file(args.config)
    scheme = Scheme.parse(args.scheme or extra.get("scheme", "zf"))
    sweep = extra.get("sweep") or {}
    axis = args.axis or (next(iter(sweep)) if sweep else None)
    values = args.values or (sweep.get(axis) if axis else None)
    if force_sweep and not (axis and values):
        raise ConfigError("sweep needs an axis and values (config 'sweep:' entry or --axis/--values)")
    settings = MonteCarloSettings(**{k: extra[k] for k in ("trials", "outer_trials", "L_post") if k in extra})
    seed = args.seed if args.seed is not None else int(extra.get("seed", 0))
    offset = extra.get("reverse_offset_db")
    return ScenarioSpec(cfg, scheme, axis if values else None, tuple(values or ()), seed,
                        _settings(args, settings),
                        upper_bound=args.upper_bound or bool(extra.get("upper_bound", False)),
                        optimize_tau_r=bool(extra.get("optimize_tau_r", False)),
                        reverse_offset_db=None if offset is None else float(offset))


def cmd_run(args):
    _emit(run_scenario(_spec_from_file(args, force_sweep=False), args.threads), args.out)


def cmd_sweep(args):
    _emit(run_scenario(_spec_from_file(args, force_sweep=True), args.threads), args.out)


def cmd_table1(args):
    rows = reproduce_table1(args.seed or 0, _settings(args), tuple(args.snr or TABLE1_SNRS_DB),
                            args.rows, args.threads)
    _emit(rows, args.out)


def cmd_training_sweep(args):
    if args.config:
        cfg, _ = load_scenario_file(args.config)
    else:
        cfg = SystemConfig(M=32, K=8, T=30, tau_r=8, rho_f=1.0, rho_r=db_to_linear(-10))
    snrs = args.snr or [-10, -5, 0, 5, 10, 15, 20, 25, 30]
    rows = training_sweep(cfg, Scheme.parse(args.scheme or "zf-sch"), snrs, args.seed or 0,
                          args.reverse_offset, _settings(args), args.threads)
    _emit(rows, args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tddlink", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int, help="Monte Carlo trials for chi/eta/selection statistics")
    common.add_argument("--outer-trials", type=int, help="trials for forward-pilot rates and bounds")
    common.add_argument("--l-post", type=int, help="channel draws in the posterior sample bank")
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--upper-bound", action="store_true", help="also evaluate the genie bound")
    common.add_argument("--threads", type=int, default=1, help="worker processes across sweep points")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="evaluate one scenario file")
    p.add_argument("--config", required=True)
    p.add_argument("--scheme")
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--values", type=float, nargs="+")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="evaluate a scenario over a sweep axis")
    p.add_argument("--config", required=True)
    p.add_argument("--scheme")
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--values", type=float, nargs="+")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("table1", parents=[common], help="M=K=8 scheme comparison grid",
                       epilog=TABLE1_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--snr", type=float, nargs="+", help="forward SNRs in dB")
    p.add_argument("--rows", nargs="+", choices=[r[0] for r in TABLE1_ROWS], metavar="LABEL")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("training-sweep", parents=[common], help="optimal reverse training length per SNR")
    p.add_argument("--config")
    p.add_argument("--scheme")
    p.add_argument("--snr", type=float, nargs="+", help="forward SNRs in dB")
    p.add_argument("--reverse-offset", type=float, default=10.0, help="reverse SNR = forward - offset (dB)")
    p.set_defaults(func=cmd_training_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"tddlink: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
