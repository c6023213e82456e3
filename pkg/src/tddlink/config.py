"""System configuration, unit conversion and seeded random streams."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

__all__ = [
    "ConfigError",
    "SystemConfig",
    "RngStream",
    "validate_config",
    "db_to_linear",
    "linear_to_db",
    "complex_normal",
    "load_scenario_file",
    "parse_config",
    "config_to_dict",
    "dump_config",
]


class ConfigError(ValueError):
    """Raised when a configuration violates one of its invariants."""


def db_to_linear(x_db):
    """Convert a decibel value (scalar or array) to a linear power ratio."""
    out = 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def linear_to_db(x):
    return 10.0 * np.log10(x)


def _as_tuple(values, K: int, name: str) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.size == 1:
        arr = np.repeat(arr, K)
    if arr.shape != (K,):
        raise ConfigError(f"{name} must be a scalar or a length-{K} sequence, got shape {arr.shape}")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class SystemConfig:
    """Long-term system parameters of one TDD cell.

    SNRs are linear power ratios. Scalars given for ``rho_f``, ``rho_r`` or
    ``w`` are broadcast to all ``K`` users. Construction runs
    :func:`validate_config`, so every instance is a feasible configuration.
    """

    M: int
    K: int
    T: int
    tau_r: int
    tau_f: int = 0
    rho_f: Sequence[float] = 1.0
    rho_r: Sequence[float] = 1.0
    w: Sequence[float] = 1.0
    comp_delay: int = 1

    def __post_init__(self):
        for name in ("M", "K", "T", "tau_r", "tau_f", "comp_delay"):
            value = getattr(self, name)
            if int(value) != value:
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        object.__setattr__(self, "rho_f", _as_tuple(self.rho_f, self.K, "rho_f"))
        object.__setattr__(self, "rho_r", _as_tuple(self.rho_r, self.K, "rho_r"))
        object.__setattr__(self, "w", _as_tuple(self.w, self.K, "w"))
        validate_config(self)

    # array views used by the numerical code
    @property
    def rho_f_arr(self) -> np.ndarray:
        return np.asarray(self.rho_f)

    @property
    def rho_r_arr(self) -> np.ndarray:
        return np.asarray(self.rho_r)

    @property
    def w_arr(self) -> np.ndarray:
        return np.asarray(self.w)

    @property
    def est_var(self) -> np.ndarray:
        """Per-user variance of the LMMSE estimate entries."""
        x = self.rho_r_arr * self.tau_r
        return x / (1.0 + x)

    @property
    def err_var(self) -> np.ndarray:
        """Per-user variance of the estimation error entries."""
        return 1.0 / (1.0 + self.rho_r_arr * self.tau_r)

    @property
    def data_symbols(self) -> int:
        return self.T - self.tau_r - self.tau_f - self.comp_delay

    @property
    def is_homogeneous(self) -> bool:
        return len(set(self.rho_f)) == 1 and len(set(self.rho_r)) == 1 and len(set(self.w)) == 1

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


def validate_config(cfg: SystemConfig) -> SystemConfig:
    """Return ``cfg`` unchanged if every invariant holds, else raise ConfigError."""
    if cfg.M < 1 or cfg.K < 1 or cfg.T < 1:
        raise ConfigError(f"M, K, T must be >= 1 (got M={cfg.M}, K={cfg.K}, T={cfg.T})")
    if cfg.tau_f < 0 or cfg.comp_delay < 0:
        raise ConfigError("tau_f and comp_delay must be non-negative")
    if cfg.K > cfg.tau_r:
        raise ConfigError(f"orthogonal pilots need K <= tau_r (K={cfg.K}, tau_r={cfg.tau_r})")
    if cfg.tau_r + cfg.tau_f + cfg.comp_delay > cfg.T - 1:
        raise ConfigError(
            "no data symbol left: tau_r + tau_f + comp_delay must be <= T - 1 "
            f"({cfg.tau_r} + {cfg.tau_f} + {cfg.comp_delay} > {cfg.T - 1})"
        )
    for name in ("rho_f", "rho_r", "w"):
        arr = np.asarray(getattr(cfg, name))
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ConfigError(f"all {name} entries must be finite and strictly positive")
    return cfg


@dataclass(frozen=True)
class RngStream:
    """A reproducible random substream identified by ``(seed, index)``.

    Children are derived through :class:`numpy.random.SeedSequence` spawn
    keys, so distinct paths give statistically independent generators.
    """

    seed: int
    index: tuple[int, ...] = field(default=())

    def __post_init__(self):
        idx = self.index
        if isinstance(idx, (int, np.integer)):
            idx = (int(idx),)
        object.__setattr__(self, "index", tuple(int(i) for i in idx))

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=self.index))

    def child(self, *path: int) -> "RngStream":
        return RngStream(self.seed, self.index + tuple(int(p) for p in path))

    def spawn(self, n: int) -> list["RngStream"]:
        return [self.child(i) for i in range(n)]


def complex_normal(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """Draw circularly-symmetric CN(0, var) samples.

    ``var`` may broadcast against ``shape`` (e.g. per-row variances).
    """
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z * np.sqrt(np.asarray(var, dtype=float) / 2.0)


# -- scenario files ----------------------------------------------------------

_CONFIG_KEYS = {"M", "K", "T", "tau_r", "tau_f", "comp_delay"}


def _per_user(raw):
    if isinstance(raw, (list, tuple)):
        return [float(v) for v in raw]
    return float(raw)


def parse_config(data: Mapping[str, Any]) -> SystemConfig:
    """Build a validated :class:`SystemConfig` from a key-value mapping.

    SNRs may be given in dB (``rho_f_db``, ``rho_r_db``) or linear
    (``rho_f``, ``rho_r``). ``rho_r_db`` also accepts ``"offset:<d>"``,
    meaning the forward SNR minus ``d`` dB.
    """
    missing = {"M", "K", "T", "tau_r"} - set(data)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    kwargs = {k: int(data[k]) for k in _CONFIG_KEYS if k in data}

    if "rho_f" in data:
        rho_f = np.asarray(_per_user(data["rho_f"]), dtype=float)
    elif "rho_f_db" in data:
        rho_f = db_to_linear(np.asarray(_per_user(data["rho_f_db"]), dtype=float))
    else:
        raise ConfigError("config needs rho_f or rho_f_db")

    if "rho_r" in data:
        rho_r = np.asarray(_per_user(data["rho_r"]), dtype=float)
    elif "rho_r_db" in data:
        raw = data["rho_r_db"]
        if isinstance(raw, str):
            if not raw.startswith("offset:"):
                raise ConfigError(f"rho_r_db string must look like 'offset:<d>', got {raw!r}")
            try:
                offset = float(raw.split(":", 1)[1])
            except ValueError as exc:
                raise ConfigError(f"bad rho_r_db offset {raw!r}") from exc
            rho_r = np.asarray(rho_f, dtype=float) * db_to_linear(-offset)
        else:
            rho_r = db_to_linear(np.asarray(_per_user(raw), dtype=float))
    else:
        raise ConfigError("config needs rho_r or rho_r_db")

    w = data.get("w", data.get("weights", 1.0))
    try:
        cfg = SystemConfig(rho_f=rho_f, rho_r=rho_r, w=_per_user(w), **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return validate_config(cfg)


def config_to_dict(cfg: SystemConfig) -> dict:
    """Serialize with linear SNRs so that parsing reproduces ``cfg`` exactly."""
    return {
        "M": cfg.M,
        "K": cfg.K,
        "T": cfg.T,
        "tau_r": cfg.tau_r,
        "tau_f": cfg.tau_f,
        "comp_delay": cfg.comp_delay,
        "rho_f": list(cfg.rho_f),
        "rho_r": list(cfg.rho_r),
        "weights": list(cfg.w),
    }


def dump_config(cfg: SystemConfig, path=None, **extra) -> str:
    text = yaml.safe_dump({**config_to_dict(cfg), **extra}, sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text


def load_scenario_file(path) -> tuple[SystemConfig, dict]:
    """Read a YAML scenario file; returns the config and the remaining keys."""
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a key-value mapping at top level")
    cfg = parse_config(data)
    known = _CONFIG_KEYS | {"rho_f", "rho_r", "rho_f_db", "rho_r_db", "w", "weights"}
    return cfg, {k: v for k, v in data.items() if k not in known}
