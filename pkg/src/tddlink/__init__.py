"""Multiuser TDD downlink: channel estimation, linear precoding and achievable rates."""

from .config import ConfigError, RngStream, SystemConfig, db_to_linear, validate_config
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["ConfigError", "RngStream", "SystemConfig", "db_to_linear", "validate_config", "BACKEND"]
