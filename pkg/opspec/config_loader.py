"""
Configuration loader for opspec.

Looks for the YAML configuration in this order:
1. Explicit path passed to ``Config(...)`` or ``--config``
2. Environment variable OPSPEC_CONFIG
3. ./opspec.yaml (project root)
4. Falls back to built-in defaults

All settings live under the ``opspec:`` root key and are validated by
:class:`opspec.models.RunConfig`. Numerical modules read their defaults
from the module-level ``config`` singleton; explicit function arguments
always take precedence.
"""

from __future__ import annotations

import copy
import logging
import os
from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError

from .errors import ConfigError
from .models import (
    Grids,
    PerturbSettings,
    RunConfig,
    Runtime,
    Sampling,
    Tolerances,
    VMSettings,
)

logger = logging.getLogger(__name__)

SEED_ENV = "OPSPEC_SEED"
CONFIG_ENV = "OPSPEC_CONFIG"


def _deep_merge(base: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class Config:
    def __init__(self, config_path: str | Path | None = None):
        self.config_path = self._resolve_path(config_path)
        self._raw = self._load_config()
        self._run = self._validate(self._raw)

    @staticmethod
    def _resolve_path(config_path: str | Path | None) -> Path | None:
        # Determine config path in order of priority
        if config_path:
            return Path(config_path)
        if os.getenv(CONFIG_ENV):
            return Path(os.environ[CONFIG_ENV])
        if Path("./opspec.yaml").exists():
            return Path("./opspec.yaml")
        return None

    def _load_config(self) -> dict[str, Any]:
        """
        Load the ``opspec`` section of the YAML file.

        Returns an empty mapping (all defaults) if no file is configured.
        An explicitly requested file that cannot be read is an error.
        """
        if self.config_path is None:
            logger.debug("No config file found, using built-in defaults")
            return {}
        if not self.config_path.exists():
            raise ConfigError("config file not found", path=str(self.config_path))
        try:
            with open(self.config_path, encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}", path=str(self.config_path)) from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping", path=str(self.config_path))
        logger.debug("Loaded config from: %s", self.config_path)
        section = data.get("opspec", {}) or {}
        if not isinstance(section, dict):
            raise ConfigError("'opspec' section must be a mapping", path=str(self.config_path))
        return section

    @staticmethod
    def _validate(raw: dict[str, Any]) -> RunConfig:
        try:
            return RunConfig.model_validate(raw)
        except ValidationError as exc:
            first = exc.errors()[0]
            location = ".".join(str(part) for part in first["loc"])
            raise ConfigError(f"invalid configuration at '{location}': {first['msg']}") from exc

    def reload(self, config_path: str | Path | None = None) -> None:
        """Re-read configuration (used by the CLI ``--config`` flag)."""
        self.config_path = self._resolve_path(config_path)
        self._raw = self._load_config()
        self._run = self._validate(self._raw)

    def override(self, updates: dict[str, Any]) -> None:
        """Apply nested overrides, e.g. ``{"tolerances": {"kernel_rel": 1e-9}}``."""
        self._raw = _deep_merge(self._raw, updates)
        self._run = self._validate(self._raw)

    @property
    def run(self) -> RunConfig:
        """Validated configuration with the seed environment override applied."""
        return self._run.model_copy(
            update={"sampling": self.sampling.model_copy(update={"seed": self.seed})}
        )

    @property
    def tolerances(self) -> Tolerances:
        return self._run.tolerances

    @property
    def grids(self) -> Grids:
        return self._run.grids

    @property
    def sampling(self) -> Sampling:
        return self._run.sampling

    @property
    def vm(self) -> VMSettings:
        return self._run.vm

    @property
    def perturb(self) -> PerturbSettings:
        return self._run.perturb

    @property
    def runtime(self) -> Runtime:
        return self._run.runtime

    @property
    def seed(self) -> int:
        """
        Base seed for every randomized routine.

        OPSPEC_SEED wins over both the YAML value and ``--seed``.
        """
        env_seed = os.getenv(SEED_ENV)
        if env_seed:
            try:
                value = int(env_seed, 0)
            except ValueError as exc:
                raise ConfigError(f"{SEED_ENV} must be an integer", value=env_seed) from exc
            if not 0 <= value < 2**64:
                raise ConfigError(f"{SEED_ENV} must be a 64-bit value", value=value)
            return value
        return self._run.sampling.seed

    @property
    def kernel_rel_tol(self) -> float:
        """Relative kernel tolerance; absolute tolerance is this times (1 + ||M||)."""
        return self._run.tolerances.kernel_rel

    @property
    def workers(self) -> int:
        return self._run.runtime.workers

    @property
    def log_level(self) -> str:
        return self._run.runtime.log_level


# Global config singleton used across opspec
config = Config()
