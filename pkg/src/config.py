"""
Configuration Manager

Handles configuration loading from multiple sources with fallback priority:
1. Environment variables (highest priority)
2. Configuration file (config.json)
3. Default values (lowest priority)

Command-line flags are layered on top by the CLI through ``set``.
"""

import json
import math
import os
import logging
from fractions import Fraction
from typing import Any, Dict
from pathlib import Path
# Handle both direct execution and package imports
try:
    from .exceptions import ThermalConfigError
except ImportError:
    from exceptions import ThermalConfigError

logger = logging.getLogger(__name__)

VALID_OUTPUT_FORMATS = {"csv", "json"}
VALID_PROFILES = {"poly2", "poly3"}
VALID_LOG_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR"}


def parse_beta(value: Any) -> float:
    """Interpret a configured inverse temperature; null/"inf"/"vacuum" mean vacuum."""
    if value is None:
        return math.inf
    if isinstance(value, str):
        if value.strip().lower() in ("", "inf", "infinity", "vacuum", "none", "null"):
            return math.inf
        return float(value)
    return float(value)


class Config:
    """Configuration manager with multiple source support."""

    def __init__(self, config_file: str = "config.json"):
        self.config_file = config_file
        self._config_data: Dict[str, Any] = {}
        self._load_config()

    def _load_config(self):
        """Load configuration from file and environment variables."""
        self._config_data = self._get_default_config()

        config_path = Path(self.config_file)
        if config_path.exists():
            try:
                with open(config_path, 'r') as f:
                    file_config = json.load(f)
                    file_config.pop("_comments", None)
                    self._merge_config(self._config_data, file_config)
                    logger.info(f"Loaded configuration from {config_path}")
            except (json.JSONDecodeError, OSError) as e:
                logger.warning(f"Failed to load config file {config_path}: {e}")
                raise ThermalConfigError(f"Invalid configuration file {config_path}: {e}")
        else:
            logger.debug(f"Config file {config_path} not found, using defaults and environment variables")

        self._load_from_environment()

    def _get_default_config(self) -> Dict[str, Any]:
        """Get default configuration values."""
        return {
            "field": {
                "mass": 1.0,
                "beta": None
            },
            "quadrature": {
                "rel_tol": 1e-10,
                "abs_tol": 1e-14,
                "gauss_order": 24,
                "max_panels": 100000,
                "max_refinements": 3,
                "boundary_delta": 1e-4,
                "adaptive_limit": 2000
            },
            "wick": {
                "max_power": 6,
                "oracle_max_factors": 8
            },
            "scattering": {
                "epsilon": "1",
                "step_budget": 10000,
                "search_depth": 2
            },
            "cluster": {
                "noise_floor": 1e-30,
                "window_inner": 5.0,
                "window_outer": 10.0,
                "bound_tolerance": 1e-9,
                "kms_tolerance": 1e-6
            },
            "kms": {
                "epsilon": 0.1,
                "interaction_power": 4,
                "profile": "poly2",
                "t_order": 12,
                "u_order": 16,
                "r_order": 16,
                "p_order": 16,
                "tail_tol": 1e-12,
                "qmc_points_log2": 10,
                "qmc_replicas": 8,
                "seed": 1729,
                "tolerance": 1e-6
            },
            "output": {
                "format": "csv",
                "reproducible": False
            },
            "server": {
                "log_level": "INFO"
            },
            "run": {}
        }

    def _merge_config(self, base: Dict[str, Any], override: Dict[str, Any]):
        """Recursively merge configuration dictionaries."""
        for key, value in override.items():
            if key in base and isinstance(base[key], dict) and isinstance(value, dict):
                self._merge_config(base[key], value)
            else:
                base[key] = value

    def _load_from_environment(self):
        """Load configuration from environment variables."""
        env_mappings = {
            "KMS_FIELD_MASS": "field.mass",
            "KMS_FIELD_BETA": "field.beta",
            "KMS_QUAD_REL_TOL": "quadrature.rel_tol",
            "KMS_QUAD_ABS_TOL": "quadrature.abs_tol",
            "KMS_QUAD_GAUSS_ORDER": "quadrature.gauss_order",
            "KMS_WICK_MAX_POWER": "wick.max_power",
            "KMS_SCATTERING_EPSILON": "scattering.epsilon",
            "KMS_SCATTERING_DEPTH": "scattering.search_depth",
            "KMS_EPSILON": "kms.epsilon",
            "KMS_INTERACTION_POWER": "kms.interaction_power",
            "KMS_PROFILE": "kms.profile",
            "KMS_SEED": "kms.seed",
            "KMS_OUTPUT_FORMAT": "output.format",
            "KMS_REPRODUCIBLE": "output.reproducible",
            "KMS_LOG_LEVEL": "server.log_level"
        }

        # keys whose default is None carry no type to convert to
        converters = {"field.beta": parse_beta}

        for env_var, config_path in env_mappings.items():
            env_value = os.getenv(env_var)
            if env_value is not None:
                if config_path in converters:
                    try:
                        self.set(config_path, converters[config_path](env_value))
                    except ValueError as e:
                        raise ThermalConfigError(f"Invalid {env_var}={env_value!r}: {e}")
                else:
                    self._set_nested_value(config_path, env_value)
                logger.debug(f"Set {config_path} from environment variable {env_var}")

    def _set_nested_value(self, path: str, value: str):
        """Set a nested configuration value using dot notation."""
        keys = path.split('.')
        current = self._config_data

        for key in keys[:-1]:
            if key not in current:
                current[key] = {}
            current = current[key]

        final_key = keys[-1]
        current[final_key] = self._convert_type(value, current.get(final_key))

    def _convert_type(self, value: str, existing_value: Any) -> Any:
        """Convert string environment variable to appropriate type."""
        if existing_value is None:
            return value

        if isinstance(existing_value, bool):
            return value.lower() in ('true', '1', 'yes', 'on')
        elif isinstance(existing_value, int):
            return int(value)
        elif isinstance(existing_value, float):
            return float(value)
        else:
            return value

    def get(self, path: str, default: Any = None) -> Any:
        """Get a configuration value using dot notation."""
        keys = path.split('.')
        current = self._config_data

        try:
            for key in keys:
                current = current[key]
            return current
        except (KeyError, TypeError):
            return default

    def set(self, path: str, value: Any):
        """Set a configuration value using dot notation."""
        keys = path.split('.')
        current = self._config_data

        for key in keys[:-1]:
            if key not in current:
                current[key] = {}
            current = current[key]

        current[keys[-1]] = value

    def validate(self) -> bool:
        """Validate numeric ranges and enumerated options.

        Logs every problem found and returns False if any was found.
        """
        problems = []

        try:
            mass = float(self.get("field.mass"))
            if mass < 0:
                problems.append(f"field.mass must be >= 0, got {mass}")
        except (TypeError, ValueError):
            problems.append(f"field.mass is not a number: {self.get('field.mass')!r}")

        try:
            beta = parse_beta(self.get("field.beta"))
            if beta <= 0:
                problems.append(f"field.beta must be > 0, got {beta}")
        except (TypeError, ValueError):
            problems.append(f"field.beta is not a number: {self.get('field.beta')!r}")

        for key in ("quadrature.rel_tol", "quadrature.abs_tol"):
            value = self.get(key)
            if not isinstance(value, (int, float)) or value <= 0:
                problems.append(f"{key} must be a positive number, got {value!r}")

        if int(self.get("wick.max_power", 0)) < 1:
            problems.append("wick.max_power must be >= 1")

        try:
            if Fraction(str(self.get("scattering.epsilon"))) <= 0:
                problems.append("scattering.epsilon must be a positive rational")
        except (ValueError, ZeroDivisionError):
            problems.append(f"scattering.epsilon is not rational: {self.get('scattering.epsilon')!r}")

        k = self.get("kms.interaction_power")
        if not isinstance(k, int) or k % 2 or not 2 <= k <= 6:
            problems.append(f"kms.interaction_power must be even in [2, 6], got {k!r}")

        if self.get("kms.profile") not in VALID_PROFILES:
            problems.append(
                f"kms.profile must be one of {', '.join(sorted(VALID_PROFILES))}, "
                f"got {self.get('kms.profile')!r}"
            )

        if self.get("output.format") not in VALID_OUTPUT_FORMATS:
            problems.append(f"output.format must be csv or json, got {self.get('output.format')!r}")

        if str(self.get("server.log_level", "INFO")).upper() not in VALID_LOG_LEVELS:
            problems.append(f"Unknown log level {self.get('server.log_level')!r}")

        for problem in problems:
            logger.error(problem)
        return not problems

    def to_dict(self) -> Dict[str, Any]:
        """Return configuration as dictionary."""
        return json.loads(json.dumps(self._config_data))

    def create_example_config(self, output_file: str = "config.json.example"):
        """Create an example configuration file."""
        example_config = self._get_default_config()

        example_with_comments = {
            "_comments": {
                "field.mass": "Field mass m >= 0 (natural units)",
                "field.beta": "Inverse temperature; null selects the vacuum",
                "quadrature.rel_tol": "Relative tolerance for certified radial quadrature",
                "quadrature.abs_tol": "Absolute tolerance; also fixes the momentum tail cutoff",
                "quadrature.gauss_order": "Gauss-Legendre nodes per panel",
                "quadrature.max_panels": "Panel budget before a NumericalError is raised",
                "wick.max_power": "Largest admissible Wick power",
                "scattering.epsilon": "Rational time-slice half width used by the identity corpus",
                "scattering.search_depth": "Split-search depth for prove_equal",
                "cluster.noise_floor": "Absolute floor below which samples leave the fit window",
                "kms.epsilon": "Half width of the smearing support (-2 eps, -eps)",
                "kms.profile": "Smearing profile: poly2 or poly3",
                "kms.seed": "Seed for scrambled Sobol replicas",
                "output.reproducible": "Suppress run metadata so repeated runs are byte-identical",
                "server.log_level": "Logging level (DEBUG, INFO, WARNING, ERROR)",
                "run": "Keys mirror the command-line flag names one-to-one"
            },
            **example_config
        }

        try:
            with open(output_file, 'w') as f:
                json.dump(example_with_comments, f, indent=2)
            logger.info(f"Created example configuration file: {output_file}")
        except OSError as e:
            logger.error(f"Failed to create example config: {e}")
            raise ThermalConfigError(f"Could not write example config file: {e}")

    def __str__(self) -> str:
        return json.dumps(self.to_dict(), indent=2)
