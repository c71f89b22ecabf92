"""
Simulation configuration: flat KEY=VALUE files, environment defaults and
command-line overrides merged into a validated SimulationConfig.
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv import dotenv_values
from pydantic import ValidationError

from .exceptions import ConfigurationError
from .models import KernelSettings, SimulationConfig, SyntheticSpec

logger = logging.getLogger(__name__)

THREADS_ENV = "BO_SURVEY_THREADS"
OUTPUT_DIR_ENV = "BO_SURVEY_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "results"

SYNTHETIC_PREFIX = "synthetic_"
KERNEL_KEYS = ("length_scale", "noise_variance", "jitter")
TOP_LEVEL_KEYS = (
    "population_csv",
    "response_column",
    "prior_size",
    "sample_size",
    "repeats",
    "designs",
    "epsilon",
    "scheme",
    "srs_pi_convention",
    "master_seed",
    "histogram_bins",
    "kl_smoothing",
    "objective_rounds",
    "holdout_fraction",
    "ilcb_lambda",
    "threads",
)
SYNTHETIC_KEYS = tuple(SYNTHETIC_PREFIX + name for name in SyntheticSpec.model_fields)
KNOWN_KEYS = TOP_LEVEL_KEYS + KERNEL_KEYS + SYNTHETIC_KEYS


def _normalize(entries: Mapping[str, Any]) -> Dict[str, Any]:
    """Lower-case keys and drop unset values."""
    normalized = {}
    for key, value in entries.items():
        if value is None or (isinstance(value, str) and value.strip() == ""):
            continue
        normalized[key.strip().lower()] = value.strip() if isinstance(value, str) else value
    return normalized


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Parse a flat KEY=VALUE config file; unknown keys are rejected."""
    config_path = Path(path)
    if not config_path.exists():
        raise FileNotFoundError(f"Config file not found: {config_path}")
    entries = _normalize(dotenv_values(config_path))
    unknown = sorted(set(entries) - set(KNOWN_KEYS))
    if unknown:
        raise ConfigurationError(f"Unknown config keys in {config_path.name}: {', '.join(unknown)}")
    return entries


def environment_defaults() -> Dict[str, Any]:
    """Settings taken from the environment (and a .env file loaded by the CLI)."""
    defaults: Dict[str, Any] = {}
    threads = os.getenv(THREADS_ENV)
    if threads:
        defaults["threads"] = threads
    return defaults


def output_dir_default() -> Path:
    return Path(os.getenv(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR))


def build_config(entries: Mapping[str, Any]) -> SimulationConfig:
    """Validate flat entries into a SimulationConfig."""
    entries = _normalize(entries)
    unknown = sorted(set(entries) - set(KNOWN_KEYS))
    if unknown:
        raise ConfigurationError(f"Unknown config keys: {', '.join(unknown)}")

    synthetic = {
        key[len(SYNTHETIC_PREFIX):]: value
        for key, value in entries.items()
        if key.startswith(SYNTHETIC_PREFIX)
    }
    kernel = {key: entries[key] for key in KERNEL_KEYS if key in entries}
    fields = {key: entries[key] for key in TOP_LEVEL_KEYS if key in entries}

    if synthetic and "population_csv" in fields:
        raise ConfigurationError("population_csv and synthetic_* keys are mutually exclusive")

    try:
        if synthetic:
            fields["synthetic"] = SyntheticSpec(**synthetic)
        fields["kernel"] = KernelSettings(**kernel)
        return SimulationConfig(**fields)
    except ValidationError as e:
        messages = "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or 'config'}: {error['msg']}"
            for error in e.errors()
        )
        raise ConfigurationError(f"Invalid configuration: {messages}") from e


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> SimulationConfig:
    """
    Merge configuration sources into a SimulationConfig.

    Precedence: overrides > config file > environment > model defaults.
    """
    entries: Dict[str, Any] = environment_defaults()
    if path is not None:
        entries.update(read_config_file(path))
    if overrides:
        override_entries = _normalize(overrides)
        # a source given on the command line replaces the other kind from the file
        if "population_csv" in override_entries:
            entries = {key: value for key, value in entries.items() if not key.startswith(SYNTHETIC_PREFIX)}
        elif any(key.startswith(SYNTHETIC_PREFIX) for key in override_entries):
            entries.pop("population_csv", None)
        entries.update(override_entries)
    config = build_config(entries)
    logger.debug(f"Resolved configuration: {config.model_dump(mode='json')}")
    return config


def config_hash(config: SimulationConfig) -> str:
    """SHA-256 of the canonical JSON form of a configuration (threads excluded)."""
    payload = config.model_dump(mode="json", exclude={"threads"})
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
