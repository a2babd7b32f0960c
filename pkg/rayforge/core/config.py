"""
Run configuration: YAML file merged over built-in defaults.
"""

import copy
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

logger = logging.getLogger(__name__)

DEFAULT_CONFIG: Dict[str, Any] = {
    "flow": {
        "step": 1e-3,
        "s_max_factor": 100.0,
        "boundary_tol": 1e-9,
        "glancing_tol": 1e-8,
        "bisection_tol": 1e-10,
        "bisection_iters": 50,
    },
    "transform": {
        "glancing_margin": 0.02,
        "n_theta": 64,
        "n_alpha": 64,
        "chunk_size": 128,
        "sm_points": 12,
        "n_dir": 64,
        "residual_delta": 1e-4,
        "volume_grid": 128,
    },
    "connection": {
        "sign": "attenuation",
    },
    "inversion": {
        "grid": 32,
        "n_theta": 96,
        "n_alpha": 48,
        "step": 0.02,
        "lambda": 1e-6,
        "max_iters": 200,
        "tol": 1e-8,
        "stagnation_window": 10,
    },
    "beams": {
        "steps": 2000,
    },
    "output": {
        "directory": "rayforge_out",
        "verbose": True,
    },
    "parallel": {
        "threads": 0,
    },
}


def _merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_path: Optional[str] = None,
                overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Load a YAML configuration and merge it over the defaults."""
    config = copy.deepcopy(DEFAULT_CONFIG)

    if config_path is not None:
        path = Path(config_path)
        if path.exists():
            with open(path, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f) or {}
            if not isinstance(loaded, dict):
                raise ValueError(f"Configuration file {config_path} must contain a mapping")
            config = _merge(config, loaded)
        else:
            logger.warning("Configuration file %s not found. Using defaults.", config_path)

    if overrides:
        config = _merge(config, overrides)
    return config


def resolve_config(config: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Return ``config`` completed with defaults (components accept partial dicts)."""
    if config is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    return _merge(DEFAULT_CONFIG, config)


def thread_count(config: Dict[str, Any]) -> int:
    """Worker threads: config value, else RAYFORGE_THREADS, else the CPU count."""
    threads = int(config.get("parallel", {}).get("threads", 0) or 0)
    env = os.getenv("RAYFORGE_THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            logger.warning("Ignoring malformed RAYFORGE_THREADS=%r", env)
            cap = None
        if cap is not None:
            threads = min(threads, cap) if threads > 0 else cap
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads
