"""
Layered YAML configuration: packaged defaults < --config file < command flags
"""

import copy
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from rewardmap.errors import UsageError

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "default_config.yaml"


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_default_config() -> Dict[str, Any]:
    with open(DEFAULT_CONFIG_PATH, "r", encoding="utf-8") as f:
        return yaml.safe_load(f)


def load_config(path: Optional[str] = None) -> Dict[str, Any]:
    """
    Resolve the configuration document for a command.

    Args:
        path: User config file; falls back to $REWARDMAP_CONFIG when omitted

    Returns:
        Fully merged configuration dictionary
    """
    config = load_default_config()
    path = path or os.getenv("REWARDMAP_CONFIG")
    if not path:
        return config

    if not os.path.isfile(path):
        raise UsageError(f"Config file does not exist: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            user_config = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise UsageError(f"Could not parse config file {path}: {e}")

    if not isinstance(user_config, dict):
        raise UsageError(f"Config file {path} must contain a mapping")
    unknown = sorted(set(user_config) - set(config))
    if unknown:
        raise UsageError(f"Unknown config sections in {path}: {', '.join(unknown)}")
    return deep_merge(config, user_config)


def dump_config(config: Dict[str, Any]) -> str:
    return yaml.safe_dump(config, sort_keys=True, default_flow_style=False)
