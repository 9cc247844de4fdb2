# careprofiles/utils/config_loader.py
"""
Configuration loading utilities with environment variable support.
"""

from __future__ import annotations

import json
import os
import re
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Type, TypeVar

import yaml
from pydantic import BaseModel, ValidationError

from ..core.errors import ConfigError
from ..models.config import AppConfig, GeneratorSpec, MappingConfig


DEFAULT_CONFIG_PATH = "configs/active/config.yaml"

DocumentT = TypeVar("DocumentT", bound=BaseModel)


def substitute_env_vars(config_str: str) -> str:
    """
    Substitute environment variables in config string.

    Args:
        config_str: Configuration string with ${VAR_NAME} or ${VAR_NAME:default} placeholders

    Returns:
        Configuration string with environment variables substituted
    """
    pattern = r'\$\{([^}]+)\}'

    def replacer(match):
        var_name = match.group(1)
        if ':' in var_name:
            var_name, default_value = var_name.split(':', 1)
            return os.getenv(var_name, default_value)
        return os.getenv(var_name, match.group(0))

    return re.sub(pattern, replacer, config_str)


def _read_yaml_mapping(config_path: str) -> Dict[str, Any]:
    """Read YAML file into a mapping with environment substitution."""
    config_file = Path(config_path)
    if not config_file.exists():
        raise ConfigError(f"Configuration file not found: {config_path}")

    with open(config_file, 'r', encoding='utf-8') as f:
        content = substitute_env_vars(f.read())

    try:
        config_data = yaml.safe_load(content)
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in configuration file {config_path}: {e}") from e

    if config_data is None:
        return {}
    if not isinstance(config_data, dict):
        raise ConfigError(f"Configuration file {config_path} must contain a YAML mapping")
    return config_data


def merge_dicts(base: Mapping[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursively merge two dictionaries where override wins."""
    merged = dict(base)
    for key, value in override.items():
        if key in merged and isinstance(merged[key], dict) and isinstance(value, dict):
            merged[key] = merge_dicts(merged[key], value)
        else:
            merged[key] = value
    return merged


def _validate(model: Type[DocumentT], data: Mapping[str, Any], source: str) -> DocumentT:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"Invalid configuration in {source}: {problems}") from e


def load_config(
    config_path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    base_config_path: Optional[str] = DEFAULT_CONFIG_PATH,
) -> AppConfig:
    """
    Load the application configuration.

    Resolution order (later wins):
    1) built-in defaults
    2) base_config_path, when it exists
    3) explicit config_path
    4) overrides (nested mapping, typically CLI flags)
    """
    data: Dict[str, Any] = {}
    sources = []
    if base_config_path and Path(base_config_path).exists() and base_config_path != config_path:
        data = _read_yaml_mapping(base_config_path)
        sources.append(base_config_path)
    if config_path:
        data = merge_dicts(data, _read_yaml_mapping(config_path))
        sources.append(config_path)
    if overrides:
        data = merge_dicts(data, overrides)
        sources.append("command line")
    return _validate(AppConfig, data, ", ".join(sources) or "defaults")


def save_config(config: AppConfig, config_path: str = DEFAULT_CONFIG_PATH) -> None:
    """Save configuration to a YAML file."""
    path_obj = Path(config_path)
    path_obj.parent.mkdir(parents=True, exist_ok=True)
    with open(path_obj, 'w', encoding='utf-8') as f:
        yaml.safe_dump(config.to_dict(), f, default_flow_style=False, indent=2, sort_keys=False)


def _load_json_document(path: str, model: Type[DocumentT]) -> DocumentT:
    file_path = Path(path)
    if not file_path.exists():
        raise ConfigError(f"Configuration file not found: {path}")
    try:
        with open(file_path, 'r', encoding='utf-8') as f:
            data = json.loads(substitute_env_vars(f.read()))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {path}: line {e.lineno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    return _validate(model, data, path)


def load_mapping(path: str) -> MappingConfig:
    """Load a claim-to-event mapping document (schema careprofiles/mapping/v1)."""
    return _load_json_document(path, MappingConfig)


def load_generator_spec(path: str) -> GeneratorSpec:
    """Load a planted-mixture generator document (schema careprofiles/generator/v1)."""
    return _load_json_document(path, GeneratorSpec)
