# Configuration management for hgcnet components.
# Loads settings from flat `key = value` files (or YAML) and allows overrides via
# environment variables and command-line flags.

import os
from pathlib import Path
from typing import Any, Dict, Generic, Mapping, Optional, Type, TypeVar, Union

import structlog
import yaml
from pydantic import BaseModel, Field, field_validator
from pydantic import ValidationError as PydanticValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from .exceptions import ConfigurationError

logger = structlog.get_logger(__name__)

# --- Environment Variable Prefixes ---
# e.g., HGC_TRAIN__EPOCHS=30 will override train.epochs
ENV_VAR_PREFIX = "HGC_"
ENV_SECTION_SEPARATOR = "__"

YAML_SUFFIXES = (".yaml", ".yml")

ModelT = TypeVar("ModelT", bound=BaseModel)


class LoggingConfig(BaseModel):
    level: str = Field(default="INFO", description="Logging level")
    format: str = Field(default="console", description="Renderer: console or json")
    file: Optional[str] = Field(default=None, description="Append logs to this file")

    @field_validator("level")
    @classmethod
    def validate_level(cls, v: str) -> str:
        valid_levels = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
        if v.upper() not in valid_levels:
            raise ValueError(f"Invalid log level. Must be one of: {sorted(valid_levels)}")
        return v.upper()

    @field_validator("format")
    @classmethod
    def validate_format(cls, v: str) -> str:
        if v.lower() not in ("console", "json"):
            raise ValueError("Log format must be 'console' or 'json'")
        return v.lower()


class RuntimeSettings(BaseSettings):
    """Process-level settings read from HGC_* environment variables."""

    model_config = SettingsConfigDict(
        env_prefix=ENV_VAR_PREFIX, env_file=".env", extra="ignore", case_sensitive=False
    )

    threads: int = Field(default=0, ge=0, description="Worker threads; 0 = deterministic mode")
    log_level: Optional[str] = None
    log_format: Optional[str] = None


def get_settings() -> RuntimeSettings:
    """Read runtime settings fresh from the environment."""
    return RuntimeSettings()


def _coerce(raw: str) -> Any:
    """Type a raw flat-file or environment value the way YAML would."""
    raw = raw.strip()
    if raw == "":
        return ""
    try:
        return yaml.safe_load(raw)
    except yaml.YAMLError:
        return raw


def parse_flat_config(text: str, source: str = "<string>") -> Dict[str, Any]:
    """Parse `key = value` lines into a flat dict of typed values.

    Blank lines and `#` comments are skipped. Both `key = value` and `key=value`
    are accepted.
    """
    values: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigurationError(f"{source}:{lineno}: empty key")
        values[key] = _coerce(value)
    return values


def nest_flat(flat: Mapping[str, Any]) -> Dict[str, Any]:
    """Turn {"net.groups": 4} into {"net": {"groups": 4}}."""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        node = nested
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigurationError(f"Key {key!r} conflicts with scalar {part!r}")
            node = child
        node[parts[-1]] = value
    return nested


def deep_merge(base: Dict[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursively merge override into a copy of base."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Load a config file into a nested dict.

    Args:
        path: flat `key = value` file, or a YAML file when the suffix is .yaml/.yml

    Returns:
        Dict containing the nested configuration
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in YAML_SUFFIXES:
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Malformed YAML in {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError(f"Top level of {path} must be a mapping")
        return data
    return nest_flat(parse_flat_config(text, source=str(path)))


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """Collect HGC_<SECTION>__<KEY> overrides as a nested dict."""
    environ = os.environ if environ is None else environ
    flat: Dict[str, Any] = {}
    for key, value in environ.items():
        if not key.startswith(ENV_VAR_PREFIX) or ENV_SECTION_SEPARATOR not in key:
            continue
        dotted = key[len(ENV_VAR_PREFIX) :].lower().replace(ENV_SECTION_SEPARATOR, ".")
        flat[dotted] = _coerce(value)
    return nest_flat(flat)


class ConfigManager(Generic[ModelT]):
    """Builds a validated config model from layered sources.

    Precedence, lowest first: model defaults, config file, environment, then
    any overrides passed to `build` (desk preset, command-line flags).
    """

    def __init__(
        self,
        model: Type[ModelT],
        config_path: Optional[Union[str, Path]] = None,
        environ: Optional[Mapping[str, str]] = None,
    ):
        self.model = model
        self.config_path = config_path
        self.environ = environ
        self.layers: Dict[str, Any] = {}
        self._load_layers()

    def _load_layers(self) -> None:
        data: Dict[str, Any] = {}
        if self.config_path is not None:
            data = load_config_file(self.config_path)
            logger.debug("config_file_loaded", path=str(self.config_path), sections=sorted(data))
        self.layers = deep_merge(data, env_overrides(self.environ))

    def build(self, *overrides: Mapping[str, Any]) -> ModelT:
        """Validate the merged layers plus overrides into the config model."""
        merged = self.layers
        for override in overrides:
            merged = deep_merge(merged, override)
        try:
            return self.model.model_validate(merged)
        except PydanticValidationError as e:
            raise ConfigurationError(f"Invalid configuration: {e}") from e
