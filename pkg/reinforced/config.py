"""Configuration management for reinforced."""

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import BaseModel, Field, ValidationError

from .exceptions import ConfigError

OUTPUT_DIR_ENV = "REINFORCED_OUTPUT_DIR"


def _default_output_dir() -> Path:
    return Path(os.getenv(OUTPUT_DIR_ENV) or "runs")


class Config(BaseModel):
    """Run-level settings shared by every subcommand."""

    output_dir: Path = Field(default_factory=_default_output_dir, description="Directory for CSV/JSON outputs")
    threads: int = Field(default=1, ge=1, description="Worker processes for replica ensembles")
    seed: int = Field(default=0, ge=0, description="Master seed")
    debug: bool = Field(default=False, description="Enable debug mode")
    verbose: bool = Field(default=False, description="Log progress at INFO")
    no_color: bool = Field(default=False, description="Disable colored output")
    profile: Optional[Dict[str, Any]] = Field(default=None, description="WeightProfile fields from the file")
    experiment: Optional[Dict[str, Any]] = Field(default=None, description="ExperimentConfig fields from the file")


def validation_to_config_error(err: ValidationError, prefix: str = "") -> ConfigError:
    """ConfigError naming the first failing field."""
    first = err.errors()[0]
    loc = ".".join(str(p) for p in first.get("loc", ())) or None
    if prefix and loc:
        loc = f"{prefix}.{loc}"
    return ConfigError(first.get("msg", str(err)), field=loc or prefix or None)


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None) -> Config:
    """File values, then command-line overrides; ``None`` overrides are ignored."""
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}", field="config")
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}", field="config")
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must hold a JSON object", field="config")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    try:
        return Config(**data)
    except ValidationError as e:
        raise validation_to_config_error(e)
