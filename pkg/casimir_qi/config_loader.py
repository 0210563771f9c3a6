import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import toml
import yaml

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).with_name("config.yaml")


def load_config(config_path: Union[str, Path] = DEFAULT_CONFIG_PATH) -> dict:
    """Read a YAML (default) or TOML (``.toml`` suffix) mapping from disk."""
    path = Path(config_path)
    with open(path, "r") as file:
        if path.suffix == ".toml":
            config = toml.load(file)
        else:
            config = yaml.safe_load(file) or {}
    if not isinstance(config, dict):
        raise ValueError(f"config file {path} must contain a key/value mapping")
    return config


class ConfigLoader:
    """Packaged defaults, read once per instance."""

    def __init__(self, config_path: Optional[Union[str, Path]] = None):
        logger.debug("Loading config from %s", config_path or DEFAULT_CONFIG_PATH)
        self.config: Dict[str, Any] = load_config(config_path or DEFAULT_CONFIG_PATH)

    def __getitem__(self, key):
        return self.config[key]

    def get(self, key, default=None):
        return self.config.get(key, default)
