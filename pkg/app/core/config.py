import logging
import os
from pathlib import Path
from typing import Optional, Union

import yaml
from pydantic import ValidationError
from pydantic_settings import BaseSettings

from .exceptions import ConfigError

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    # App Settings
    app_name: str = "Cantorlab"
    debug: bool = os.getenv("DEBUG", "False").lower() == "true"
    log_level: str = os.getenv("LOG_LEVEL", "INFO")
    log_format: str = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

    # Lab configuration file used when --config is not given
    default_config_path: str = os.getenv("CANTORLAB_CONFIG", "configs/default.yaml")

    # Alpha sequences
    alpha_validate_terms: int = 8  # terms checked eagerly when a sequence is built

    # Certification and decoding
    max_certification_depth: int = 512
    decoder_max_rounds: int = 12
    max_sample_depth: int = 512

    # Parsing and rendering
    max_dyadic_exponent: int = 1 << 16  # largest k accepted in "p/2^k"
    decimal_places: int = 12

    # Self-test
    selftest_workers: int = int(os.getenv("CANTORLAB_WORKERS", "4"))

    class Config:
        env_file = ".env"
        extra = "ignore"


settings = Settings()


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging once; everything goes to stderr so stdout stays byte-stable."""
    default = "DEBUG" if settings.debug else settings.log_level
    logging.basicConfig(
        level=getattr(logging, (level or default).upper(), logging.INFO),
        format=settings.log_format,
    )


def load_lab_config(path: Optional[Union[str, Path]] = None):
    """
    Load and validate a lab configuration file.

    With no explicit path the settings default is used; if that file does not
    exist the built-in defaults apply.
    """
    from ..models.schemas import LabConfig

    explicit = path is not None
    config_path = Path(path if explicit else settings.default_config_path)

    if not config_path.exists():
        if explicit:
            raise ConfigError(f"config file not found: {config_path}")
        logger.debug(f"No config at {config_path}, using built-in defaults")
        return LabConfig()

    try:
        raw = yaml.safe_load(config_path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {config_path}: {e}")

    return parse_lab_config(raw or {}, source=str(config_path))


def parse_lab_config(raw: dict, source: str = "<config>"):
    """Validate an already-decoded config mapping"""
    from ..models.schemas import LabConfig

    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping with sections alpha, ce, experiment")
    try:
        config = LabConfig.model_validate(raw)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"{source}: {problems}")

    logger.info(f"Loaded lab config from {source} (alpha={config.alpha.kind.value})")
    return config
