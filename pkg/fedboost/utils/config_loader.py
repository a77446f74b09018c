"""Config loader."""

from __future__ import annotations

import os
import re
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from pydantic import ValidationError

from ..exceptions import ConfigError
from ..models.config_model import ExperimentConfig
from .logger import log, log_and_raise_error

ENV_PATTERN = re.compile(r".*?\${(\w+)}.*?")


def read_yaml(path: Union[str, Path, None] = None, data: Optional[str] = None, tag: str = "!ENV") -> Dict[str, Any]:
    """
    Load a yaml configuration file and resolve any environment variables.

    The environment variables must have !ENV before them and be in this format
    to be parsed: ${VAR_NAME}.

    Args:
        path: the path to the yaml file.
        data: the yaml data itself as a string.
        tag: the tag to look for.

    Returns:
        The dict configuration; an empty document gives an empty dict.

    Raises:
        ConfigError: No input, unreadable file, invalid yaml or unset variable.
    """

    class EnvLoader(yaml.SafeLoader):
        pass

    # e.g. seed: !ENV ${FEDBOOST_SEED}
    EnvLoader.add_implicit_resolver(tag, ENV_PATTERN, None)

    def constructor_env_variables(loader: yaml.Loader, node: yaml.Node) -> Any:
        value = str(loader.construct_scalar(node))
        full_value = value
        for name in ENV_PATTERN.findall(value):
            if name not in os.environ:
                log_and_raise_error(f"Environment variable {name} referenced by the config is not set.", ConfigError)
            full_value = full_value.replace(f"${{{name}}}", os.environ[name])
        # resolved values are re-read as yaml scalars so numbers stay numbers
        return yaml.safe_load(full_value) if full_value else full_value

    EnvLoader.add_constructor(tag, constructor_env_variables)

    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            log_and_raise_error(f"Could not read config file {path}. Error: {e}.", ConfigError)
    elif data is not None:
        text = data
    else:
        log_and_raise_error("Either a path or data should be defined as input", ConfigError)

    try:
        content = yaml.load(text, Loader=EnvLoader)
    except yaml.YAMLError as e:
        log_and_raise_error(f"Invalid yaml in {path or 'config data'}. Error: {e}.", ConfigError)
    if content is None:
        return {}
    if not isinstance(content, dict):
        log_and_raise_error(f"Config {path or 'data'} must be a mapping of sections.", ConfigError)
    return content


def _describe_errors(error: ValidationError) -> str:
    lines = []
    for detail in error.errors():
        key = ".".join(str(part) for part in detail["loc"] if part != "__root__") or "<config>"
        lines.append(f"{key}: {detail['msg']}")
    return "; ".join(lines)


def validate_config(content: Dict[str, Any], source: str = "config") -> ExperimentConfig:
    """
    Validate a config mapping into an ExperimentConfig.

    Raises:
        ConfigError: Every violation, as ``dotted.key: reason``.
    """
    try:
        return ExperimentConfig(**content)
    except ValidationError as e:
        log_and_raise_error(f"Invalid {source}: {_describe_errors(e)}", ConfigError)
    except ValueError as e:
        # constraint helpers shared with datagen raise plain FedBoostErrors
        log_and_raise_error(f"Invalid {source}: {e}", ConfigError)


def parse_config(file: Union[str, Path]) -> ExperimentConfig:
    """Load a config YAML file into a validated ExperimentConfig.

    Args:
        file: Path to configuration file.

    Returns:
        A pydantic validated ExperimentConfig with every default filled in.

    Raises:
        ConfigError: Missing file, invalid yaml or schema violation.
    """
    log("Loading configuration file.", path=str(file))
    if not Path(file).is_file():
        log_and_raise_error(f"Config file {file} does not exist.", ConfigError)
    return validate_config(read_yaml(path=file), source=str(file))
