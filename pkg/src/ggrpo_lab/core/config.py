"""YAML experiment config loading with line-numbered diagnostics.

The file is parsed twice: `yaml.compose` keeps the node tree (and its source
marks) and `yaml.safe_load` builds the plain data pydantic validates. A
validation error's location path is walked through the node tree to find the
line to report. Missing keys are reported at their parent mapping.
"""

import logging
import os
from pathlib import Path
from typing import Any, Optional, Sequence

import yaml
from pydantic import ValidationError

from .errors import ConfigError, ConfigValueError
from .models import ExperimentConfig

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "GGRPO_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "runs"


def _node_line(root: Optional[yaml.Node], loc: Sequence[Any]) -> Optional[int]:
    """1-based line of the deepest node reachable along `loc`."""
    if root is None:
        return None
    node = root
    for part in loc:
        child = None
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                if key_node.value == str(part):
                    child = value_node
                    break
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int):
            if 0 <= part < len(node.value):
                child = node.value[part]
        if child is None:
            break
        node = child
    return node.start_mark.line + 1


def parse_config(text: str, path: str = "<config>") -> ExperimentConfig:
    """Validate YAML text into an ExperimentConfig or raise ConfigError."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigError(f"invalid YAML: {problem}", path=path, line=line) from e

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", path=path, line=1)

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        loc = first["loc"]
        message = first["msg"]
        cause = first.get("ctx", {}).get("error")
        if isinstance(cause, ConfigValueError):
            loc = tuple(loc) + cause.loc
            message = str(cause)
        key = ".".join(str(part) for part in loc) or None
        if first["type"] == "missing":
            message = f"missing required key '{loc[-1]}'"
        elif first["type"] == "extra_forbidden":
            message = f"unknown key '{loc[-1]}'"
        raise ConfigError(message, path=path, line=_node_line(root, loc), key=key) from e


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate an experiment file."""
    path = Path(path)
    logger.info("Loading config %s", path.resolve())
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror or e}", path=str(path)) from e
    return parse_config(text, str(path))


def resolve_output_dir(config: ExperimentConfig) -> Path:
    """Config value, else $GGRPO_OUTPUT_DIR, else ./runs."""
    return Path(config.output_dir or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)


def dump_config(config: ExperimentConfig) -> str:
    """Effective (defaulted) config as YAML; loading it reproduces the run."""
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False)
