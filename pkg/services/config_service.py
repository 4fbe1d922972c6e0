"""
Sectioned key = value experiment configs.

Grammar, one statement per line:

    # comment                 (from '#' to end of line, anywhere)
    [section]                 run | innovation | coefficients | series | estimators
    key = value               key matches [a-z][a-z0-9_]*; lists are comma separated

Every key belongs to the last section header above it. Values are validated by
the pydantic models of schemas.experiment; omitted keys take their defaults.
"""
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ValidationError

from core.exceptions import ConfigException
from schemas.experiment import ExperimentConfig

logger = logging.getLogger(__name__)

SECTIONS = tuple(ExperimentConfig.model_fields)

_SECTION = re.compile(r"^\[\s*([^\]]*?)\s*\]$")
_KEY = re.compile(r"^[a-z][a-z0-9_]*$")


@dataclass(frozen=True)
class ConfigIssue:
    message: str
    location: str = ""
    line: Optional[int] = None

    def __str__(self) -> str:
        where = self.location or "config"
        if self.line is not None:
            where = f"{where} (line {self.line})"
        return f"{where}: {self.message}"


class ConfigService:
    """Parser and canonical renderer of experiment configs."""

    def parse_config(self, text: str) -> ExperimentConfig:
        """
        Parse and validate a config text, reporting every problem at once.

        Args:
            text: Config text

        Returns:
            Validated ExperimentConfig with defaults filled in

        Raises:
            ConfigException: With one ConfigIssue per syntax or validation error
        """
        data: dict[str, dict[str, str]] = {}
        lines: dict[tuple[str, str], int] = {}
        issues: list[ConfigIssue] = []
        section: Optional[str] = None
        skipping = False

        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            header = _SECTION.match(line)
            if header:
                name = header.group(1)
                skipping = name not in SECTIONS
                if skipping:
                    issues.append(ConfigIssue(
                        f"unknown section [{name}], expected one of {', '.join(SECTIONS)}", line=number,
                    ))
                    section = None
                else:
                    section = name
                    data.setdefault(section, {})
                continue
            if skipping:
                continue
            if "=" not in line:
                issues.append(ConfigIssue(f"expected 'key = value', got {line!r}", line=number))
                continue
            key, value = (part.strip() for part in line.split("=", 1))
            if section is None:
                issues.append(ConfigIssue(f"key '{key}' appears before any section header", line=number))
                continue
            location = f"{section}.{key}"
            if not _KEY.match(key):
                issues.append(ConfigIssue("keys must be lowercase snake case", location, number))
                continue
            if (section, key) in lines:
                first = lines[(section, key)]
                issues.append(ConfigIssue(f"duplicate key on lines {first} and {number}", location, number))
                continue
            lines[(section, key)] = number
            data[section][key] = value

        try:
            config = ExperimentConfig.model_validate(data)
        except ValidationError as exc:
            issues.extend(_issue_from_error(error, lines) for error in exc.errors())
            config = None
        if issues:
            raise ConfigException(issues)
        logger.debug("Parsed config for experiment %s", config.run.name)
        return config

    def render_config(self, config: ExperimentConfig) -> str:
        """Canonical text of a config; parse_config(render_config(c)) == c."""
        blocks = []
        for section in SECTIONS:
            model: BaseModel = getattr(config, section)
            body = [f"[{section}]"]
            for key in type(model).model_fields:
                value = getattr(model, key)
                if value is not None:
                    body.append(f"{key} = {_render_value(value)}")
            blocks.append("\n".join(body))
        return "\n\n".join(blocks) + "\n"


def _render_value(value: Any) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_render_value(item) for item in value)
    if isinstance(value, Path):
        return value.as_posix()
    return str(value)


def _issue_from_error(error: dict, lines: dict[tuple[str, str], int]) -> ConfigIssue:
    loc = tuple(str(part) for part in error["loc"])
    message = error["msg"]
    if error["type"] == "extra_forbidden":
        message = "unknown key"
    elif error["type"] == "missing":
        message = "required key is missing" if len(loc) > 1 else "required section is missing"
    if message.startswith("Value error, "):
        message = message[len("Value error, "):]
    location = ".".join(loc[:2])
    line = lines.get(loc[:2]) if len(loc) >= 2 else None
    if len(loc) > 2:
        message = f"item {loc[2]}: {message}"
    return ConfigIssue(message, location, line)
