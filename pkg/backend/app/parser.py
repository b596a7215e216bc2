"""
Parser for YAML suite configurations.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import yaml
from pydantic import ValidationError

from .config import config, parse_ladder
from .errors import ConfigError
from .registry import REGISTRY, validate_args
from .schemas import CheckInvocation, SuiteConfig
from .utils import safe_get

logger = logging.getLogger(__name__)

Location = Sequence[Union[str, int]]


class SuiteParser:
    """Parser for suite configuration files."""

    def __init__(self, text: str, source: str = "<config>"):
        """
        Initialize parser with configuration text.

        Args:
            text: YAML document
            source: File name used in diagnostics
        """
        self.text = text
        self.source = source
        self.root: Optional[yaml.Node] = None
        self.data: Dict[str, Any] = {}

    @classmethod
    def from_path(cls, path: Union[str, Path]) -> "SuiteParser":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"Cannot read {path}: {e}")
        return cls(text, source=str(path))

    def _load(self) -> None:
        try:
            self.root = yaml.compose(self.text, Loader=yaml.SafeLoader)
            data = yaml.safe_load(self.text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ConfigError(f"{self.source}: invalid YAML ({getattr(e, 'problem', e)})", None if mark is None else mark.line + 1)
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{self.source}: top level must be a mapping", self.line_of(()))
        self.data = data

    def line_of(self, location: Location) -> Optional[int]:
        """
        1-based line of the deepest node reachable along `location`.

        Args:
            location: Mapping keys and sequence indices, as in pydantic error locations
        """
        node = self.root
        if node is None:
            return None
        line = node.start_mark.line + 1
        for key in location:
            child = None
            if isinstance(node, yaml.MappingNode):
                for key_node, value_node in node.value:
                    if key_node.value == str(key):
                        child = value_node
                        break
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                child = node.value[key]
            if child is None:
                break
            node = child
            line = node.start_mark.line + 1
        return line

    def _fail(self, error: ValidationError, prefix: Location = ()) -> ConfigError:
        first = error.errors()[0]
        location = list(prefix) + list(first["loc"])
        where = ".".join(str(part) for part in location) or "<root>"
        return ConfigError(f"{self.source}: {where}: {first['msg']}", self.line_of(location))

    def _ladder(self, key: str, default: str) -> List[Dict[str, int]]:
        value = self.data.get(key, default)
        try:
            steps = parse_ladder(str(value)) if not isinstance(value, list) else value
        except ValueError as e:
            raise ConfigError(f"{self.source}: {key}: {e}", self.line_of((key,)))
        if steps and isinstance(steps[0], tuple):
            return [{"cells": cells, "levels": levels} for cells, levels in steps]
        return steps

    def get_checks(self) -> List[Dict[str, Any]]:
        """Raw check entries with check names resolved against the registry."""
        checks = self.data.get("checks") or []
        if not isinstance(checks, list):
            raise ConfigError(f"{self.source}: checks must be a list", self.line_of(("checks",)))
        for index, entry in enumerate(checks):
            name = safe_get(entry, "check") if isinstance(entry, dict) else None
            if name is None:
                raise ConfigError(f"{self.source}: checks.{index}: missing 'check' name", self.line_of(("checks", index)))
            if name not in REGISTRY:
                raise ConfigError(
                    f"{self.source}: checks.{index}: unknown check '{name}' (known: {', '.join(sorted(REGISTRY))})",
                    self.line_of(("checks", index, "check")),
                )
        return checks

    def parse(self) -> SuiteConfig:
        """
        Parse and validate the whole configuration.

        Returns:
            SuiteConfig whose check parameters all validate

        Raises:
            ConfigError: With the line of the offending node
        """
        self._load()
        checks = self.get_checks()
        raw = {
            "seed": self.data.get("seed", config.SEED),
            "ladder_1d": self._ladder("ladder_1d", config.LADDER_1D),
            "ladder_2d": self._ladder("ladder_2d", config.LADDER_2D),
            "output_dir": self.data.get("output_dir", config.OUTPUT_DIR),
            "format": self.data.get("format", config.FORMAT),
            "jobs": self.data.get("jobs", config.JOBS),
            "timing": self.data.get("timing", False),
            "checks": checks,
        }
        unknown = sorted(set(self.data) - set(raw))
        if unknown:
            raise ConfigError(f"{self.source}: unknown key '{unknown[0]}'", self.line_of((unknown[0],)))
        try:
            suite = SuiteConfig.model_validate(raw)
        except ValidationError as e:
            raise self._fail(e)

        for index, invocation in enumerate(suite.checks):
            try:
                validate_args(invocation.check, invocation.params)
            except ValidationError as e:
                raise self._fail(e, ("checks", index, "params"))
        logger.debug(f"✓ Parsed {len(suite.checks)} checks from {self.source}")
        return suite


def load_suite(path: Union[str, Path]) -> SuiteConfig:
    """Read and validate a suite configuration file."""
    return SuiteParser.from_path(path).parse()


def invocation_label(invocation: CheckInvocation) -> str:
    return invocation.label or invocation.check
