"""File backed settings.

Settings resolve in three layers: the dataclass defaults, the YAML file and
explicit overrides (usually command line flags), later layers winning.
"""

from __future__ import annotations

import logging
import os
from collections.abc import Mapping
from dataclasses import MISSING, asdict, fields
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, get_args, get_origin, get_type_hints

import yaml

from glyphvote.exceptions import ConfigurationError
from glyphvote.utils import merge_dicts

from .schema import Settings
from .validation import validate_and_construct

log = logging.getLogger(__name__)

CONFIG_ENV = "GLYPH_CONFIG_FILE"
DEBUG_DUMP_ENV = "GLYPH_DEBUG_DUMP"


class SettingsFile:
    """The optional YAML settings file.

    A missing file is not an error; defaults apply.
    """

    path: Path

    def __init__(self, path: Path | str | None = None):
        self.path = Path(path) if path is not None else self.get_file()

    @staticmethod
    def get_file() -> Path:
        """Path named by ``GLYPH_CONFIG_FILE``, ``./glyphvote.yaml`` otherwise."""
        return (
            Path(os.environ.get(CONFIG_ENV, "./glyphvote.yaml")).expanduser().resolve()
        )

    def read(self) -> dict[str, Any]:
        """Raw key/value pairs of the file, empty if it does not exist."""
        if not self.path.exists():
            return {}
        log.debug(f"Loading settings file: {self.path}")
        with open(self.path) as file:
            data = yaml.safe_load(file)
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigurationError(
                f"Expected a mapping of settings, got {type(data).__name__}",
                where=str(self.path),
            )
        return data

    def load(self, overrides: Mapping[str, Any] | None = None) -> Settings:
        """Resolve settings: defaults, then the file, then ``overrides``.

        ``None`` valued overrides are ignored so unset flags keep the file's
        value. ``GLYPH_DEBUG_DUMP=1`` switches debug dumps on regardless.
        """
        data = asdict(Settings())
        merge_dicts(data, self.read(), priority="b")
        merge_dicts(data, overrides or {}, priority="b", skip_none=True)
        if os.environ.get(DEBUG_DUMP_ENV) == "1":
            data["debug_dump"] = True
        return validate_and_construct(data, Settings)

    def write_default(self, force: bool = False) -> None:
        """Write the commented defaults to the file."""
        if self.path.exists():
            if not force:
                raise FileExistsError(f"Settings file {self.path} already exists")
            log.warning(f"Settings file {self.path} already exists. Overwriting!")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(default_yaml())
        log.info(f"Settings file created at '{self.path}'")


def _plain(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return value.as_posix()
    return value


def settings_to_dict(settings: Settings) -> dict[str, Any]:
    """Settings as YAML friendly primitives."""
    return {key: _plain(value) for key, value in asdict(settings).items()}


def default_yaml() -> str:
    """The defaults as YAML, each key preceded by its comment if it has one."""
    hints = get_type_hints(Settings, include_extras=True)
    lines: list[str] = []
    for f in fields(Settings):
        hint = hints[f.name]
        if get_origin(hint) is Annotated:
            lines += [f"# {c}" for c in get_args(hint)[1:] if isinstance(c, str)]
        default = f.default if f.default is not MISSING else f.default_factory()  # type: ignore[misc]
        lines.append(yaml.safe_dump({f.name: _plain(default)}).rstrip("\n"))
    return "\n".join(lines) + "\n"
