from .file import SettingsFile, default_yaml, settings_to_dict
from .schema import Protocol, RunConfig, Settings
from .validation import to_ConfigurationError, validate_and_construct

__all__ = [
    "Protocol",
    "RunConfig",
    "Settings",
    "SettingsFile",
    "default_yaml",
    "settings_to_dict",
    "to_ConfigurationError",
    "validate_and_construct",
]
