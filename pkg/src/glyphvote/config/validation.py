import logging
from functools import cache
from typing import Any, TypeVar

from pydantic import TypeAdapter, ValidationError
from pydantic.config import ConfigDict

from glyphvote.exceptions import ConfigurationError, MultiConfigurationError

log = logging.getLogger(__name__)

T = TypeVar("T")


@cache
def _adapter(schema: type[T]) -> TypeAdapter[T]:
    """Return a cached adapter that rejects unknown keys.

    ``__pydantic_config__`` must be in place before the adapter is built,
    pydantic reads it only once.
    """
    setattr(schema, "__pydantic_config__", ConfigDict(extra="forbid"))
    return TypeAdapter(schema)


def validate_and_construct(data: dict[str, Any], schema: type[T]) -> T:
    """Validate raw settings and build the schema instance in one pass.

    Raises
    ------
    ConfigurationError
        If exactly one key is invalid.
    MultiConfigurationError
        If several keys are invalid.
    """
    try:
        return _adapter(schema).validate_python(data)
    except ValidationError as e:
        raise to_ConfigurationError(e) from e


def to_ConfigurationError(
    error: ValidationError,
) -> ConfigurationError | MultiConfigurationError:
    """Convert a pydantic error into one error per offending key.

    The dotted ``loc`` of each pydantic error becomes ``where``, unless the
    message already names the key.
    """
    _MESSAGE_TEMPLATES: dict[str, str] = {
        "unexpected_keyword_argument": "Unknown setting '{field}'",
        "extra_forbidden": "Unknown setting '{field}'",
        "missing": "'{field}' is required",
    }
    config_errors: list[ConfigurationError] = []
    for e in error.errors():
        path = ".".join(str(p) for p in e["loc"])
        field = e["loc"][-1] if e["loc"] else ""
        template = _MESSAGE_TEMPLATES.get(e["type"])
        if template is not None:
            config_errors.append(ConfigurationError(template.format(field=field)))
        else:
            config_errors.append(ConfigurationError(e["msg"], path or None))

    if len(config_errors) == 1:
        return config_errors[0]
    return MultiConfigurationError(config_errors)
