"""
Reusable validation and file helpers used across the model.

These are the single source of truth for field checks on loaded
documents, so the machine, workload, params and table loaders reject bad
input the same way.
"""

import json
import math
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Union

from .exceptions import ConfigFileError, ConfigParseError, InvariantViolationError


PathLike = Union[str, Path]


def validate_count(value: Any, field: str, minimum: int = 0) -> int:
    """
    Validates an integer count.

    Booleans are rejected even though they are ints in Python.

    Args:
        value: The value to check
        field: Field name used in the error
        minimum: Smallest allowed value

    Returns:
        The value unchanged

    Raises:
        InvariantViolationError: If the value is not an int or is too small
    """
    if not isinstance(value, int) or isinstance(value, bool):
        raise InvariantViolationError(field, f"expected an integer count, got {value!r}")
    if value < minimum:
        raise InvariantViolationError(field, f"must be >= {minimum}, got {value}")
    return value


def validate_number(value: Any, field: str) -> float:
    """Validates a finite real number and returns it as float."""
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise InvariantViolationError(field, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise InvariantViolationError(field, f"must be finite, got {value}")
    return float(value)


def validate_positive(value: Any, field: str) -> float:
    """Validates a strictly positive number."""
    number = validate_number(value, field)
    if not number > 0:
        raise InvariantViolationError(field, f"must be > 0, got {value}")
    return number


def validate_non_negative(value: Any, field: str) -> float:
    """Validates a number >= 0."""
    number = validate_number(value, field)
    if not number >= 0:
        raise InvariantViolationError(field, f"must be >= 0, got {value}")
    return number


def validate_fraction(value: Any, field: str) -> float:
    """Validates a fraction in the half-open interval (0, 1]."""
    number = validate_number(value, field)
    if not 0 < number <= 1:
        raise InvariantViolationError(field, f"must be in (0, 1], got {value}")
    return number


def validate_fields(
    document: Dict[str, Any],
    required: Iterable[str],
    source: str,
    optional: Iterable[str] = (),
) -> None:
    """
    Checks that a decoded document has exactly the expected keys.

    Args:
        document: Decoded JSON object
        required: Keys that must be present
        source: Description of the document for error messages
        optional: Keys that may be present

    Raises:
        ConfigParseError: If the document is not an object
        InvariantViolationError: On missing or unknown keys
    """
    if not isinstance(document, dict):
        raise ConfigParseError(source, f"expected an object, got {type(document).__name__}")

    required = list(required)
    allowed = set(required) | set(optional)

    missing = [key for key in required if key not in document]
    if missing:
        raise InvariantViolationError(missing[0], f"required field missing in {source}")

    unknown = sorted(key for key in document if key not in allowed)
    if unknown:
        raise InvariantViolationError(unknown[0], f"unknown field in {source}")


def parse_json(text: str, source: str) -> Any:
    """Decodes JSON text, converting decoder errors to ConfigParseError."""
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParseError(source, str(e))


def read_text(path: PathLike) -> str:
    """
    Reads a UTF-8 text file.

    Raises:
        ConfigFileError: If the file is missing or unreadable
        ConfigParseError: If the file is not valid UTF-8
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise ConfigFileError(str(path), e.strerror or str(e))
    except UnicodeDecodeError as e:
        raise ConfigParseError(str(path), f"not valid UTF-8 ({e.reason} at byte {e.start})")


def write_text_atomic(path: PathLike, text: str) -> None:
    """
    Writes a text file through a temporary sibling and a rename.

    Readers never observe a partially written file.

    Raises:
        ConfigFileError: If the file cannot be written
    """
    path = str(path)
    tmp_path = path + ".tmp"
    try:
        with open(tmp_path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except OSError as e:
        try:
            os.remove(tmp_path)
        except OSError:
            pass
        raise ConfigFileError(path, e.strerror or str(e))
