import hashlib
import json
import os
import string
from typing import Any

# Sentinel value for undefined argument
UNDEFINED = object()


def required_env(name: str, default: Any = UNDEFINED) -> str:
    """Read an environment variable, e.g. the ``QFP_CONFIG`` path.

    Raises KeyError when the variable is unset and no default is given.
    """
    value = os.getenv(name, default)
    if value is UNDEFINED:
        raise KeyError(f"Environment variable {name} is not set")
    return value


def clamp(minimum, value, maximum):
    """Clamp value between given minimum and maximum."""
    return max(minimum, min(value, maximum))


def config_hash(doc: Any, length: int = 12) -> str:
    """Stable short hash of a JSON-serializable document.

    Keys are sorted and separators compacted, so two documents
    with equal content always produce the same hash.

    :param doc: JSON-serializable object
    :param length: number of hex digits to keep
    """
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:length]


def to_label(position: int) -> str:
    """Generate label for position, e.g. A, B, ..., AA, AB, AC, ..."""
    letters = string.ascii_uppercase

    label = ""
    while True:
        position, index = divmod(position, len(letters))
        label = letters[index] + label
        if not position:
            return label
        position -= 1
