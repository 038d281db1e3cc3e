"""
JSON and CSV emitters with 17 significant digits, and result-schema checks.
"""

import csv
import io
import json
import logging
import math
import re
from functools import lru_cache
from importlib import resources
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from .errors import ValidationError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
FLOAT_FORMAT = ".17g"

_FLOAT_MARK = "\x00f:"
_FLOAT_TOKEN = re.compile(r'"\\u0000f:([^"]*)"')

_JSON_TYPES = {
    "object": dict,
    "array": list,
    "string": str,
    "boolean": bool,
    "null": type(None),
}


def format_float(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types from results, numpy values and ``to_dict`` objects."""
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(value) for value in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def _mark_floats(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {key: _mark_floats(value) for key, value in obj.items()}
    if isinstance(obj, list):
        return [_mark_floats(value) for value in obj]
    if isinstance(obj, float):
        return _FLOAT_MARK + format_float(obj)
    return obj


def dumps(obj: Any, indent: int = 2) -> str:
    """
    Serialize ``obj`` to JSON with every float printed to 17 significant digits.

    Keys keep insertion order; non-finite floats become null.
    """
    text = json.dumps(_mark_floats(to_jsonable(obj)), indent=indent)
    return _FLOAT_TOKEN.sub(lambda match: match.group(1), text)


def envelope(command: str, result: Any, **extra: Any) -> Dict[str, Any]:
    """Versioned top-level document emitted by every command."""
    document: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "result": to_jsonable(result),
    }
    document.update({key: to_jsonable(value) for key, value in extra.items()})
    return document


def _cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return "" if value is None else value


def table_to_csv(header: Sequence[Any], rows: Iterable[Sequence[Any]]) -> str:
    """CSV text with floats at 17 significant digits."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([_cell(name) for name in header])
    for row in rows:
        writer.writerow([_cell(cell) for cell in row])
    return buffer.getvalue()


@lru_cache(maxsize=None)
def load_schema(name: str = "result.schema.json") -> Dict[str, Any]:
    """Load a schema shipped in ``arbcost_pricing/schemas``."""
    text = resources.files("arbcost_pricing").joinpath("schemas", name).read_text(
        encoding="utf-8"
    )
    schema: Dict[str, Any] = json.loads(text)
    return schema


def _type_matches(value: Any, expected: str) -> bool:
    if expected == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if expected == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, _JSON_TYPES[expected])


def _check(value: Any, schema: Dict[str, Any], path: str, problems: List[str]) -> None:
    expected = schema.get("type")
    if expected is not None:
        allowed = expected if isinstance(expected, list) else [expected]
        if not any(_type_matches(value, kind) for kind in allowed):
            problems.append(f"{path}: expected {expected}, got {type(value).__name__}")
            return
    if "enum" in schema and value not in schema["enum"]:
        problems.append(f"{path}: {value!r} not in {schema['enum']}")
    if "const" in schema and value != schema["const"]:
        problems.append(f"{path}: expected {schema['const']!r}")
    if isinstance(value, dict):
        for key in schema.get("required", []):
            if key not in value:
                problems.append(f"{path}: missing required key '{key}'")
        properties = schema.get("properties", {})
        extra = schema.get("additionalProperties", True)
        for key, item in value.items():
            if key in properties:
                _check(item, properties[key], f"{path}.{key}", problems)
            elif extra is False:
                problems.append(f"{path}: unexpected key '{key}'")
            elif isinstance(extra, dict):
                _check(item, extra, f"{path}.{key}", problems)
    if isinstance(value, list) and "items" in schema:
        for index, item in enumerate(value):
            _check(item, schema["items"], f"{path}[{index}]", problems)


def validate(document: Any, schema: Dict[str, Any]) -> List[str]:
    """Problems found checking ``document`` against the schema subset in use."""
    problems: List[str] = []
    _check(document, schema, "$", problems)
    return problems


def validate_result(document: Any) -> None:
    """
    Check an emitted document against the published result schema.

    Raises:
        ValidationError: listing every problem found
    """
    problems = validate(document, load_schema())
    if problems:
        raise ValidationError("; ".join(problems))
    logger.debug(f"Result document for '{document.get('command')}' matches schema")
