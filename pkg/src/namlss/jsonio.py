"""Deterministic JSON emission.

Stdlib ``json`` serializes floats via ``repr``; the model and report
documents instead format every float with 17 significant digits, which
is both byte-stable across runs and exactly round-trippable back to the
same float64.  Parsing stays stdlib.
"""

import json

import numpy as np

from .errors import FormatError, NumericError


def _format_float(v: float) -> str:
    if not np.isfinite(v):
        raise NumericError(f"cannot serialize non-finite value {v!r}")
    s = format(v, ".17g")
    if "." not in s and "e" not in s and "E" not in s:
        s += ".0"
    return s


def dumps(obj) -> str:
    """Serialize to compact JSON with sorted keys and .17g floats."""
    parts = []
    _write(obj, parts)
    return "".join(parts)


def _write(obj, parts):
    if obj is None or obj is True or obj is False:
        parts.append(json.dumps(obj))
    elif isinstance(obj, (np.floating, float)):
        parts.append(_format_float(float(obj)))
    elif isinstance(obj, (np.integer, int)):
        parts.append(str(int(obj)))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _write(obj.tolist(), parts)
    elif isinstance(obj, dict):
        parts.append("{")
        first = True
        for k in sorted(obj):
            if not isinstance(k, str):
                raise FormatError(f"JSON object keys must be strings, got {k!r}")
            if not first:
                parts.append(",")
            first = False
            parts.append(json.dumps(k))
            parts.append(":")
            _write(obj[k], parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(obj):
            if i:
                parts.append(",")
            _write(item, parts)
        parts.append("]")
    else:
        raise FormatError(f"cannot serialize {type(obj).__name__}")


def loads(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed JSON document: {exc}") from None
