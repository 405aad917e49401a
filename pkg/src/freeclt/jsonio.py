"""JSON encoding of complex scalars and matrices.

Complex numbers are ``[re, im]`` pairs; matrices are row-major nested lists
whose entries are either plain reals or ``[re, im]`` pairs.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import ConfigError

__all__ = ["complex_to_json", "complex_from_json", "matrix_to_json", "matrix_from_json",
           "dumps", "fmt_float"]


def fmt_float(x: float) -> str:
    """17 significant digits, locale independent."""
    return format(float(x), ".17g")


def complex_to_json(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def complex_from_json(obj) -> complex:
    if isinstance(obj, bool):
        raise ConfigError("booleans are not numbers")
    if isinstance(obj, (int, float)):
        return complex(obj)
    if isinstance(obj, (list, tuple)) and len(obj) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
        return complex(obj[0], obj[1])
    raise ConfigError(f"cannot read complex number from {obj!r}")


def matrix_to_json(a) -> list:
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    return [[complex_to_json(v) for v in row] for row in a]


def matrix_from_json(obj) -> np.ndarray:
    """Square complex matrix; a bare number is read as a 1x1 matrix."""
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return np.array([[complex(obj)]])
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ConfigError(f"matrix must be a non-empty list of rows, got {obj!r}")
    rows = [[complex_from_json(v) for v in row] for row in obj]
    m = len(rows)
    if any(len(r) != m for r in rows):
        raise ConfigError("matrix must be square")
    out = np.array(rows, dtype=complex)
    if not np.all(np.isfinite(out)):
        raise ConfigError("matrix has non-finite entries")
    return out


def _default(o):
    if isinstance(o, np.ndarray):
        if np.iscomplexobj(o):
            return matrix_to_json(o) if o.ndim == 2 else [complex_to_json(v) for v in o.ravel()]
        return o.tolist()
    if isinstance(o, complex):
        return complex_to_json(o)
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _round(o):
    if isinstance(o, (np.ndarray, complex, np.generic)):
        return _round(_default(o))
    if isinstance(o, dict):
        return {str(k): _round(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_round(v) for v in o]
    return o


def _emit(o, indent: int, level: int) -> str:
    # the stdlib encoder always uses repr() for floats, so floats are formatted here
    if isinstance(o, bool) or o is None:
        return json.dumps(o)
    if isinstance(o, float):
        return "null" if not math.isfinite(o) else fmt_float(o)
    if isinstance(o, (int, str)):
        return json.dumps(o)
    if isinstance(o, list):
        return "[" + ", ".join(_emit(v, indent, level + 1) for v in o) + "]"
    if isinstance(o, dict):
        if not o:
            return "{}"
        pad = " " * (indent * (level + 1))
        items = [f"{pad}{json.dumps(k)}: {_emit(o[k], indent, level + 1)}" for k in sorted(o)]
        return "{\n" + ",\n".join(items) + "\n" + " " * (indent * level) + "}"
    raise TypeError(f"not JSON serializable: {type(o)}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON: sorted keys, 17-significant-digit floats, inline arrays."""
    return _emit(_round(obj), indent, 0)
