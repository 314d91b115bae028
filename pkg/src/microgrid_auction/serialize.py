"""Deterministic JSON and CSV emission.

Reports must be byte-identical across runs and platforms, so floats are
always printed with repr-equivalent 17 significant digits and dictionaries
are emitted in insertion order. The stdlib json module cannot customize
float formatting, hence the small recursive emitter here.
"""

from __future__ import annotations

import math
from typing import Any


def format_float(value: float) -> str:
    """Shortest-faithful decimal for an IEEE double, 17 significant digits max."""
    if not math.isfinite(value):
        raise ValueError(f"cannot serialize non-finite number {value}")
    if value == int(value) and abs(value) < 1e16:
        return f"{value:.1f}"
    return format(value, ".17g")


def _emit(obj: Any, indent: int, depth: int, out: list[str]) -> None:
    pad = " " * (indent * depth)
    inner = " " * (indent * (depth + 1))
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append('"' + obj.translate(_ESCAPES) + '"')
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for k, (key, value) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {key!r}")
            out.append(f'{inner}"{key.translate(_ESCAPES)}": ')
            _emit(value, indent, depth + 1, out)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for k, value in enumerate(obj):
            out.append(inner)
            _emit(value, indent, depth + 1, out)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


_ESCAPES = {
    ord("\\"): "\\\\",
    ord('"'): '\\"',
    ord("\n"): "\\n",
    ord("\r"): "\\r",
    ord("\t"): "\\t",
}
for _c in range(0x20):
    _ESCAPES.setdefault(_c, f"\\u{_c:04x}")


def dumps(obj: Any, indent: int = 2) -> str:
    """Serialize to JSON with stable key order and 17-digit floats."""
    out: list[str] = []
    _emit(obj, indent, 0, out)
    out.append("\n")
    return "".join(out)


def csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, int):
        return str(value)
    text = str(value)
    if any(ch in text for ch in ',"\n\r'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def to_csv(header: list[str] | tuple[str, ...], rows: list[Any]) -> str:
    """Rows of dicts (keyed by header) or sequences, as deterministic CSV."""
    lines = [",".join(header)]
    for row in rows:
        if isinstance(row, dict):
            lines.append(",".join(csv_cell(row.get(col)) for col in header))
        else:
            if len(row) != len(header):
                raise ValueError(f"row width {len(row)} vs header width {len(header)}")
            lines.append(",".join(csv_cell(v) for v in row))
    return "\n".join(lines) + "\n"
