"""CSV/JSON export with exact round-tripping.

Tables are written as a '#'-prefixed metadata block (key = JSON value), one
header line naming the columns, and rows with floats at 17 significant
digits, so every float64 survives a write/read cycle bit-exactly and files
from identical runs are byte-identical (no timestamps).  Each table gets a
machine-readable JSON sidecar at <path>.meta.json.
"""

from __future__ import annotations

import json
import os

import numpy as np

from . import __version__
from .errors import ValidationError

__all__ = ["write_table", "read_table", "sidecar_path", "write_sidecar", "read_sidecar"]

_FLOAT_FMT = "%.17g"


def _format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return _FLOAT_FMT % float(x)
    s = str(x)
    if "," in s or "\n" in s:
        raise ValidationError(f"cell value {s!r} would corrupt the CSV layout")
    return s


def write_table(path: str, columns: dict, metadata: dict) -> None:
    """Write named columns to CSV with a metadata comment block."""
    names = list(columns)
    arrays = [np.asarray(columns[name]) for name in names]
    if not arrays:
        raise ValidationError("need at least one column")
    length = arrays[0].shape[0]
    if any(arr.shape[0] != length for arr in arrays):
        raise ValidationError("all columns must have equal length")

    lines = [f"# tool = rabi-lab {__version__}"]
    for key, value in metadata.items():
        lines.append(f"# {key} = {json.dumps(value, sort_keys=True)}")
    lines.append(",".join(names))
    for i in range(length):
        lines.append(",".join(_format_value(arr[i]) for arr in arrays))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_column(raw: list[str]) -> np.ndarray:
    try:
        return np.array([int(x) for x in raw])
    except ValueError:
        pass
    try:
        return np.array([float(x) for x in raw])
    except ValueError:
        return np.array(raw, dtype=object)


def read_table(path: str):
    """Parse a table written by write_table: (metadata, {name: array})."""
    metadata: dict = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    key = key.strip()
                    value = value.strip()
                    try:
                        metadata[key] = json.loads(value)
                    except json.JSONDecodeError:
                        metadata[key] = value
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append(line.split(","))
    if header is None:
        raise ValidationError(f"{path} contains no table header")
    if any(len(r) != len(header) for r in rows):
        raise ValidationError(f"{path} has ragged rows")
    columns = {
        name: _parse_column([r[j] for r in rows]) for j, name in enumerate(header)
    }
    return metadata, columns


def sidecar_path(path: str) -> str:
    return path + ".meta.json"


def write_sidecar(path: str, payload: dict) -> None:
    payload = dict(payload)
    payload.setdefault("tool", f"rabi-lab {__version__}")
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_sidecar(path: str) -> dict:
    with open(sidecar_path(path), "r", encoding="utf-8") as fh:
        return json.load(fh)


def ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    if parent and not os.path.isdir(parent):
        raise ValidationError(f"output directory {parent} does not exist")
