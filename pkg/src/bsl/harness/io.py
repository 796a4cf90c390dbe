"""Deterministic artifact writers.

All writes are atomic (temp file in the destination directory renamed
over the target) so concurrent or interrupted runs never leave partial
files. Floats are serialized with repr(), which round-trips exactly, so
re-running an experiment with the same config produces byte-identical
files.
"""

from __future__ import annotations

import json
import os
import tempfile

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "write_csv",
    "read_csv",
    "write_json",
    "read_json",
    "cell",
]


def atomic_write_bytes(path: str, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def cell(value) -> str:
    """One CSV cell: repr for floats, str otherwise, empty for None."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str, rows) -> None:
    """Write rows (first row = header) with LF newlines and '.' decimals."""
    lines = [",".join(cell(v) for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path: str) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        content = fh.read()
    rows = [line.split(",") for line in content.splitlines() if line != ""]
    return rows


def write_json(path: str, obj) -> None:
    atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def read_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
