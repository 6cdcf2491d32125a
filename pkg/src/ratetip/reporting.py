"""Deterministic CSV/JSON emission and flat config-file parsing.

Output files carry no timestamps, hostnames, or library versions:
identical inputs must produce byte-identical files.  Floats print with
repr-shortest formatting via %.12g; non-finite values serialize as the
strings "inf", "-inf", "nan" so the JSON stays strictly standard.
Writes go to a temporary file in the target directory followed by an
atomic rename.
"""

from __future__ import annotations

import json
import math
import os
import tempfile

from .errors import UsageError

FLOAT_FORMAT = "%.12g"


def format_value(value) -> str:
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, columns, metadata=None) -> None:
    """Write named columns with '#'-prefixed metadata lines.

    ``columns`` is a sequence of (name, values); all value sequences
    must share one length.
    """
    names = [name for name, _ in columns]
    series = [list(values) for _, values in columns]
    if len(set(len(s) for s in series)) > 1:
        raise UsageError("CSV columns must have equal length")
    lines = []
    for key, value in (metadata or {}).items():
        lines.append(f"# {key} = {format_value(value)}")
    lines.append(",".join(names))
    for row in zip(*series):
        lines.append(",".join(format_value(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "value") and obj.__class__.__module__ != "builtins":
        return _jsonable(obj.value)  # enums
    return obj


def write_json(path, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True,
                      allow_nan=False)
    _atomic_write(path, text + "\n")


def read_config(path) -> dict:
    """Parse a flat key=value config file; '#' starts a comment."""
    values = {}
    try:
        with open(path) as handle:
            for lineno, raw in enumerate(handle, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(
                        f"{path}:{lineno}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    return values
