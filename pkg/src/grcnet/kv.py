"""Flat ``key = value`` text format for dataclass configs.

Lines starting with ``#`` and trailing ``# ...`` comments are ignored. Tuples
are written comma-separated. Values are coerced using the dataclass type hints.
"""

from __future__ import annotations

import dataclasses
import typing
from typing import Any

from .errors import ConfigError


def _coerce(raw: str, hint: Any, key: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union or (origin is not None and type(None) in args):
        inner = [a for a in args if a is not type(None)]
        if raw.lower() in ("", "none"):
            return None
        return _coerce(raw, inner[0], key)
    if origin is tuple:
        item = args[0] if args else str
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        return tuple(_coerce(p, item, key) for p in parts)
    try:
        if hint is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {hint.__name__}") from None
    return raw


def format_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(format_value(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_lines(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def from_mapping(cls, values: dict[str, str], prefix: str = "", strict: bool = True):
    """Build dataclass ``cls`` from string values keyed ``prefix + field``."""
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = prefix + f.name
        if key in values:
            kwargs[f.name] = _coerce(values[key], hints[f.name], key)
    if strict:
        known = {prefix + f.name for f in dataclasses.fields(cls)}
        unknown = [k for k in values if k.startswith(prefix) and k not in known]
        if unknown:
            raise ConfigError(f"unknown key(s): {', '.join(sorted(unknown))}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def to_lines(obj, prefix: str = "", comments: dict[str, str] | None = None) -> list[str]:
    comments = comments or {}
    lines = []
    for f in dataclasses.fields(obj):
        line = f"{prefix}{f.name} = {format_value(getattr(obj, f.name))}"
        note = comments.get(f.name)
        if note:
            line = f"{line:<44} # {note}"
        lines.append(line)
    return lines
