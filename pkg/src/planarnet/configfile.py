"""Flat key = value documents used for run configs and dataset manifests.

Lines are ``key = value``; blank lines and ``#`` comments are ignored.
Values are kept as strings; callers parse them with the typed helpers below
so error messages can name the offending field.
"""

from __future__ import annotations

__all__ = [
    "ConfigError",
    "parse_kv",
    "read_kv",
    "format_kv",
    "write_kv",
    "get_int",
    "get_float",
    "get_bool",
]


class ConfigError(ValueError):
    """A config document is malformed or a field has an invalid value."""


def parse_kv(text: str) -> dict:
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        fields[key] = value.strip()
    return fields


def read_kv(path) -> dict:
    with open(path) as fh:
        return parse_kv(fh.read())


def format_kv(fields: dict, header: str = "") -> str:
    lines = [f"# {header}"] if header else []
    lines.extend(f"{key} = {value}" for key, value in fields.items())
    return "\n".join(lines) + "\n"


def write_kv(fields: dict, path, header: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(format_kv(fields, header))


def get_int(fields: dict, key: str, default=None) -> int:
    if key not in fields:
        if default is None:
            raise ConfigError(f"missing required field '{key}'")
        return default
    try:
        return int(fields[key])
    except ValueError:
        raise ConfigError(f"field '{key}' must be an integer, got {fields[key]!r}") from None


def get_float(fields: dict, key: str, default=None) -> float:
    if key not in fields:
        if default is None:
            raise ConfigError(f"missing required field '{key}'")
        return default
    try:
        return float(fields[key])
    except ValueError:
        raise ConfigError(f"field '{key}' must be a number, got {fields[key]!r}") from None


def get_bool(fields: dict, key: str, default=None) -> bool:
    if key not in fields:
        if default is None:
            raise ConfigError(f"missing required field '{key}'")
        return default
    value = fields[key].lower()
    if value in ("true", "yes", "1", "on"):
        return True
    if value in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"field '{key}' must be a boolean, got {fields[key]!r}")
