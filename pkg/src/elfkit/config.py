"""Plain ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored. Keys use dotted section
prefixes, e.g. ``aircraft.mass = 800`` or ``search.surface_factor = 1.15``.
"""

from __future__ import annotations


class ConfigError(ValueError):
    pass


def parse_keyvalue(text: str, source: str = "<string>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def read_keyvalue(path) -> dict[str, str]:
    with open(path) as fh:
        return parse_keyvalue(fh.read(), str(path))


def section(values: dict[str, str], name: str) -> dict[str, str]:
    """Entries under ``name.`` with the prefix removed."""
    prefix = name + "."
    return {k[len(prefix):]: v for k, v in values.items() if k.startswith(prefix)}
