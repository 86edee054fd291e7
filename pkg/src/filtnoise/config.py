"""Sectioned key-value run configuration with ``%include`` support.

A line ``%include other.ini`` is replaced by the contents of that file,
resolved relative to the including file. Later keys override earlier ones.
"""

from __future__ import annotations

import configparser
import math
from pathlib import Path

from .errors import ConfigError, MissingInputError


def _expand(path: Path, seen):
    path = path.resolve()
    if path in seen:
        raise ConfigError(f"include cycle through {path}")
    if not path.exists():
        raise MissingInputError(f"missing config file: {path}")
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        s = line.strip()
        if s.startswith("%include"):
            target = s[len("%include"):].strip()
            if not target:
                raise ConfigError(f"{path}: empty include")
            out.extend(_expand(path.parent / target, seen | {path}))
        else:
            out.append(line)
    return out


class Config:
    """Read-only view of a parsed configuration with typed getters."""

    def __init__(self, parser: configparser.ConfigParser, source=None):
        self._p = parser
        self.source = source

    @classmethod
    def load(cls, path):
        text = "\n".join(_expand(Path(path), frozenset()))
        return cls.from_string(text, source=str(path))

    @classmethod
    def from_string(cls, text, source=None):
        p = configparser.ConfigParser(interpolation=None, strict=False)
        try:
            p.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from None
        return cls(p, source)

    def has(self, section, key=None):
        if key is None:
            return self._p.has_section(section)
        return self._p.has_option(section, key)

    def _raw(self, section, key, default):
        if self._p.has_option(section, key):
            return self._p.get(section, key).strip()
        if default is _REQUIRED:
            raise ConfigError(f"missing [{section}] {key}")
        return default

    def get(self, section, key, default=None):
        return self._raw(section, key, _REQUIRED if default is _REQUIRED else default)

    def int(self, section, key, default=None):
        v = self._raw(section, key, _REQUIRED if default is None else default)
        try:
            return int(v)
        except (TypeError, ValueError):
            raise ConfigError(f"[{section}] {key} must be an integer, got {v!r}") from None

    def float(self, section, key, default=None):
        v = self._raw(section, key, _REQUIRED if default is None else default)
        try:
            out = float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"[{section}] {key} must be a number, got {v!r}") from None
        if math.isnan(out):
            raise ConfigError(f"[{section}] {key} is NaN")
        return out

    def pairs(self, section, key, default=""):
        """Parse ``"3,4; 6,8"`` into ``[(3, 4), (6, 8)]``."""
        v = self._raw(section, key, default)
        out = []
        for item in filter(None, (s.strip() for s in v.split(";"))):
            try:
                a, b = (int(x) for x in item.split(","))
            except ValueError:
                raise ConfigError(f"[{section}] {key}: bad pair {item!r}") from None
            out.append((a, b))
        return out

    def as_dict(self):
        return {s: dict(self._p.items(s)) for s in self._p.sections()}


_REQUIRED = object()
