"""Flat key-value config files and named device presets.

The config format is one ``key = value`` pair per line, ``#`` comments,
blank lines ignored.  Keys carry explicit units (``fwhm_ps``,
``rep_period_ns``, ``area_pi``) to keep unit errors out of the physics.
"""

from __future__ import annotations

from importlib import resources

from .errors import ValidationError


def parse_kv_text(text: str) -> dict:
    """Parse flat ``key = value`` text into a dict of python scalars."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValidationError(f"config line {lineno}: empty key")
        out[key] = _coerce(value)
    return out


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def load_config(path) -> dict:
    with open(path) as fh:
        return parse_kv_text(fh.read())


def load_preset(name: str) -> dict:
    """Load a named device preset shipped with the package."""
    ref = resources.files("pnsup").joinpath(f"presets/{name}.cfg")
    if not ref.is_file():
        raise ValidationError(f"unknown preset {name!r}")
    return parse_kv_text(ref.read_text())


def get_float(cfg: dict, key: str, default=None) -> float:
    if key not in cfg:
        if default is None:
            raise ValidationError(f"missing required config key {key!r}")
        return float(default)
    try:
        return float(cfg[key])
    except (TypeError, ValueError):
        raise ValidationError(f"config key {key!r} must be numeric, got {cfg[key]!r}")


def get_int(cfg: dict, key: str, default=None) -> int:
    val = get_float(cfg, key, default)
    if val != int(val):
        raise ValidationError(f"config key {key!r} must be an integer, got {val}")
    return int(val)
