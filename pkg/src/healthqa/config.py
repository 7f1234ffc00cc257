"""Flat TOML application config with strict key validation.

Keys are dotted ("bm25.k1"), every key has a typed default, unknown keys
are rejected, and any key can be overridden with --set key=value.
Serialization is canonical: emitting and re-loading a config reproduces
it exactly, so config fingerprints are stable.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .filters import FilterSpec
from .reader import RetrievalConfig


class ConfigError(ValueError):
    pass


# key -> (type, default, allowed values or None); type "optional_int" admits None
_SCHEMA: dict[str, tuple] = {
    "corpus.path": (str, "corpus.jsonl", None),
    "index.path": (str, "index.bin", None),
    "index.fields": (str, "title_abstract", ("title_abstract", "abstract")),
    "bm25.k1": (float, 1.2, None),
    "bm25.b": (float, 0.75, None),
    "retrieval.mode": (str, "document", ("document", "sentence")),
    "retrieval.top_k": (int, 5, None),
    "retrieval.top_j": (int, 5, None),
    "retrieval.pool_size": (int, 20, None),
    "retrieval.min_year": ("optional_int", None, None),
    "retrieval.min_citations": ("optional_int", None, None),
    "retrieval.vote_scheme": (str, "binary", ("binary", "ternary")),
    "retrieval.filter_placement": (str, "post", ("post", "pre")),
    "reader.backend": (str, "fallback", ("service", "fallback")),
    "reader.min_confidence": (float, 0.0, None),
    "service.url": (str, "http://localhost:8080", None),
    "service.timeout_ms": (int, 30000, None),
    "citations.cache": (str, "citations.jsonl", None),
    "citations.rate": (float, 1.0, None),
}


def _check_type(key: str, value):
    kind, _, allowed = _SCHEMA[key]
    if kind == "optional_int":
        if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(f"{key}: expected integer or none, got {value!r}")
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected number, got {value!r}")
        value = float(value)
    elif kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected integer, got {value!r}")
    elif not isinstance(value, kind):
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}")
    if allowed is not None and value not in allowed:
        raise ConfigError(f"{key}: must be one of {allowed}, got {value!r}")
    return value


def _flatten(table: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in table.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, dotted + "."))
        else:
            flat[dotted] = value
    return flat


class AppConfig:
    """Validated configuration; precedence is flags > file > defaults."""

    def __init__(self, values: dict | None = None):
        self._values = {key: default for key, (_, default, _) in _SCHEMA.items()}
        if values:
            unknown = sorted(set(values) - set(_SCHEMA))
            if unknown:
                raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
            for key, value in values.items():
                self._values[key] = _check_type(key, value)

    @classmethod
    def load(cls, path: str | Path) -> "AppConfig":
        with Path(path).open("rb") as f:
            try:
                raw = tomllib.load(f)
            except tomllib.TOMLDecodeError as e:
                raise ConfigError(f"{path}: {e}") from None
        return cls(_flatten(raw))

    def __getitem__(self, key: str):
        try:
            return self._values[key]
        except KeyError:
            raise ConfigError(f"unknown config key: {key}") from None

    def with_overrides(self, assignments: list[str]) -> "AppConfig":
        """Apply "key=value" flag overrides on top of this config."""
        values = dict(self._values)
        for assignment in assignments:
            key, sep, raw = assignment.partition("=")
            if not sep:
                raise ConfigError(f"override must look like key=value: {assignment!r}")
            key = key.strip()
            if key not in _SCHEMA:
                raise ConfigError(f"unknown config key: {key}")
            values[key] = _parse_scalar(raw.strip())
        return AppConfig(values)

    def as_dict(self) -> dict:
        return dict(self._values)

    def canonical_json(self) -> str:
        return json.dumps(self._values, sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def to_toml(self) -> str:
        lines = []
        for key in _SCHEMA:
            value = self._values[key]
            if value is None:
                continue  # absent key means "unset"
            if isinstance(value, bool):
                rendered = "true" if value else "false"
            elif isinstance(value, (int, float)):
                rendered = repr(value)
            else:
                rendered = json.dumps(value, ensure_ascii=False)
            lines.append(f"{key} = {rendered}")
        return "\n".join(lines) + "\n"

    def retrieval_config(self) -> RetrievalConfig:
        return RetrievalConfig(
            mode=self._values["retrieval.mode"],
            top_k=self._values["retrieval.top_k"],
            top_j=self._values["retrieval.top_j"],
            pool_size=self._values["retrieval.pool_size"],
            filter=FilterSpec(min_year=self._values["retrieval.min_year"],
                              min_citations=self._values["retrieval.min_citations"]),
            vote_scheme=self._values["retrieval.vote_scheme"],
            filter_placement=self._values["retrieval.filter_placement"],
        )

    def __eq__(self, other) -> bool:
        return isinstance(other, AppConfig) and self._values == other._values


def _parse_scalar(raw: str):
    low = raw.lower()
    if low in ("none", "null", ""):
        return None
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw
