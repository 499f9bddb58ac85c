"""Layered runtime configuration: flags > environment > config file > defaults.

The config file is a flat ``KEY=VALUE`` text format (``#`` comments and blank
lines ignored); environment variables use the ``REFPROG_`` prefix with the
key upper-cased, e.g. ``REFPROG_TEMPERATURE=0.02``.  The effective settings
are echoed into every JSON report so results stay reproducible.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from .errors import SchemaError
from .interp import PositionTable, default_bank, default_positions, parse_position_table
from .verify import CategoryBank, VerifyConfig

ENV_PREFIX = "REFPROG_"

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


@dataclass
class Settings:
    temperature: float = 0.01
    fixed_threshold: float = 0.5
    top_k_percent: float = 10.0
    property_weight: float = 0.5
    property_beta: float = 1.0
    detection_floor: float = 0.2
    near_scale: float = 1.0
    inside_ratio: float = 0.9
    property_allow_empty: bool = False
    result_rank: str = "detector"
    category_bank: Optional[str] = None  # path; built-in bank when unset
    synonym_table: Optional[str] = None  # path; built-in table when unset
    endpoint_url: Optional[str] = None
    endpoint_auth: Optional[str] = None
    endpoint_model: str = "default"
    max_iters: int = 5
    jobs: int = 1

    def verify_config(self) -> VerifyConfig:
        return VerifyConfig(
            temperature=self.temperature,
            fixed_threshold=self.fixed_threshold,
            top_k_percent=self.top_k_percent,
            property_weight=self.property_weight,
            property_beta=self.property_beta,
            detection_floor=self.detection_floor,
            near_scale=self.near_scale,
            inside_ratio=self.inside_ratio,
            property_allow_empty=self.property_allow_empty,
            result_rank=self.result_rank,
        )

    def bank(self) -> CategoryBank:
        if self.category_bank is None:
            return default_bank()
        text = Path(self.category_bank).read_text("utf-8")
        names = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        return CategoryBank(tuple(names))

    def positions(self) -> PositionTable:
        if self.synonym_table is None:
            return default_positions()
        return parse_position_table(Path(self.synonym_table).read_bytes())

    def to_json(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _coerce(name: str, kind: type, raw: str) -> Any:
    if kind is bool:
        lowered = raw.strip().lower()
        if lowered in _BOOL_TRUE:
            return True
        if lowered in _BOOL_FALSE:
            return False
        raise SchemaError(f"config key {name!r}: expected a boolean, got {raw!r}")
    try:
        if kind is float:
            return float(raw)
        if kind is int:
            return int(raw)
    except ValueError:
        raise SchemaError(f"config key {name!r}: expected a {kind.__name__}, got {raw!r}") from None
    return raw


_FIELD_TYPES = {
    "temperature": float,
    "fixed_threshold": float,
    "top_k_percent": float,
    "property_weight": float,
    "property_beta": float,
    "detection_floor": float,
    "near_scale": float,
    "inside_ratio": float,
    "property_allow_empty": bool,
    "result_rank": str,
    "category_bank": str,
    "synonym_table": str,
    "endpoint_url": str,
    "endpoint_auth": str,
    "endpoint_model": str,
    "max_iters": int,
    "jobs": int,
}


def parse_config_file(text: str) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SchemaError(f"config line {line_no}: expected KEY=VALUE, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in _FIELD_TYPES:
            raise SchemaError(f"config line {line_no}: unknown key {key!r}")
        values[key] = _coerce(key, _FIELD_TYPES[key], value.strip())
    return values


def load_settings(
    config_path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    env: Optional[Mapping[str, str]] = None,
) -> Settings:
    """Merge defaults, the config file, the environment, and explicit overrides."""
    env = os.environ if env is None else env
    merged: Dict[str, Any] = {}
    if config_path is not None:
        merged.update(parse_config_file(Path(config_path).read_text("utf-8")))
    for key, kind in _FIELD_TYPES.items():
        raw = env.get(ENV_PREFIX + key.upper())
        if raw is not None:
            merged[key] = _coerce(key, kind, raw)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    return Settings(**merged)
