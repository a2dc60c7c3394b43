"""Runtime configuration: file (JSON or key=value lines) + PF_* env overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

ENV_PREFIX = "PF_"


@dataclass
class AppConfig:
    store_root: str = "store"
    model_path: str | None = None
    detector_path: str | None = None
    confusions_path: str | None = None
    score_threshold: float = 0.5
    prob_threshold: float = 0.5
    nms_iou: float = 0.1
    adapt_threshold: float = 0.6
    fuzz_default: float = 0.0
    plate_w: int = 240
    plate_h: int = 80
    async_ingest: bool = False
    port: int = 8077


_TRUTHY = {"1", "true", "yes", "on"}
_FALSY = {"0", "false", "no", "off"}


def _coerce(name: str, kind: type, raw: str):
    if kind is bool:
        lowered = raw.strip().lower()
        if lowered in _TRUTHY:
            return True
        if lowered in _FALSY:
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def _field_types() -> dict[str, type]:
    kinds: dict[str, type] = {}
    for f in fields(AppConfig):
        if f.type in ("str", "str | None"):
            kinds[f.name] = str
        elif f.type == "bool":
            kinds[f.name] = bool
        elif f.type == "int":
            kinds[f.name] = int
        else:
            kinds[f.name] = float
    return kinds


def _parse_file(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ValueError(f"{path}: config JSON must be an object")
        return doc
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


def load_config(path: str | Path | None = None, environ: dict | None = None) -> AppConfig:
    """Build config from an optional file, then apply PF_* env overrides."""
    environ = os.environ if environ is None else environ
    kinds = _field_types()
    config = AppConfig()

    if path is not None:
        for key, raw in _parse_file(Path(path)).items():
            if key not in kinds:
                raise ValueError(f"unknown config key {key!r}")
            value = raw if not isinstance(raw, str) else _coerce(key, kinds[key], raw)
            setattr(config, key, value)

    for name, kind in kinds.items():
        env_key = ENV_PREFIX + name.upper()
        if env_key in environ:
            setattr(config, name, _coerce(env_key, kind, environ[env_key]))
    return config
