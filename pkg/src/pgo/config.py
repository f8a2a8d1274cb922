"""Operator configuration: a flat JSON document with a fixed key set.

Unknown keys are rejected so typos fail loudly instead of silently falling
back to defaults. The path comes from ``--config`` or the ``PGO_CONFIG``
environment variable; with neither, built-in defaults apply.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields as dataclass_fields
from fractions import Fraction

from .cct import DEFAULT_LIBRARY_MARKERS, PathMapping

PGO_CONFIG_ENV = "PGO_CONFIG"

TWELVE_HOURS_MS = 43_200_000


class ConfigError(ValueError):
    """Bad config file: unknown key, wrong type, or out-of-range value."""


@dataclass(frozen=True)
class CollectorSink:
    mode: str = "dir"  # "dir" | "http"
    location: str = "collector-inbox"


@dataclass(frozen=True)
class Config:
    app_root: str = "."
    library_roots: tuple[str, ...] = DEFAULT_LIBRARY_MARKERS
    sampling_hz: float = 100.0
    gate_threshold: Fraction = Fraction(1, 10)
    utilization_threshold: Fraction = Fraction(1, 50)
    min_init_share: Fraction = Fraction(1, 20)
    epsilon: Fraction = Fraction(1, 500)
    window_ms: int = TWELVE_HOURS_MS
    denylist: tuple[str, ...] = ()
    collector: CollectorSink = field(default_factory=CollectorSink)

    def __post_init__(self) -> None:
        for name in ("gate_threshold", "utilization_threshold", "min_init_share", "epsilon"):
            value = getattr(self, name)
            if not isinstance(value, Fraction):
                value = Fraction(str(value))
                object.__setattr__(self, name, value)
            if not (0 < value < 1):
                raise ConfigError(f"{name} must be in (0, 1), got {float(value)}")
        if not (1 <= self.sampling_hz <= 1000):
            raise ConfigError(f"sampling_hz must be in [1, 1000], got {self.sampling_hz}")
        if self.window_ms < 60_000:
            raise ConfigError(f"window_ms must be >= 60000, got {self.window_ms}")
        if self.collector.mode not in ("dir", "http"):
            raise ConfigError(f"collector.mode must be 'dir' or 'http', got {self.collector.mode!r}")

    def path_mapping(self) -> PathMapping:
        markers = tuple(r for r in self.library_roots if "/" not in r and "\\" not in r)
        vendors = tuple(r for r in self.library_roots if r not in markers)
        return PathMapping(app_root=self.app_root, library_markers=markers or DEFAULT_LIBRARY_MARKERS,
                           vendor_roots=vendors)


_LIST_KEYS = {"library_roots", "denylist"}


def _config_from_dict(raw: dict, source: str) -> Config:
    known = {f.name for f in dataclass_fields(Config)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{source}: unknown config key(s): {', '.join(sorted(unknown))}")

    kwargs: dict = {}
    for key, value in raw.items():
        if key in _LIST_KEYS:
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise ConfigError(f"{source}: {key} must be a list of strings")
            kwargs[key] = tuple(value)
        elif key == "collector":
            if not isinstance(value, dict):
                raise ConfigError(f"{source}: collector must be an object")
            extra = set(value) - {"mode", "location"}
            if extra:
                raise ConfigError(f"{source}: unknown collector key(s): {', '.join(sorted(extra))}")
            kwargs[key] = CollectorSink(**value)
        else:
            kwargs[key] = value
    try:
        return Config(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path: str | None = None) -> Config:
    """Load configuration from a file, the PGO_CONFIG fallback, or defaults."""
    if path is None:
        path = os.environ.get(PGO_CONFIG_ENV)
    if path is None:
        return Config()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return _config_from_dict(raw, path)


def config_digest(cfg: Config) -> str:
    payload = {
        "app_root": cfg.app_root,
        "library_roots": list(cfg.library_roots),
        "sampling_hz": cfg.sampling_hz,
        "gate_threshold": str(cfg.gate_threshold),
        "utilization_threshold": str(cfg.utilization_threshold),
        "min_init_share": str(cfg.min_init_share),
        "epsilon": str(cfg.epsilon),
        "window_ms": cfg.window_ms,
        "denylist": list(cfg.denylist),
        "collector": {"mode": cfg.collector.mode, "location": cfg.collector.location},
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
