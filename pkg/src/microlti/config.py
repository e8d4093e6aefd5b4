"""Service configuration: key-value config file with environment overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .launch import DEFAULT_SESSION_TTL
from .oauth1 import DEFAULT_TIMESTAMP_WINDOW

ENV_PREFIX = "MICROLTI_"


@dataclass
class ServiceConfig:
    listen: str = "127.0.0.1:8000"
    storage_path: Path = Path("./microlti-data")
    timestamp_window: int = DEFAULT_TIMESTAMP_WINDOW
    session_ttl: int = DEFAULT_SESSION_TTL
    authoring_tokens: dict[str, str] = field(default_factory=dict)
    external_base_url: str = "http://127.0.0.1:8000"

    def __post_init__(self) -> None:
        if self.timestamp_window <= 0:
            raise ValueError("timestamp_window must be positive")
        if self.session_ttl <= 0:
            raise ValueError("session_ttl must be positive")
        self.storage_path = Path(self.storage_path)
        self.external_base_url = self.external_base_url.rstrip("/")


def parse_config_text(text: str) -> dict[str, str]:
    """``key = value`` lines; blank lines and #-comments ignored."""
    values: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {line_no} is not key = value: {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def parse_authoring_tokens(raw: str) -> dict[str, str]:
    """Comma-separated ``name:token`` pairs."""
    tokens: dict[str, str] = {}
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        name, sep, token = chunk.partition(":")
        if not sep or not name.strip() or not token.strip():
            raise ValueError(f"authoring token entry must be name:token, got {chunk!r}")
        tokens[name.strip()] = token.strip()
    return tokens


def load_config(path: str | Path | None = None, env: dict[str, str] | None = None) -> ServiceConfig:
    """Build the config from an optional file, then apply MICROLTI_* overrides."""
    env = os.environ if env is None else env
    values: dict[str, str] = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    for key in ("listen", "storage_path", "timestamp_window", "session_ttl", "authoring_tokens", "external_base_url"):
        override = env.get(ENV_PREFIX + key.upper())
        if override is not None:
            values[key] = override

    config = ServiceConfig()
    if "listen" in values:
        config.listen = values["listen"]
    if "storage_path" in values:
        config.storage_path = Path(values["storage_path"])
    if "timestamp_window" in values:
        config.timestamp_window = int(values["timestamp_window"])
    if "session_ttl" in values:
        config.session_ttl = int(values["session_ttl"])
    if "authoring_tokens" in values:
        config.authoring_tokens = parse_authoring_tokens(values["authoring_tokens"])
    if "external_base_url" in values:
        config.external_base_url = values["external_base_url"].rstrip("/")
    if config.timestamp_window <= 0:
        raise ValueError("timestamp_window must be positive")
    if config.session_ttl <= 0:
        raise ValueError("session_ttl must be positive")
    return config
