"""Service configuration.

A single TOML file drives every subcommand.  Everything has a default
except the data directory, so a minimal config is one line.  The CLI
also honors the FAIRSTREAM_CONFIG environment variable.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # py3.10
    import tomli as tomllib


@dataclass
class StoreConfig:
    compaction_max_wal_bytes: int = 4 * 1024 * 1024
    compaction_max_points: int = 10_000
    fsync: bool = False


@dataclass
class MqttConfig:
    enabled: bool = False
    host: str = "localhost"
    port: int = 1883
    topic_prefix: str = "fs/ingest"
    client_id: str = "fairstream-gateway"


@dataclass
class IngestConfig:
    dropdir: str = ""
    flush_interval_ms: int = 1000


@dataclass
class HttpConfig:
    bind: str = "127.0.0.1:8421"


@dataclass
class AuthConfig:
    bootstrap_admin_token: str = ""


@dataclass
class RegistryConfig:
    pid_prefix: str = "20.500.0000"


@dataclass
class Config:
    data_dir: str = "./data"
    http: HttpConfig = field(default_factory=HttpConfig)
    mqtt: MqttConfig = field(default_factory=MqttConfig)
    ingest: IngestConfig = field(default_factory=IngestConfig)
    store: StoreConfig = field(default_factory=StoreConfig)
    auth: AuthConfig = field(default_factory=AuthConfig)
    registry: RegistryConfig = field(default_factory=RegistryConfig)

    @property
    def data_path(self) -> Path:
        return Path(self.data_dir)

    def dropdir_path(self) -> Path:
        if self.ingest.dropdir:
            return Path(self.ingest.dropdir)
        return self.data_path / "drop"


def _apply(section_obj, values: dict, section_name: str):
    for key, value in values.items():
        if not hasattr(section_obj, key):
            raise ValueError(f"unknown config key: {section_name}.{key}")
        setattr(section_obj, key, value)


def load_config(path: str | os.PathLike) -> Config:
    """Load a TOML config file; unknown keys are rejected loudly."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    cfg = Config()
    sections = {
        "http": cfg.http,
        "mqtt": cfg.mqtt,
        "ingest": cfg.ingest,
        "store": cfg.store,
        "auth": cfg.auth,
        "registry": cfg.registry,
    }
    for key, value in raw.items():
        if key in sections:
            if not isinstance(value, dict):
                raise ValueError(f"config section [{key}] must be a table")
            _apply(sections[key], value, key)
        elif key == "data_dir":
            cfg.data_dir = str(value)
        else:
            raise ValueError(f"unknown config key: {key}")
    return cfg
