"""Runtime assembly: build every component from one Config."""

from __future__ import annotations

from dataclasses import dataclass

from .config import Config
from .ingest.gateway import IngestGateway
from .platform.service import PlatformService
from .registry.store import RegistryStore
from .sta.service import StaService
from .store.engine import TimeSeriesStore


@dataclass
class AppContext:
    config: Config
    store: TimeSeriesStore
    registry: RegistryStore
    platform: PlatformService
    gateway: IngestGateway
    sta: StaService

    def close(self):
        self.platform.close()
        self.registry.close()
        self.store.close()


def build_context(config: Config, base_url: str | None = None) -> AppContext:
    data = config.data_path
    data.mkdir(parents=True, exist_ok=True)
    store = TimeSeriesStore(
        data,
        compaction_max_wal_bytes=config.store.compaction_max_wal_bytes,
        compaction_max_points=config.store.compaction_max_points,
        fsync=config.store.fsync)
    registry = RegistryStore(data / "registry.db",
                             pid_prefix=config.registry.pid_prefix)
    platform = PlatformService(
        data / "platform.db", store, registry=registry,
        dropdir=config.dropdir_path(),
        bootstrap_admin_token=config.auth.bootstrap_admin_token)
    gateway = IngestGateway(store, platform, qc_hook=platform.notify_ingest,
                            flush_interval_ms=config.ingest.flush_interval_ms)
    if base_url is None:
        base_url = f"http://{config.http.bind}"
    sta = StaService(platform, registry, store, base_url=base_url)
    return AppContext(config, store, registry, platform, gateway, sta)
