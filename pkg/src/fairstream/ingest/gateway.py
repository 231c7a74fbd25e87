"""Transport funnel: authenticate, parse, route into the store.

Every observation enters through exactly one of three paths -- HTTP
push, MQTT publish, drop directory -- and all of them go through
`_ingest_rows` only after a credential check for the Thing on that
transport has passed.  Duplicate payloads are harmless because the
store upserts on (datastream, timestamp).
"""

from __future__ import annotations

import hashlib
import logging
import shutil
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import FairstreamError, NotFoundError
from ..timeutil import now_ns
from .credentials import verify_secret
from .profiles import ParserProfile, PayloadUndecodable, RowError, parse_payload

logger = logging.getLogger(__name__)


class UnknownThing(NotFoundError):
    def __init__(self, uuid):
        super().__init__(f"unknown thing: {uuid}")


class AuthMismatch(FairstreamError):
    pass


@dataclass
class ThingInfo:
    uuid: str
    transport: str
    profile: ParserProfile
    datastreams: dict  # position -> datastream id


@dataclass
class IngestReport:
    accepted: int = 0
    errors: list = field(default_factory=list)

    def to_dict(self):
        return {"accepted": self.accepted,
                "errors": [e.to_dict() for e in self.errors]}


@dataclass
class DropFileReport:
    thing_uuid: str
    filename: str
    status: str          # processed | failed | duplicate
    accepted: int = 0
    row_errors: int = 0
    reason: str = ""


class IngestGateway:
    """Single ingest funnel over one TimeSeriesStore.

    resolver must provide thing_info(uuid) -> ThingInfo | None and
    verify_credential(transport, username, secret) -> thing_uuid | None.
    qc_hook(thing_uuid, datastream_ids) fires after data became durable
    (the on_ingest QC trigger).
    """

    def __init__(self, store, resolver, qc_hook=None, flush_interval_ms=1000):
        self.store = store
        self.resolver = resolver
        self.qc_hook = qc_hook
        self.flush_interval_ms = flush_interval_ms
        self.auth_failures = 0
        self._auth_cache = {}
        self._mqtt_buffers = defaultdict(list)   # uuid -> [ParsedRow]
        self._mqtt_acks = defaultdict(list)      # uuid -> [callable]
        self._mqtt_lock = threading.Lock()

    # -- shared plumbing -----------------------------------------------------

    def _verify(self, transport, username, secret):
        """Credential check with an in-memory cache keyed on a digest,
        so the KDF cost is paid once per (username, secret)."""
        key = (transport, username,
               hashlib.sha256(secret.encode()).hexdigest())
        uuid = self._auth_cache.get(key)
        if uuid is not None:
            return uuid
        uuid = self.resolver.verify_credential(transport, username, secret)
        if uuid is not None:
            self._auth_cache[key] = uuid
        return uuid

    def _ingest_rows(self, info: ThingInfo, rows, errors, received_at) -> IngestReport:
        """Route parsed rows into per-datastream appends; auth already passed."""
        report = IngestReport(errors=list(errors))
        by_position = defaultdict(list)
        for row in rows:
            by_position[row.position].append(row)
        touched = []
        for position, batch in by_position.items():
            ds_id = info.datastreams.get(position)
            if ds_id is None:
                report.errors.extend(
                    RowError(r.line, f"unknown position:{position}") for r in batch)
                continue
            ts = np.fromiter((r.timestamp for r in batch), np.int64, len(batch))
            vs = np.fromiter((r.value for r in batch), np.float64, len(batch))
            result = self.store.append(ds_id, ts, vs, received_at=received_at)
            report.accepted += result.accepted
            touched.append(ds_id)
        if touched and self.qc_hook is not None:
            self.qc_hook(info.uuid, touched)
        return report

    def replay_rows(self, info: ThingInfo, rows, errors) -> IngestReport:
        """Operator replay path (CLI): same routing as http_push after its
        auth step; authorization is the exclusive data-directory lock."""
        return self._ingest_rows(info, rows, errors, received_at=now_ns())

    # -- HTTP push -------------------------------------------------------------

    def http_push(self, thing_uuid: str, secret: str, body: bytes) -> IngestReport:
        """Synchronous push; accepted rows are durable when this returns."""
        info = self.resolver.thing_info(thing_uuid)
        if info is None:
            raise UnknownThing(thing_uuid)
        if self._verify("http", thing_uuid, secret) != thing_uuid:
            self.auth_failures += 1
            raise AuthMismatch(f"bad ingest credential for thing {thing_uuid}")
        rows, errors = parse_payload(info.profile, body)
        return self._ingest_rows(info, rows, errors, received_at=now_ns())

    # -- MQTT ------------------------------------------------------------------

    def handle_mqtt_publish(self, topic: str, payload: bytes, username: str,
                            secret: str, ack=None) -> None:
        """One inbound publish on fs/ingest/<uuid>; buffered until flush.

        Rejected payloads are dropped (and counted) but still acked so a
        QoS-1 broker does not redeliver garbage forever.
        """
        uuid = topic.rsplit("/", 1)[-1]
        try:
            info = self.resolver.thing_info(uuid)
            if info is None:
                raise UnknownThing(uuid)
            if self._verify("mqtt", username, secret) != uuid:
                self.auth_failures += 1
                raise AuthMismatch(f"credential {username!r} does not own {uuid}")
            rows, errors = parse_payload(info.profile, payload)
            for err in errors:
                logger.warning("mqtt %s row error: line %d %s", uuid, err.line,
                               err.reason)
            with self._mqtt_lock:
                self._mqtt_buffers[uuid].extend(rows)
                if ack is not None:
                    self._mqtt_acks[uuid].append(ack)
            return
        except (UnknownThing, AuthMismatch, PayloadUndecodable) as exc:
            logger.warning("mqtt publish dropped (%s): %s", type(exc).__name__, exc)
            if ack is not None:
                ack()

    def flush_mqtt(self) -> int:
        """Fold buffered MQTT rows into the store; ack the covered publishes."""
        with self._mqtt_lock:
            buffers = dict(self._mqtt_buffers)
            acks = dict(self._mqtt_acks)
            self._mqtt_buffers.clear()
            self._mqtt_acks.clear()
        total = 0
        for uuid, rows in buffers.items():
            info = self.resolver.thing_info(uuid)
            if info is None or not rows:
                continue
            report = self._ingest_rows(info, rows, [], received_at=now_ns())
            total += report.accepted
        for pending in acks.values():
            for ack in pending:
                ack()
        return total

    # -- drop directory ----------------------------------------------------------

    def dropdir_scan(self, root) -> list:
        """Process files landed under <root>/<thing_uuid>/ exactly once
        per file name, in lexicographic order."""
        root = Path(root)
        reports = []
        if not root.is_dir():
            return reports
        for thing_dir in sorted(p for p in root.iterdir() if p.is_dir()):
            uuid = thing_dir.name
            info = self.resolver.thing_info(uuid)
            if info is None:
                reports.append(DropFileReport(uuid, "", "failed", reason="UnknownThing"))
                continue
            processed = thing_dir / "processed"
            failed = thing_dir / "failed"
            processed.mkdir(exist_ok=True)
            failed.mkdir(exist_ok=True)
            for path in sorted(p for p in thing_dir.iterdir() if p.is_file()):
                if path.name.startswith("."):
                    continue
                if (processed / path.name).exists() or (failed / path.name).exists():
                    reports.append(DropFileReport(uuid, path.name, "duplicate",
                                                  reason="already processed"))
                    path.unlink()
                    continue
                reports.append(self._process_drop_file(info, path, processed, failed))
        return reports

    def _process_drop_file(self, info, path, processed_dir, failed_dir) -> DropFileReport:
        try:
            rows, errors = parse_payload(info.profile, path.read_bytes())
            report = self._ingest_rows(info, rows, errors, received_at=now_ns())
        except PayloadUndecodable as exc:
            shutil.move(str(path), str(failed_dir / path.name))
            (failed_dir / (path.name + ".err")).write_text(
                f"PayloadUndecodable: {exc}\n")
            return DropFileReport(info.uuid, path.name, "failed",
                                  reason="PayloadUndecodable")
        shutil.move(str(path), str(processed_dir / path.name))
        if report.errors:
            (processed_dir / (path.name + ".err")).write_text(
                "".join(f"line {e.line}: {e.reason}\n" for e in report.errors))
        return DropFileReport(info.uuid, path.name, "processed",
                              accepted=report.accepted, row_errors=len(report.errors))
