"""Thing lifecycle orchestration.

create_thing is the one-stop step 2 of the sensor workflow: it persists
the Thing, creates its datastreams in the time-series store, mints the
transport credential (returned exactly once, stored hashed), and
provisions the dashboard descriptor.  After it returns, data can flow
and QC can be attached with no further administrative action.

The service doubles as the gateway's resolver (thing_info /
verify_credential) and drives QC scheduling: on_ingest attachments run
right after a flush touched their scope, interval attachments run from
the wall-clock scheduler in serve mode.  Each attachment keeps a
persistent high-water mark so restarts never leave a gap.
"""

from __future__ import annotations

import json
import logging
import secrets
import sqlite3
import threading
import time
import uuid as uuidlib
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import NotFoundError, ValidationError
from ..ingest.credentials import TRANSPORTS, hash_secret, new_secret, verify_secret
from ..ingest.gateway import ThingInfo
from ..ingest.profiles import ParserProfile
from ..qc.dsl import parse_config
from ..qc.errors import UnknownVariable
from ..qc.pipeline import run_on_store
from ..timeutil import now_ns, parse_duration_ns
from .tokens import TokenStore

logger = logging.getLogger(__name__)

SCHEDULES = ("on_ingest", "interval")

_SCHEMA = """
CREATE TABLE IF NOT EXISTS things (
    uuid TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    description TEXT NOT NULL DEFAULT '',
    transport TEXT NOT NULL,
    profile_json TEXT NOT NULL,
    owner_token_id INTEGER,
    created_at INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS datastreams (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    thing_uuid TEXT NOT NULL REFERENCES things(uuid),
    position TEXT NOT NULL,
    name TEXT NOT NULL,
    unit TEXT NOT NULL DEFAULT '',
    device_id INTEGER,
    op_name TEXT NOT NULL DEFAULT '',
    op_definition TEXT NOT NULL DEFAULT '',
    UNIQUE(thing_uuid, position)
);
CREATE TABLE IF NOT EXISTS credentials (
    transport TEXT NOT NULL,
    username TEXT NOT NULL,
    secret_hash TEXT NOT NULL,
    thing_uuid TEXT NOT NULL REFERENCES things(uuid),
    PRIMARY KEY (transport, username)
);
CREATE TABLE IF NOT EXISTS dashboards (
    thing_uuid TEXT PRIMARY KEY REFERENCES things(uuid),
    share_token TEXT UNIQUE NOT NULL,
    panels_json TEXT NOT NULL,
    created_at INTEGER NOT NULL,
    revoked INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS qc_attachments (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    thing_uuid TEXT NOT NULL REFERENCES things(uuid),
    config_text TEXT NOT NULL,
    config_hash TEXT NOT NULL,
    schedule TEXT NOT NULL,
    interval_ms INTEGER,
    lookback_ns INTEGER NOT NULL,
    enabled INTEGER NOT NULL DEFAULT 1,
    high_water_ns INTEGER,
    created_at INTEGER NOT NULL
);
"""


@dataclass
class Thing:
    uuid: str
    name: str
    description: str
    transport: str
    parser_profile: ParserProfile
    owner_token_id: int | None
    created_at: int
    datastreams: list = field(default_factory=list)


@dataclass
class Datastream:
    id: int
    thing_uuid: str
    position: str
    name: str
    unit: str
    device_id: int | None
    observed_property_name: str
    observed_property_definition: str


@dataclass
class QcAttachment:
    id: int
    thing_uuid: str
    config_text: str
    config_hash: str
    schedule: str
    interval_ms: int | None
    lookback_ns: int
    enabled: bool
    high_water_ns: int | None


class UnknownThing(NotFoundError):
    def __init__(self, key):
        super().__init__(f"unknown thing: {key}")


class PlatformService:
    def __init__(self, db_path, store, registry=None, dropdir=None,
                 bootstrap_admin_token=""):
        Path(db_path).parent.mkdir(parents=True, exist_ok=True)
        self._conn = sqlite3.connect(str(db_path), check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._conn.executescript(_SCHEMA)
        self._lock = threading.RLock()
        self.store = store
        self.registry = registry
        self.dropdir = Path(dropdir) if dropdir else None
        self.tokens = TokenStore(self._conn, bootstrap_admin_token)
        self._attachment_locks = {}
        self._last_interval_run = {}

    def close(self):
        self._conn.close()

    # -- thing lifecycle -------------------------------------------------------

    def create_thing(self, spec: dict, owner_token_id=None):
        """Returns (Thing, credential dict); the credential secret appears
        only in this return value, storage keeps the hash."""
        name = str(spec.get("name") or "").strip()
        if not name:
            raise ValidationError("name", "thing name must be non-empty")
        transport = spec.get("transport")
        if transport not in TRANSPORTS:
            raise ValidationError("transport", f"must be one of {TRANSPORTS}")
        profile = ParserProfile.from_dict(spec.get("parser_profile") or {})
        declarations = spec.get("datastreams") or []
        if not declarations:
            raise ValidationError("datastreams", "at least one datastream required")
        positions = [d.get("position") for d in declarations]
        if len(set(positions)) != len(positions):
            raise ValidationError("datastreams.position", "positions must be unique")
        known_positions = set(profile.value_columns.values())
        for position in positions:
            if position not in known_positions:
                raise ValidationError(
                    "datastreams.position",
                    f"position {position!r} is not produced by the parser profile")
        for decl in declarations:
            device_id = decl.get("device_id")
            if device_id is not None and self.registry is not None:
                self.registry.get_device(device_id)  # raises UnknownDevice

        thing_uuid = str(uuidlib.uuid4())
        now = now_ns()
        with self._lock:
            self._conn.execute(
                "INSERT INTO things (uuid, name, description, transport,"
                " profile_json, owner_token_id, created_at) VALUES (?,?,?,?,?,?,?)",
                (thing_uuid, name, str(spec.get("description") or ""), transport,
                 json.dumps(profile.to_dict()), owner_token_id, now))
            for decl in declarations:
                op = decl.get("observed_property") or {}
                self._conn.execute(
                    "INSERT INTO datastreams (thing_uuid, position, name, unit,"
                    " device_id, op_name, op_definition) VALUES (?,?,?,?,?,?,?)",
                    (thing_uuid, decl["position"],
                     decl.get("name") or decl["position"],
                     decl.get("unit") or "", decl.get("device_id"),
                     op.get("name") or decl.get("name") or decl["position"],
                     op.get("definition") or ""))
            credential = self._mint_credential(thing_uuid, transport)
            self._conn.commit()
        for ds in self.datastreams_of(thing_uuid):
            self.store.create_datastream(ds.id)
        if transport == "dropdir" and self.dropdir is not None:
            (self.dropdir / thing_uuid).mkdir(parents=True, exist_ok=True)
        self.provision_dashboard(thing_uuid)
        return self.get_thing(thing_uuid), credential

    def _mint_credential(self, thing_uuid, transport):
        secret = new_secret()
        username = thing_uuid if transport != "mqtt" else f"t-{thing_uuid[:8]}"
        self._conn.execute(
            "INSERT INTO credentials (transport, username, secret_hash, thing_uuid)"
            " VALUES (?,?,?,?)",
            (transport, username, hash_secret(secret), thing_uuid))
        return {"transport": transport, "username": username, "secret": secret}

    def get_thing(self, thing_uuid) -> Thing:
        row = self._conn.execute(
            "SELECT * FROM things WHERE uuid=?", (thing_uuid,)).fetchone()
        if row is None:
            raise UnknownThing(thing_uuid)
        return Thing(
            uuid=row["uuid"], name=row["name"], description=row["description"],
            transport=row["transport"],
            parser_profile=ParserProfile.from_dict(json.loads(row["profile_json"])),
            owner_token_id=row["owner_token_id"], created_at=row["created_at"],
            datastreams=self.datastreams_of(thing_uuid))

    def list_things(self):
        rows = self._conn.execute("SELECT uuid FROM things ORDER BY created_at")
        return [self.get_thing(r["uuid"]) for r in rows.fetchall()]

    def datastreams_of(self, thing_uuid) -> list:
        return [self._ds_row(r) for r in self._conn.execute(
            "SELECT * FROM datastreams WHERE thing_uuid=? ORDER BY id",
            (thing_uuid,))]

    def get_datastream(self, ds_id: int) -> Datastream:
        row = self._conn.execute(
            "SELECT * FROM datastreams WHERE id=?", (ds_id,)).fetchone()
        if row is None:
            raise NotFoundError(f"unknown datastream: {ds_id}")
        return self._ds_row(row)

    def list_datastreams(self):
        return [self._ds_row(r) for r in self._conn.execute(
            "SELECT * FROM datastreams ORDER BY id")]

    @staticmethod
    def _ds_row(row) -> Datastream:
        return Datastream(
            id=row["id"], thing_uuid=row["thing_uuid"], position=row["position"],
            name=row["name"], unit=row["unit"], device_id=row["device_id"],
            observed_property_name=row["op_name"],
            observed_property_definition=row["op_definition"])

    # -- gateway resolver protocol ----------------------------------------------

    def thing_info(self, thing_uuid):
        try:
            thing = self.get_thing(thing_uuid)
        except UnknownThing:
            return None
        return ThingInfo(
            uuid=thing.uuid, transport=thing.transport,
            profile=thing.parser_profile,
            datastreams={ds.position: ds.id for ds in thing.datastreams})

    def verify_credential(self, transport, username, secret):
        row = self._conn.execute(
            "SELECT secret_hash, thing_uuid FROM credentials"
            " WHERE transport=? AND username=?", (transport, username)).fetchone()
        if row is None:
            return None
        if transport == "dropdir" or verify_secret(secret, row["secret_hash"]):
            return row["thing_uuid"]
        return None

    def credential_meta(self, thing_uuid):
        """Credential metadata without the secret (which is gone for good)."""
        rows = self._conn.execute(
            "SELECT transport, username FROM credentials WHERE thing_uuid=?",
            (thing_uuid,)).fetchall()
        return [{"transport": r["transport"], "username": r["username"]}
                for r in rows]

    # -- dashboards ---------------------------------------------------------------

    def provision_dashboard(self, thing_uuid) -> dict:
        """Create or refresh the descriptor; idempotent for an unchanged
        Thing and the share token survives refreshes."""
        thing = self.get_thing(thing_uuid)
        panels = [{"title": ds.name, "datastream_id": ds.id,
                   "default_range": "now-7d"} for ds in thing.datastreams]
        panels_json = json.dumps(panels, sort_keys=True)
        with self._lock:
            row = self._conn.execute(
                "SELECT share_token, panels_json FROM dashboards WHERE thing_uuid=?",
                (thing_uuid,)).fetchone()
            if row is None:
                self._conn.execute(
                    "INSERT INTO dashboards (thing_uuid, share_token, panels_json,"
                    " created_at) VALUES (?,?,?,?)",
                    (thing_uuid, secrets.token_urlsafe(16), panels_json, now_ns()))
            elif row["panels_json"] != panels_json:
                self._conn.execute(
                    "UPDATE dashboards SET panels_json=? WHERE thing_uuid=?",
                    (panels_json, thing_uuid))
            self._conn.commit()
        return self.dashboard_of(thing_uuid)

    def dashboard_of(self, thing_uuid) -> dict:
        row = self._conn.execute(
            "SELECT * FROM dashboards WHERE thing_uuid=?", (thing_uuid,)).fetchone()
        if row is None:
            raise NotFoundError(f"no dashboard for thing {thing_uuid}")
        return {
            "thing_uuid": row["thing_uuid"],
            "share_token": row["share_token"],
            "created_at": row["created_at"],
            "revoked": bool(row["revoked"]),
            "panels": json.loads(row["panels_json"]),
        }

    def get_dashboard(self, share_token) -> dict:
        """Resolve a live share token into panels plus token-scoped data URLs."""
        row = self._conn.execute(
            "SELECT thing_uuid FROM dashboards WHERE share_token=? AND revoked=0",
            (share_token,)).fetchone()
        if row is None:
            raise NotFoundError("unknown or revoked share token")
        descriptor = self.dashboard_of(row["thing_uuid"])
        for panel in descriptor["panels"]:
            panel["data_url"] = (
                f"/v1.1/Datastreams({panel['datastream_id']})/Observations"
                f"?$orderby=phenomenonTime desc&$top=500&share_token={share_token}")
        return descriptor

    def share_token_scope(self, share_token):
        """Datastream ids a share token may read, or None if invalid/revoked."""
        row = self._conn.execute(
            "SELECT thing_uuid FROM dashboards WHERE share_token=? AND revoked=0",
            (share_token,)).fetchone()
        if row is None:
            return None
        return {ds.id for ds in self.datastreams_of(row["thing_uuid"])}

    def revoke_share_token(self, thing_uuid) -> None:
        with self._lock:
            self._conn.execute(
                "UPDATE dashboards SET revoked=1 WHERE thing_uuid=?", (thing_uuid,))
            self._conn.commit()

    # -- QC attachments -------------------------------------------------------------

    def attach_qc(self, thing_uuid, config_text, schedule="on_ingest",
                  lookback="1h", interval=None, enabled=True) -> QcAttachment:
        thing = self.get_thing(thing_uuid)
        config = parse_config(config_text)  # surfaces syntax errors with line numbers
        positions = {ds.position for ds in thing.datastreams}
        for entry in config.entries:
            if entry.variable not in positions:
                raise UnknownVariable(entry.variable)
        if schedule not in SCHEDULES:
            raise ValidationError("schedule", f"must be one of {SCHEDULES}")
        lookback_ns = parse_duration_ns(lookback)
        implied = _implied_window_ns(config)
        if lookback_ns < implied:
            raise ValidationError(
                "lookback",
                f"lookback must cover the largest window the config implies"
                f" ({implied} ns)")
        interval_ms = None
        if schedule == "interval":
            interval_ms = int(parse_duration_ns(interval or "60s") // 1_000_000)
        with self._lock:
            cur = self._conn.execute(
                "INSERT INTO qc_attachments (thing_uuid, config_text, config_hash,"
                " schedule, interval_ms, lookback_ns, enabled, created_at)"
                " VALUES (?,?,?,?,?,?,?,?)",
                (thing_uuid, config_text, config.config_hash, schedule, interval_ms,
                 lookback_ns, int(enabled), now_ns()))
            self._conn.commit()
        return self.get_attachment(cur.lastrowid)

    def get_attachment(self, attachment_id) -> QcAttachment:
        row = self._conn.execute(
            "SELECT * FROM qc_attachments WHERE id=?", (attachment_id,)).fetchone()
        if row is None:
            raise NotFoundError(f"unknown attachment: {attachment_id}")
        return QcAttachment(
            id=row["id"], thing_uuid=row["thing_uuid"],
            config_text=row["config_text"], config_hash=row["config_hash"],
            schedule=row["schedule"], interval_ms=row["interval_ms"],
            lookback_ns=row["lookback_ns"], enabled=bool(row["enabled"]),
            high_water_ns=row["high_water_ns"])

    def attachments_of(self, thing_uuid):
        rows = self._conn.execute(
            "SELECT id FROM qc_attachments WHERE thing_uuid=? ORDER BY id",
            (thing_uuid,)).fetchall()
        return [self.get_attachment(r["id"]) for r in rows]

    def set_attachment_enabled(self, attachment_id, enabled: bool):
        with self._lock:
            self._conn.execute("UPDATE qc_attachments SET enabled=? WHERE id=?",
                               (int(enabled), attachment_id))
            self._conn.commit()

    def notify_ingest(self, thing_uuid, datastream_ids):
        """on_ingest trigger: run every enabled attachment whose scope was
        touched by the flush."""
        for attachment in self.attachments_of(thing_uuid):
            if attachment.enabled and attachment.schedule == "on_ingest":
                try:
                    self.run_attachment(attachment.id)
                except Exception:
                    logger.exception("on_ingest QC run failed for attachment %d",
                                     attachment.id)

    def run_attachment(self, attachment_id, run_time_ns=None):
        """One scheduled run over [newest - lookback, newest], extended back
        to the persisted high-water mark so no ingested point is skipped."""
        lock = self._attachment_locks.setdefault(attachment_id, threading.Lock())
        with lock:
            attachment = self.get_attachment(attachment_id)
            thing = self.get_thing(attachment.thing_uuid)
            var_map = {ds.position: ds.id for ds in thing.datastreams}
            newest = None
            for ds in thing.datastreams:
                bounds = self.store.time_bounds(ds.id)
                if bounds is not None:
                    newest = bounds[1] if newest is None else max(newest, bounds[1])
            if newest is None:
                return None  # no data yet
            low = newest - attachment.lookback_ns
            if attachment.high_water_ns is not None:
                low = min(low, attachment.high_water_ns)
            config = parse_config(attachment.config_text)
            result = run_on_store(self.store, config, var_map, low, newest + 1,
                                  run_time_ns=run_time_ns)
            with self._lock:
                self._conn.execute(
                    "UPDATE qc_attachments SET high_water_ns=? WHERE id=?",
                    (newest, attachment_id))
                self._conn.commit()
            return result

    def run_due_interval_attachments(self, now_ms=None):
        """Wall-clock tick for interval schedules; returns run attachment ids."""
        now_ms = int(time.time() * 1000) if now_ms is None else now_ms
        ran = []
        rows = self._conn.execute(
            "SELECT id, interval_ms FROM qc_attachments"
            " WHERE enabled=1 AND schedule='interval'").fetchall()
        for row in rows:
            last = self._last_interval_run.get(row["id"], 0)
            if now_ms - last >= (row["interval_ms"] or 60_000):
                self._last_interval_run[row["id"]] = now_ms
                self.run_attachment(row["id"])
                ran.append(row["id"])
        return ran

    def qc_dryrun(self, ds_id, config_text, t_from=None, t_to=None):
        """Preview run for the console: no columns persist."""
        ds = self.get_datastream(ds_id)
        thing = self.get_thing(ds.thing_uuid)
        var_map = {d.position: d.id for d in thing.datastreams}
        config = parse_config(config_text)
        for entry in config.entries:
            if entry.variable not in var_map:
                raise UnknownVariable(entry.variable)
        if t_from is None or t_to is None:
            bounds = self.store.time_bounds(ds.id)
            if bounds is None:
                t_from, t_to = 0, 1
            else:
                t_from, t_to = bounds[0], bounds[1] + 1
        return run_on_store(self.store, config, var_map, t_from, t_to, dry_run=True)


def _implied_window_ns(config) -> int:
    implied = 0
    for entry in config.entries:
        for key in ("freq", "maxgap"):
            value = entry.call.kwargs.get(key)
            if isinstance(value, str):
                try:
                    implied = max(implied, parse_duration_ns(value))
                except ValueError:
                    pass
    return implied
