"""SQLite-backed device registry.

One embedded database file holds devices, measured quantities, contacts,
mounts and the PID landing snapshots.  Writes serialize through a lock
so the mount-overlap check always runs against a settled view; readers
share the same connection (desk scale).
"""

from __future__ import annotations

import json
import sqlite3
import threading
import uuid
from pathlib import Path

from ..errors import FairstreamError, NotFoundError, ValidationError
from ..timeutil import now_ns
from .models import (
    Contact,
    Device,
    MeasuredQuantity,
    Mount,
    validate_draft,
    validate_mount,
)

_SCHEMA = """
CREATE TABLE IF NOT EXISTS devices (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    pid TEXT UNIQUE,
    short_name TEXT NOT NULL,
    manufacturer TEXT NOT NULL,
    model TEXT NOT NULL,
    serial_number TEXT NOT NULL,
    device_type TEXT NOT NULL,
    description TEXT NOT NULL DEFAULT '',
    archived INTEGER NOT NULL DEFAULT 0,
    created_at INTEGER NOT NULL,
    updated_at INTEGER NOT NULL
);
CREATE UNIQUE INDEX IF NOT EXISTS idx_devices_serial
    ON devices(manufacturer, model, serial_number) WHERE archived = 0;
CREATE TABLE IF NOT EXISTS quantities (
    device_id INTEGER NOT NULL REFERENCES devices(id),
    name TEXT NOT NULL,
    unit TEXT NOT NULL DEFAULT '',
    position_index INTEGER NOT NULL,
    UNIQUE(device_id, position_index)
);
CREATE TABLE IF NOT EXISTS contacts (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    device_id INTEGER NOT NULL REFERENCES devices(id),
    given_name TEXT NOT NULL DEFAULT '',
    family_name TEXT NOT NULL DEFAULT '',
    email TEXT NOT NULL,
    organization TEXT NOT NULL DEFAULT '',
    role TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS mounts (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    device_id INTEGER NOT NULL REFERENCES devices(id),
    configuration_label TEXT NOT NULL,
    begin_ns INTEGER NOT NULL,
    end_ns INTEGER,
    offset_x REAL NOT NULL DEFAULT 0,
    offset_y REAL NOT NULL DEFAULT 0,
    offset_z REAL NOT NULL DEFAULT 0,
    begin_description TEXT NOT NULL DEFAULT ''
);
CREATE TABLE IF NOT EXISTS pid_landing (
    pid TEXT PRIMARY KEY,
    device_id INTEGER NOT NULL REFERENCES devices(id),
    snapshot TEXT NOT NULL
);
"""


class DuplicateSerial(FairstreamError):
    def __init__(self, triple):
        self.triple = triple
        super().__init__(f"device with serial triple {triple} already registered")


class UnknownDevice(NotFoundError):
    def __init__(self, key):
        super().__init__(f"unknown device: {key}")


class AlreadyMinted(FairstreamError):
    def __init__(self, device_id):
        super().__init__(f"device {device_id} already has a pid")


class OverlapError(FairstreamError):
    def __init__(self, conflicting_mount_id):
        self.conflicting_mount_id = conflicting_mount_id
        super().__init__(f"mount interval overlaps mount {conflicting_mount_id}")


class RegistryStore:
    def __init__(self, path, pid_prefix="20.500.0000"):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        self._conn = sqlite3.connect(str(path), check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._conn.executescript(_SCHEMA)
        self._lock = threading.RLock()
        self.pid_prefix = pid_prefix

    def close(self):
        self._conn.close()

    # -- registration --------------------------------------------------------

    def register_device(self, draft: Device) -> Device:
        """Persist a draft; mints the persistent identifier exactly once."""
        validate_draft(draft)
        now = now_ns()
        with self._lock:
            cur = self._conn.execute(
                "SELECT id FROM devices WHERE manufacturer=? AND model=? "
                "AND serial_number=? AND archived=0", draft.serial_triple)
            if cur.fetchone() is not None:
                raise DuplicateSerial(draft.serial_triple)
            cur = self._conn.execute(
                "INSERT INTO devices (short_name, manufacturer, model, serial_number,"
                " device_type, description, created_at, updated_at)"
                " VALUES (?,?,?,?,?,?,?,?)",
                (draft.short_name, draft.manufacturer, draft.model,
                 draft.serial_number, draft.device_type, draft.description, now, now))
            device_id = cur.lastrowid
            for q in draft.properties:
                self._conn.execute(
                    "INSERT INTO quantities (device_id, name, unit, position_index)"
                    " VALUES (?,?,?,?)",
                    (device_id, q.name, q.unit, q.position_index))
            for c in draft.contacts:
                self._conn.execute(
                    "INSERT INTO contacts (device_id, given_name, family_name, email,"
                    " organization, role) VALUES (?,?,?,?,?,?)",
                    (device_id, c.given_name, c.family_name, c.email,
                     c.organization, c.role))
            self._conn.commit()
            self.mint_pid(device_id)
        return self.get_device(device_id)

    def mint_pid(self, device_id: int) -> str:
        """Assign the persistent identifier and store a landing snapshot."""
        with self._lock:
            row = self._conn.execute(
                "SELECT pid FROM devices WHERE id=?", (device_id,)).fetchone()
            if row is None:
                raise UnknownDevice(device_id)
            if row["pid"] is not None:
                raise AlreadyMinted(device_id)
            pid = f"{self.pid_prefix}/{uuid.uuid4()}"
            self._conn.execute(
                "UPDATE devices SET pid=?, updated_at=? WHERE id=?",
                (pid, now_ns(), device_id))
            self._conn.commit()
            device = self.get_device(device_id)
            snapshot = json.dumps(_device_snapshot(device), sort_keys=True)
            self._conn.execute(
                "INSERT INTO pid_landing (pid, device_id, snapshot) VALUES (?,?,?)",
                (pid, device_id, snapshot))
            self._conn.commit()
        return pid

    def resolve_pid(self, pid: str) -> dict:
        row = self._conn.execute(
            "SELECT snapshot FROM pid_landing WHERE pid=?", (pid,)).fetchone()
        if row is None:
            raise UnknownDevice(pid)
        return json.loads(row["snapshot"])

    # -- retrieval -----------------------------------------------------------

    def get_device(self, device_id: int) -> Device:
        row = self._conn.execute(
            "SELECT * FROM devices WHERE id=?", (device_id,)).fetchone()
        if row is None:
            raise UnknownDevice(device_id)
        return self._hydrate(row)

    def get_device_by_pid(self, pid: str) -> Device:
        row = self._conn.execute(
            "SELECT * FROM devices WHERE pid=?", (pid,)).fetchone()
        if row is None:
            raise UnknownDevice(pid)
        return self._hydrate(row)

    def _hydrate(self, row) -> Device:
        quantities = [
            MeasuredQuantity(r["name"], r["unit"], r["position_index"])
            for r in self._conn.execute(
                "SELECT * FROM quantities WHERE device_id=? ORDER BY position_index",
                (row["id"],))]
        contacts = [
            Contact(r["given_name"], r["family_name"], r["email"],
                    r["organization"], r["role"])
            for r in self._conn.execute(
                "SELECT * FROM contacts WHERE device_id=? ORDER BY id", (row["id"],))]
        return Device(
            id=row["id"], pid=row["pid"], short_name=row["short_name"],
            manufacturer=row["manufacturer"], model=row["model"],
            serial_number=row["serial_number"], device_type=row["device_type"],
            description=row["description"], properties=quantities,
            contacts=contacts, created_at=row["created_at"],
            updated_at=row["updated_at"], archived=bool(row["archived"]))

    # -- mounts ---------------------------------------------------------------

    def add_mount(self, device_id: int, mount: Mount) -> Mount:
        """Attach a deployment interval; rejects overlaps atomically."""
        validate_mount(mount.begin, mount.end)
        if not str(mount.configuration_label or "").strip():
            raise ValidationError("configuration_label", "must be non-empty")
        with self._lock:
            if self._conn.execute("SELECT id FROM devices WHERE id=?",
                                  (device_id,)).fetchone() is None:
                raise UnknownDevice(device_id)
            new_end = mount.end if mount.end is not None else (1 << 62)
            for row in self._conn.execute(
                    "SELECT id, begin_ns, end_ns FROM mounts WHERE device_id=?",
                    (device_id,)):
                other_end = row["end_ns"] if row["end_ns"] is not None else (1 << 62)
                if row["begin_ns"] < new_end and mount.begin < other_end:
                    raise OverlapError(row["id"])
            cur = self._conn.execute(
                "INSERT INTO mounts (device_id, configuration_label, begin_ns, end_ns,"
                " offset_x, offset_y, offset_z, begin_description)"
                " VALUES (?,?,?,?,?,?,?,?)",
                (device_id, mount.configuration_label, mount.begin, mount.end,
                 mount.offset_x, mount.offset_y, mount.offset_z,
                 mount.begin_description))
            self._conn.execute("UPDATE devices SET updated_at=? WHERE id=?",
                               (now_ns(), device_id))
            self._conn.commit()
            mount_id = cur.lastrowid
        return Mount(mount_id, device_id, mount.configuration_label, mount.begin,
                     mount.end, mount.offset_x, mount.offset_y, mount.offset_z,
                     mount.begin_description)

    def mounts_for(self, device_id: int) -> list:
        if self._conn.execute("SELECT id FROM devices WHERE id=?",
                              (device_id,)).fetchone() is None:
            raise UnknownDevice(device_id)
        return [
            Mount(r["id"], r["device_id"], r["configuration_label"], r["begin_ns"],
                  r["end_ns"], r["offset_x"], r["offset_y"], r["offset_z"],
                  r["begin_description"])
            for r in self._conn.execute(
                "SELECT * FROM mounts WHERE device_id=? ORDER BY begin_ns",
                (device_id,))]

    # -- search / lifecycle ----------------------------------------------------

    def search_devices(self, query="", device_type=None, manufacturer=None,
                       page=1, per_page=50) -> dict:
        """Case-insensitive substring search, deterministic id order."""
        clauses, params = [], []
        if query:
            clauses.append(
                "(instr(lower(short_name), ?) > 0 OR instr(lower(manufacturer), ?) > 0"
                " OR instr(lower(model), ?) > 0 OR instr(lower(description), ?) > 0)")
            params += [query.lower()] * 4
        if device_type is not None:
            clauses.append("device_type = ?")
            params.append(device_type)
        if manufacturer is not None:
            clauses.append("manufacturer = ?")
            params.append(manufacturer)
        where = (" WHERE " + " AND ".join(clauses)) if clauses else ""
        total = self._conn.execute(
            f"SELECT COUNT(*) AS n FROM devices{where}", params).fetchone()["n"]
        page = max(int(page), 1)
        per_page = max(int(per_page), 1)
        rows = self._conn.execute(
            f"SELECT * FROM devices{where} ORDER BY id ASC LIMIT ? OFFSET ?",
            params + [per_page, (page - 1) * per_page]).fetchall()
        return {
            "total": total,
            "page": page,
            "per_page": per_page,
            "devices": [self._hydrate(r) for r in rows],
        }

    def archive_device(self, device_id: int) -> Device:
        with self._lock:
            if self._conn.execute("SELECT id FROM devices WHERE id=?",
                                  (device_id,)).fetchone() is None:
                raise UnknownDevice(device_id)
            self._conn.execute(
                "UPDATE devices SET archived=1, updated_at=? WHERE id=?",
                (now_ns(), device_id))
            self._conn.commit()
        return self.get_device(device_id)

    def device_ids(self):
        return [r["id"] for r in self._conn.execute(
            "SELECT id FROM devices ORDER BY id")]


def _device_snapshot(device: Device) -> dict:
    return {
        "id": device.id,
        "pid": device.pid,
        "short_name": device.short_name,
        "manufacturer": device.manufacturer,
        "model": device.model,
        "serial_number": device.serial_number,
        "device_type": device.device_type,
        "description": device.description,
        "properties": [
            {"name": q.name, "unit": q.unit, "position_index": q.position_index}
            for q in device.properties],
    }
