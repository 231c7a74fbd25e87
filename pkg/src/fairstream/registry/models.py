"""Registry domain types and field validation."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import ValidationError

CONTACT_ROLES = ("owner", "pi", "technician")

_EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+\.[^@\s]+$")


@dataclass
class MeasuredQuantity:
    name: str
    unit: str
    position_index: int


@dataclass
class Contact:
    given_name: str
    family_name: str
    email: str
    organization: str = ""
    role: str = "owner"


@dataclass
class Mount:
    id: int | None
    device_id: int
    configuration_label: str
    begin: int                      # ns since epoch
    end: int | None = None          # half-open [begin, end); None = still mounted
    offset_x: float = 0.0
    offset_y: float = 0.0
    offset_z: float = 0.0
    begin_description: str = ""


@dataclass
class Device:
    id: int | None
    pid: str | None
    short_name: str
    manufacturer: str
    model: str
    serial_number: str
    device_type: str
    description: str = ""
    properties: list = field(default_factory=list)   # MeasuredQuantity
    contacts: list = field(default_factory=list)     # Contact
    created_at: int | None = None
    updated_at: int | None = None
    archived: bool = False

    @property
    def serial_triple(self):
        return (self.manufacturer, self.model, self.serial_number)


def validate_draft(device: Device) -> None:
    """Field-level invariants for registration; names the offending field."""
    for name in ("short_name", "manufacturer", "model", "serial_number", "device_type"):
        if not str(getattr(device, name) or "").strip():
            raise ValidationError(name, f"{name} must be non-empty")
    seen_positions = set()
    for q in device.properties:
        if not str(q.name or "").strip():
            raise ValidationError("properties.name", "quantity name must be non-empty")
        if q.position_index in seen_positions:
            raise ValidationError(
                "properties.position_index",
                f"position_index {q.position_index} duplicated")
        seen_positions.add(q.position_index)
    if not device.contacts:
        raise ValidationError("contacts", "at least one contact is required")
    for c in device.contacts:
        if not _EMAIL_RE.match(c.email or ""):
            raise ValidationError("contacts.email", f"invalid email {c.email!r}")
        if c.role not in CONTACT_ROLES:
            raise ValidationError(
                "contacts.role", f"role must be one of {CONTACT_ROLES}, got {c.role!r}")


def validate_mount(begin: int, end: int | None) -> None:
    if end is not None and end <= begin:
        raise ValidationError("end", "mount end must be strictly after begin")
