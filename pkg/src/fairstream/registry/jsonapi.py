"""JSON:API-shaped device export.

Byte-reproducible: keys sort lexicographically and the document is
rendered once into bytes, so exporting twice with no intervening write
yields identical output.
"""

from __future__ import annotations

import json

from ..timeutil import format_rfc3339_ns
from .models import Device


def device_document(device: Device, mounts) -> dict:
    attributes = {
        "pid": device.pid,
        "short_name": device.short_name,
        "manufacturer": device.manufacturer,
        "model": device.model,
        "serial_number": device.serial_number,
        "device_type": device.device_type,
        "description": device.description,
        "archived": device.archived,
        "properties": [
            {"name": q.name, "unit": q.unit, "position_index": q.position_index}
            for q in sorted(device.properties, key=lambda q: q.position_index)],
        "created_at": format_rfc3339_ns(device.created_at),
        "updated_at": format_rfc3339_ns(device.updated_at),
    }
    contact_refs = [{"type": "contact", "id": str(i + 1)}
                    for i in range(len(device.contacts))]
    mount_refs = [{"type": "mount", "id": str(m.id)} for m in mounts]
    included = []
    for i, c in enumerate(device.contacts):
        included.append({
            "type": "contact", "id": str(i + 1),
            "attributes": {
                "given_name": c.given_name, "family_name": c.family_name,
                "email": c.email, "organization": c.organization, "role": c.role}})
    for m in mounts:
        included.append({
            "type": "mount", "id": str(m.id),
            "attributes": {
                "configuration_label": m.configuration_label,
                "begin": format_rfc3339_ns(m.begin),
                "end": None if m.end is None else format_rfc3339_ns(m.end),
                "offset_x": m.offset_x, "offset_y": m.offset_y, "offset_z": m.offset_z,
                "begin_description": m.begin_description}})
    return {
        "data": {
            "type": "device",
            "id": str(device.id),
            "attributes": attributes,
            "relationships": {
                "contacts": {"data": contact_refs},
                "mounts": {"data": mount_refs},
            },
        },
        "included": included,
    }


def export_jsonapi(device: Device, mounts) -> bytes:
    doc = device_document(device, mounts)
    return json.dumps(doc, sort_keys=True, indent=2).encode() + b"\n"
