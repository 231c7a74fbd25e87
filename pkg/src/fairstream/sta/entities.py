"""SensorThings entity serialization.

Every serialized entity carries "@iot.id", "@iot.selfLink" and one
"<Nav>@iot.navigationLink" per declared relation.  Documents are
rendered with sorted keys so identical state serializes to identical
bytes.  Observations expose their current quality flag in `parameters`
(the standard's extension point) under the simple scheme by default;
`?flag_scheme=float` switches to raw floats.

Observation @iot.id packs (datastream id, timestamp): a point is not a
stored row with its own surrogate key, so the id is synthesized as
datastream_id * 2^64 + timestamp (two's complement).
"""

from __future__ import annotations

from ..qc import flags as F
from ..timeutil import format_rfc3339_ns

KINDS = ("Thing", "Datastream", "Observation", "Sensor", "ObservedProperty")

NAVIGATIONS = {
    "Thing": ("Datastreams",),
    "Datastream": ("Thing", "Observations", "Sensor", "ObservedProperty"),
    "Observation": ("Datastream",),
    "Sensor": ("Datastreams",),
    "ObservedProperty": ("Datastreams",),
}

_U64 = 1 << 64
_I63 = 1 << 63


def observation_iot_id(ds_id: int, timestamp: int) -> int:
    return ds_id * _U64 + (timestamp + _U64 if timestamp < 0 else timestamp)


def decode_observation_iot_id(iot_id: int):
    ds_id, t_u = divmod(iot_id, _U64)
    t = t_u - _U64 if t_u >= _I63 else t_u
    return ds_id, t


def self_link(base_url: str, kind: str, iot_id: int) -> str:
    return f"{base_url}/v1.1/{_collection_of(kind)}({iot_id})"


def _collection_of(kind: str) -> str:
    return kind + "s" if kind != "ObservedProperty" else "ObservedProperties"


def serialize_entity(kind: str, iot_id: int, properties: dict, base_url: str,
                     select=None) -> dict:
    """Assemble the serialized entity document (as a plain dict)."""
    doc = {
        "@iot.id": iot_id,
        "@iot.selfLink": self_link(base_url, kind, iot_id),
    }
    for nav in NAVIGATIONS[kind]:
        doc[f"{nav}@iot.navigationLink"] = (
            f"{self_link(base_url, kind, iot_id)}/{nav}")
    for key, value in properties.items():
        if select is None or key in select:
            doc[key] = value
    return doc


def observation_properties(ds_id: int, timestamp: int, result: float,
                           result_time, flag: float,
                           flag_scheme: str = "simple") -> dict:
    return {
        "phenomenonTime": format_rfc3339_ns(timestamp),
        "result": result,
        "resultTime": None if result_time is None else format_rfc3339_ns(result_time),
        "parameters": {
            "flag": F.encode(flag, flag_scheme),
            "flag_scheme": flag_scheme,
        },
    }
