"""Flag column codec (.ffc files).

One file per quality-control column, append-only per datastream:

    header:  magic "FFC1" | version u16 | datastream_id u64 | column_id u32
             | meta_len u32 | count u32 | crc32 u32 (of meta + payload)
    meta:    canonical JSON (provenance: function, parameters, config hash,
             engine version, run timestamp)
    payload: timestamps i64[count], then flags f32[count]

Entries are sparse: only the timestamps this column touches appear.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .errors import CorruptFlagColumn

MAGIC = b"FFC1"
VERSION = 1
HEADER = struct.Struct("<4sHQIIII")
HEADER_SIZE = HEADER.size  # 30 bytes


def canonical_meta_bytes(meta: dict) -> bytes:
    return json.dumps(meta, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def encode_flag_column(datastream_id: int, column_id: int, meta: dict,
                       timestamps: np.ndarray, flags: np.ndarray) -> bytes:
    ts = np.ascontiguousarray(timestamps, dtype="<i8")
    fl = np.ascontiguousarray(flags, dtype="<f4")
    meta_bytes = canonical_meta_bytes(meta)
    payload = meta_bytes + ts.tobytes() + fl.tobytes()
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    header = HEADER.pack(MAGIC, VERSION, datastream_id, column_id, len(meta_bytes), len(ts), crc)
    return header + payload


def decode_flag_column(data: bytes, path="<memory>"):
    """Returns (datastream_id, column_id, meta dict, timestamps, flags)."""
    if len(data) < HEADER_SIZE:
        raise CorruptFlagColumn(path, f"truncated header ({len(data)} bytes)")
    magic, version, ds_id, column_id, meta_len, count, crc = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CorruptFlagColumn(path, f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptFlagColumn(path, f"unsupported version {version}")
    expected = HEADER_SIZE + meta_len + count * 12
    if len(data) != expected:
        raise CorruptFlagColumn(path, f"size mismatch: {len(data)} bytes, expected {expected}")
    payload = data[HEADER_SIZE:]
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise CorruptFlagColumn(path, "crc32 mismatch")
    try:
        meta = json.loads(payload[:meta_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFlagColumn(path, f"bad meta json: {exc}") from exc
    ts = np.frombuffer(payload, dtype="<i8", count=count, offset=meta_len)
    fl = np.frombuffer(payload, dtype="<f4", count=count, offset=meta_len + count * 8)
    if count > 1 and not bool(np.all(ts[1:] > ts[:-1])):
        raise CorruptFlagColumn(path, "timestamps not strictly ascending")
    return ds_id, column_id, meta, ts.astype(np.int64), fl.astype(np.float32)


def read_flag_column_file(path):
    with open(path, "rb") as fh:
        data = fh.read()
    return decode_flag_column(data, path=path)


def flag_column_filename(column_id: int) -> str:
    return f"{column_id}.ffc"
