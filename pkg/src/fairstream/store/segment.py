"""On-disk segment codec.

A segment holds one datastream's sorted points in a columnar layout:

    header:  magic "FSG1" | version u16 | datastream_id u64 | count u32
             | t_min i64 | t_max i64 | crc32 u32 (of the payload bytes)
    payload: timestamps i64[count], then values f64[count]

Everything little-endian.  The format is bit-exact: golden files in the
test suite pin it.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import CorruptSegment

MAGIC = b"FSG1"
VERSION = 1
HEADER = struct.Struct("<4sHQIqqI")
HEADER_SIZE = HEADER.size  # 38 bytes


def encode_segment(datastream_id: int, timestamps: np.ndarray, values: np.ndarray) -> bytes:
    """Serialize sorted points into segment bytes.

    Caller guarantees timestamps are strictly ascending int64 and values
    are float64 of the same length.
    """
    count = len(timestamps)
    if count == 0:
        raise ValueError("segment must hold at least one point")
    ts = np.ascontiguousarray(timestamps, dtype="<i8")
    vs = np.ascontiguousarray(values, dtype="<f8")
    payload = ts.tobytes() + vs.tobytes()
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    header = HEADER.pack(MAGIC, VERSION, datastream_id, count, int(ts[0]), int(ts[-1]), crc)
    return header + payload


def decode_segment(data: bytes, path="<memory>"):
    """Parse and verify segment bytes.

    Returns (datastream_id, timestamps i64 array, values f64 array).
    Raises CorruptSegment on any structural or checksum violation.
    """
    if len(data) < HEADER_SIZE:
        raise CorruptSegment(path, f"truncated header ({len(data)} bytes)")
    magic, version, ds_id, count, t_min, t_max, crc = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CorruptSegment(path, f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptSegment(path, f"unsupported version {version}")
    expected = HEADER_SIZE + count * 16
    if len(data) != expected:
        raise CorruptSegment(path, f"size mismatch: {len(data)} bytes, expected {expected}")
    payload = data[HEADER_SIZE:]
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise CorruptSegment(path, "crc32 mismatch")
    ts = np.frombuffer(payload, dtype="<i8", count=count)
    vs = np.frombuffer(payload, dtype="<f8", count=count, offset=count * 8)
    if count > 0:
        if not bool(np.all(ts[1:] > ts[:-1])):
            raise CorruptSegment(path, "timestamps not strictly ascending")
        if int(ts[0]) != t_min or int(ts[-1]) != t_max:
            raise CorruptSegment(path, "t_min/t_max do not match payload")
    return ds_id, ts.astype(np.int64), vs.astype(np.float64)


def read_segment_file(path):
    with open(path, "rb") as fh:
        data = fh.read()
    return decode_segment(data, path=path)


def segment_filename(t_min: int, t_max: int) -> str:
    return f"{t_min}-{t_max}.fsg"
