"""Write-ahead log.

Every accepted write (points or a flag column) is framed into the WAL
and flushed to the OS before the call returns, so a killed process loses
nothing it acknowledged.  Framing:

    record: length u32 | crc32 u32 (of payload) | payload
    payload: type u8 + body

    type 0x01 points:      count u32 | timestamps i64[count] | values f64[count]
    type 0x02 flag column: column_id u32 | meta_len u32 | meta JSON
                           | count u32 | timestamps i64[count] | flags f32[count]

A torn tail (partial record from a crash mid-write) is detected on
replay and truncated away; everything before it is intact by crc.
"""

from __future__ import annotations

import os
import struct
import zlib

import numpy as np

_FRAME = struct.Struct("<II")
_U32 = struct.Struct("<I")

REC_POINTS = 1
REC_FLAGCOL = 2


def encode_points(timestamps: np.ndarray, values: np.ndarray) -> bytes:
    ts = np.ascontiguousarray(timestamps, dtype="<i8")
    vs = np.ascontiguousarray(values, dtype="<f8")
    return bytes([REC_POINTS]) + _U32.pack(len(ts)) + ts.tobytes() + vs.tobytes()


def encode_flag_column(column_id: int, meta_bytes: bytes,
                       timestamps: np.ndarray, flags: np.ndarray) -> bytes:
    ts = np.ascontiguousarray(timestamps, dtype="<i8")
    fl = np.ascontiguousarray(flags, dtype="<f4")
    return (
        bytes([REC_FLAGCOL])
        + _U32.pack(column_id)
        + _U32.pack(len(meta_bytes))
        + meta_bytes
        + _U32.pack(len(ts))
        + ts.tobytes()
        + fl.tobytes()
    )


def decode_record(payload: bytes):
    """Decode one WAL payload into ('points', ts, vs) or ('flagcol', id, meta, ts, fl)."""
    kind = payload[0]
    if kind == REC_POINTS:
        (count,) = _U32.unpack_from(payload, 1)
        ts = np.frombuffer(payload, dtype="<i8", count=count, offset=5)
        vs = np.frombuffer(payload, dtype="<f8", count=count, offset=5 + count * 8)
        return ("points", ts.astype(np.int64), vs.astype(np.float64))
    if kind == REC_FLAGCOL:
        column_id, meta_len = struct.unpack_from("<II", payload, 1)
        off = 9
        meta_bytes = payload[off:off + meta_len]
        off += meta_len
        (count,) = _U32.unpack_from(payload, off)
        off += 4
        ts = np.frombuffer(payload, dtype="<i8", count=count, offset=off)
        fl = np.frombuffer(payload, dtype="<f4", count=count, offset=off + count * 8)
        return ("flagcol", column_id, meta_bytes, ts.astype(np.int64), fl.astype(np.float32))
    raise ValueError(f"unknown WAL record type {kind}")


class WriteAheadLog:
    """Append-only log for one datastream."""

    def __init__(self, path, fsync: bool = False):
        self.path = path
        self.fsync = fsync
        self._fh = open(path, "ab")

    def append(self, payload: bytes) -> None:
        frame = _FRAME.pack(len(payload), zlib.crc32(payload) & 0xFFFFFFFF)
        self._fh.write(frame + payload)
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())

    @property
    def size(self) -> int:
        return self._fh.tell()

    def truncate(self) -> None:
        """Discard the log after its contents were folded into a segment."""
        self._fh.truncate(0)
        self._fh.seek(0)
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        self._fh.close()


def replay(path):
    """Yield decoded records; truncate a torn tail in place.

    Returns a list of decoded records.  If the file ends in a partial or
    corrupt record (crash mid-write), the file is truncated back to the
    last complete record so later verification sees a clean log.
    """
    records = []
    if not os.path.exists(path):
        return records
    with open(path, "rb") as fh:
        data = fh.read()
    offset = 0
    good = 0
    while offset + _FRAME.size <= len(data):
        length, crc = _FRAME.unpack_from(data, offset)
        start = offset + _FRAME.size
        end = start + length
        if end > len(data):
            break  # torn tail
        payload = data[start:end]
        if zlib.crc32(payload) & 0xFFFFFFFF != crc:
            break  # torn or corrupt tail; nothing after it is trusted
        records.append(decode_record(payload))
        offset = end
        good = end
    if good < len(data):
        with open(path, "r+b") as fh:
            fh.truncate(good)
    return records
