"""Bit-exactness of the segment and flag column codecs.

The expected byte strings are built here by hand with struct/zlib,
independently of the codec under test, and the golden files committed
under tests/golden/ pin the format across refactors.
"""

import struct
import zlib
from pathlib import Path

import numpy as np
import pytest

from fairstream.store import segment, flagcol
from fairstream.store.errors import CorruptFlagColumn, CorruptSegment

GOLDEN_DIR = Path(__file__).parent / "golden"


def _hand_packed_segment(ds_id, ts, vs):
    payload = b"".join(struct.pack("<q", t) for t in ts)
    payload += b"".join(struct.pack("<d", v) for v in vs)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    header = struct.pack("<4sHQIqqI", b"FSG1", 1, ds_id, len(ts), ts[0], ts[-1], crc)
    return header + payload


def test_encode_matches_hand_packed_bytes():
    ts = [1_700_000_000_000_000_000, 1_700_000_001_000_000_000, 1_700_000_002_500_000_000]
    vs = [21.5, -3.25, 1013.0]
    got = segment.encode_segment(7, np.array(ts, np.int64), np.array(vs, np.float64))
    assert got == _hand_packed_segment(7, ts, vs)


def test_roundtrip():
    ts = np.array([-5, 0, 10, 99], np.int64)
    vs = np.array([0.0, 1.5, float.fromhex("0x1.fffffffffffffp+1023"), -0.0])
    ds_id, ts2, vs2 = segment.decode_segment(segment.encode_segment(3, ts, vs))
    assert ds_id == 3
    np.testing.assert_array_equal(ts, ts2)
    np.testing.assert_array_equal(vs, vs2)


def test_crc_detects_single_flipped_payload_byte():
    data = bytearray(segment.encode_segment(1, np.array([1, 2], np.int64),
                                            np.array([1.0, 2.0])))
    data[segment.HEADER_SIZE + 3] ^= 0x40
    with pytest.raises(CorruptSegment, match="crc32"):
        segment.decode_segment(bytes(data))


def test_truncated_segment_is_structural_error():
    data = segment.encode_segment(1, np.array([1, 2], np.int64), np.array([1.0, 2.0]))
    with pytest.raises(CorruptSegment, match="size mismatch"):
        segment.decode_segment(data[:-4])
    with pytest.raises(CorruptSegment, match="truncated header"):
        segment.decode_segment(data[:10])


def test_bad_magic_and_unsorted_rejected():
    data = segment.encode_segment(1, np.array([1, 2], np.int64), np.array([1.0, 2.0]))
    with pytest.raises(CorruptSegment, match="magic"):
        segment.decode_segment(b"XXXX" + data[4:])
    payload = struct.pack("<qq", 5, 5) + struct.pack("<dd", 1.0, 2.0)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    bad = struct.pack("<4sHQIqqI", b"FSG1", 1, 1, 2, 5, 5, crc) + payload
    with pytest.raises(CorruptSegment, match="ascending"):
        segment.decode_segment(bad)


def test_golden_segment_files_bit_exact():
    for path in sorted(GOLDEN_DIR.glob("*.fsg")):
        data = path.read_bytes()
        ds_id, ts, vs = segment.decode_segment(data, path=path)
        assert segment.encode_segment(ds_id, ts, vs) == data


def test_golden_file_against_spec_constants():
    path = GOLDEN_DIR / "1000000000-2000000000.fsg"
    data = path.read_bytes()
    ds_id, ts, vs = segment.decode_segment(data, path=path)
    assert ds_id == 42
    assert data[:4] == b"FSG1"
    expected = _hand_packed_segment(42, [int(t) for t in ts], list(vs))
    assert data == expected


def test_flag_column_roundtrip_and_crc():
    meta = {"function": "flagRange", "kwargs": "max=45, min=0"}
    ts = np.array([10, 20], np.int64)
    fl = np.array([255.0, 0.0], np.float32)
    data = flagcol.encode_flag_column(5, 3, meta, ts, fl)
    ds_id, column_id, meta2, ts2, fl2 = flagcol.decode_flag_column(data)
    assert (ds_id, column_id, meta2) == (5, 3, meta)
    np.testing.assert_array_equal(ts, ts2)
    np.testing.assert_array_equal(fl, fl2)
    corrupted = bytearray(data)
    corrupted[-1] ^= 0x01
    with pytest.raises(CorruptFlagColumn, match="crc32"):
        flagcol.decode_flag_column(bytes(corrupted))
