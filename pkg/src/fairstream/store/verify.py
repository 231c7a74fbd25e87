"""Structural verification of a store directory (fsck).

Hard violations (bad magic, crc mismatch, truncation, unsorted
timestamps, t_min/t_max inconsistency, filename not matching content)
are errors.  Conditions the engine recovers from by design -- a torn WAL
tail, a stale segment superseded by a newer full merge -- are reported
as notes and do not make the store unclean.
"""

from __future__ import annotations

import re
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from . import flagcol, segment
from .errors import CorruptFlagColumn, CorruptSegment

_SEG_NAME_RE = re.compile(r"^(-?\d+)-(-?\d+)\.fsg$")
_FFC_NAME_RE = re.compile(r"^(\d+)\.ffc$")
_WAL_FRAME = struct.Struct("<II")


@dataclass
class VerifyReport:
    errors: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    segments_checked: int = 0
    flag_columns_checked: int = 0
    wal_records_checked: int = 0

    @property
    def clean(self) -> bool:
        return not self.errors

    def lines(self):
        for err in self.errors:
            yield f"ERROR {err}"
        for note in self.notes:
            yield f"note  {note}"
        yield (f"checked: {self.segments_checked} segments, "
               f"{self.flag_columns_checked} flag columns, "
               f"{self.wal_records_checked} wal records")
        yield "clean" if self.clean else f"NOT CLEAN ({len(self.errors)} errors)"


def verify_store(data_dir) -> VerifyReport:
    report = VerifyReport()
    ds_root = Path(data_dir) / "ds"
    if not ds_root.is_dir():
        report.notes.append(f"{ds_root}: no datastreams")
        return report
    for ds_dir in sorted(ds_root.iterdir()):
        if not ds_dir.is_dir():
            continue
        if not ds_dir.name.isdigit():
            report.errors.append(f"{ds_dir}: unexpected entry in ds/")
            continue
        _verify_datastream(int(ds_dir.name), ds_dir, report)
    return report


def _verify_datastream(ds_id: int, ds_dir: Path, report: VerifyReport):
    seg_dir = ds_dir / "seg"
    ranges = []
    if seg_dir.is_dir():
        for path in sorted(seg_dir.iterdir()):
            if path.name.endswith(".tmp"):
                report.notes.append(f"{path}: leftover compaction temp file")
                continue
            m = _SEG_NAME_RE.match(path.name)
            if m is None:
                report.errors.append(f"{path}: segment filename not <t_min>-<t_max>.fsg")
                continue
            try:
                seg_ds, ts, _ = segment.read_segment_file(path)
            except CorruptSegment as exc:
                report.errors.append(str(exc))
                continue
            report.segments_checked += 1
            if seg_ds != ds_id:
                report.errors.append(f"{path}: datastream_id {seg_ds} != directory {ds_id}")
            if (int(m.group(1)), int(m.group(2))) != (int(ts[0]), int(ts[-1])):
                report.errors.append(f"{path}: filename range does not match content")
            ranges.append((int(ts[0]), int(ts[-1]), path, len(ts)))
    if len(ranges) > 1:
        ranges.sort(key=lambda r: (r[0] - r[1], -r[3]))
        outer = ranges[0]
        for inner in ranges[1:]:
            if outer[0] <= inner[0] and inner[1] <= outer[1]:
                report.notes.append(
                    f"{inner[2]}: stale segment superseded by {outer[2].name} (recoverable)")
            else:
                report.errors.append(
                    f"{inner[2]}: overlaps {outer[2].name} without being contained")

    flags_dir = ds_dir / "flags"
    if flags_dir.is_dir():
        seen = set()
        for path in sorted(flags_dir.iterdir()):
            if path.name.startswith(".tmp-"):
                report.notes.append(f"{path}: leftover column temp file (recoverable)")
                continue
            m = _FFC_NAME_RE.match(path.name)
            if m is None:
                report.errors.append(f"{path}: flag column filename not <column_id>.ffc")
                continue
            try:
                col_ds, column_id, _, _, _ = flagcol.read_flag_column_file(path)
            except CorruptFlagColumn as exc:
                report.errors.append(str(exc))
                continue
            report.flag_columns_checked += 1
            if col_ds != ds_id:
                report.errors.append(f"{path}: datastream_id {col_ds} != directory {ds_id}")
            if column_id != int(m.group(1)):
                report.errors.append(f"{path}: column_id {column_id} does not match filename")
            seen.add(column_id)

    wal_path = ds_dir / "wal.log"
    if wal_path.exists():
        _verify_wal(wal_path, report)


def _verify_wal(path: Path, report: VerifyReport):
    data = path.read_bytes()
    offset = 0
    while offset + _WAL_FRAME.size <= len(data):
        length, crc = _WAL_FRAME.unpack_from(data, offset)
        start = offset + _WAL_FRAME.size
        end = start + length
        if end > len(data):
            break
        payload = data[start:end]
        if zlib.crc32(payload) & 0xFFFFFFFF != crc:
            break
        report.wal_records_checked += 1
        offset = end
    if offset < len(data):
        report.notes.append(
            f"{path}: torn tail, {len(data) - offset} trailing bytes ignored (recoverable)")
