"""Embedded append-optimized time-series store.

Layout on disk, one directory per datastream:

    <data>/ds/<id>/wal.log           write-ahead log (points + flag columns)
    <data>/ds/<id>/seg/<min>-<max>.fsg   sorted columnar segment
    <data>/ds/<id>/flags/<column_id>.ffc flag columns, append-only history

Write path: every append lands in the WAL (flushed) before the call
returns; a memtable mirrors the WAL for queries.  When the WAL crosses a
threshold the memtable is folded with the existing segment into a single
new segment (full compaction), the WAL is truncated, and stale segment
files are removed.  Duplicate timestamps resolve last-write-wins, which
also gives ingestion its idempotency.

Crash safety: the segment replace is write-tmp + fsync + atomic rename,
and the WAL is only truncated after the new segment is durable.  A crash
at any point replays to the exact acknowledged state.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import flagcol, segment, wal
from .errors import StoreError, UnknownDatastream, UnknownTimestamp

logger = logging.getLogger(__name__)

UNFLAGGED = float("-inf")

_FLAG_MAX = 255.0


@dataclass
class Observation:
    phenomenon_time: int  # ns since epoch, UTC
    result: float
    result_time: int | None = None  # ingest time; None once folded into a segment


@dataclass
class FlagColumn:
    column_id: int
    meta: dict
    timestamps: np.ndarray
    flags: np.ndarray


@dataclass
class AppendResult:
    accepted: int
    rejected_nan: list = field(default_factory=list)


@dataclass
class QueryResult:
    timestamps: np.ndarray
    values: np.ndarray
    result_times: np.ndarray | None = None  # -1 where unknown
    flags: np.ndarray | None = None

    def __len__(self):
        return len(self.timestamps)

    def observations(self):
        for i in range(len(self.timestamps)):
            rt = None
            if self.result_times is not None and self.result_times[i] >= 0:
                rt = int(self.result_times[i])
            yield Observation(int(self.timestamps[i]), float(self.values[i]), rt)


class _DatastreamState:
    __slots__ = (
        "ds_id", "dir", "seg_dir", "flags_dir", "seg_path",
        "seg_ts", "seg_vs", "mem", "mem_dirty", "mem_ts", "mem_vs", "mem_rt",
        "columns", "wal", "lock", "writer_lock",
    )

    def __init__(self, ds_id: int, ds_dir: Path):
        self.ds_id = ds_id
        self.dir = ds_dir
        self.seg_dir = ds_dir / "seg"
        self.flags_dir = ds_dir / "flags"
        self.seg_path = None
        self.seg_ts = np.empty(0, np.int64)
        self.seg_vs = np.empty(0, np.float64)
        self.mem = {}  # ts -> (value, result_time)
        self.mem_dirty = False
        self.mem_ts = np.empty(0, np.int64)
        self.mem_vs = np.empty(0, np.float64)
        self.mem_rt = np.empty(0, np.int64)
        self.columns = []
        self.wal = None
        self.lock = threading.RLock()         # guards state swaps and reads
        self.writer_lock = threading.RLock()  # serializes the single writer

    def rebuild_mem_arrays(self):
        if not self.mem_dirty:
            return
        if self.mem:
            items = sorted(self.mem.items())
            self.mem_ts = np.fromiter((t for t, _ in items), np.int64, len(items))
            self.mem_vs = np.fromiter((vr[0] for _, vr in items), np.float64, len(items))
            self.mem_rt = np.fromiter((vr[1] for _, vr in items), np.int64, len(items))
        else:
            self.mem_ts = np.empty(0, np.int64)
            self.mem_vs = np.empty(0, np.float64)
            self.mem_rt = np.empty(0, np.int64)
        self.mem_dirty = False


class TimeSeriesStore:
    """Single-process store over one data directory."""

    def __init__(self, data_dir, compaction_max_wal_bytes=4 * 1024 * 1024,
                 compaction_max_points=10_000, fsync=False):
        self.root = Path(data_dir)
        self.ds_root = self.root / "ds"
        self.ds_root.mkdir(parents=True, exist_ok=True)
        self.compaction_max_wal_bytes = compaction_max_wal_bytes
        self.compaction_max_points = compaction_max_points
        self.fsync = fsync
        self._states = {}
        self._states_lock = threading.Lock()
        for entry in sorted(self.ds_root.iterdir()):
            if entry.is_dir() and entry.name.isdigit():
                self._states[int(entry.name)] = self._open_state(int(entry.name), entry)

    # -- lifecycle ---------------------------------------------------------

    def close(self):
        for state in self._states.values():
            with state.lock:
                if state.wal is not None:
                    state.wal.close()
                    state.wal = None

    def create_datastream(self, ds_id: int) -> bool:
        """Create backing directories for a datastream; idempotent."""
        ds_id = int(ds_id)
        with self._states_lock:
            if ds_id in self._states:
                return False
            ds_dir = self.ds_root / str(ds_id)
            (ds_dir / "seg").mkdir(parents=True, exist_ok=True)
            (ds_dir / "flags").mkdir(parents=True, exist_ok=True)
            self._states[ds_id] = self._open_state(ds_id, ds_dir)
            return True

    def has_datastream(self, ds_id: int) -> bool:
        return int(ds_id) in self._states

    def datastream_ids(self):
        return sorted(self._states)

    def _state(self, ds_id) -> _DatastreamState:
        try:
            return self._states[int(ds_id)]
        except (KeyError, TypeError, ValueError):
            raise UnknownDatastream(ds_id) from None

    def _open_state(self, ds_id: int, ds_dir: Path) -> _DatastreamState:
        state = _DatastreamState(ds_id, ds_dir)
        state.seg_dir.mkdir(exist_ok=True)
        state.flags_dir.mkdir(exist_ok=True)

        # Drop leftover compaction temp files.
        for tmp in state.seg_dir.glob("*.tmp"):
            tmp.unlink()

        # A crash between segment replace and stale-file cleanup can leave
        # more than one segment; the latest full merge strictly contains
        # the others, so keep the widest and drop the rest.
        seg_files = sorted(state.seg_dir.glob("*.fsg"))
        if seg_files:
            loaded = []
            for path in seg_files:
                _, ts, vs = segment.read_segment_file(path)
                loaded.append((path, ts, vs))
            loaded.sort(key=lambda item: (int(item[1][0]) - int(item[1][-1]), -len(item[1])))
            path, ts, vs = loaded[0]
            for stale, stale_ts, _ in loaded[1:]:
                if not (ts[0] <= stale_ts[0] and stale_ts[-1] <= ts[-1]):
                    raise StoreError(
                        f"{stale}: overlapping segments that are not nested; refusing to open"
                    )
                logger.warning("dropping stale segment %s superseded by %s", stale, path)
                stale.unlink()
            state.seg_path = path
            state.seg_ts = ts
            state.seg_vs = vs

        for tmp in state.flags_dir.glob(".tmp-*"):
            tmp.unlink()
        for path in sorted(state.flags_dir.glob("*.ffc"),
                           key=lambda p: int(p.stem)):
            _, column_id, meta, ts, fl = flagcol.read_flag_column_file(path)
            state.columns.append(FlagColumn(column_id, meta, ts, fl))

        wal_path = ds_dir / "wal.log"
        for record in wal.replay(wal_path):
            if record[0] == "points":
                _, ts, vs = record
                rt = -1
                for i in range(len(ts)):
                    state.mem[int(ts[i])] = (float(vs[i]), rt)
            else:
                _, column_id, meta_bytes, ts, fl = record
                if any(c.column_id == column_id for c in state.columns):
                    continue  # .ffc already durable
                self._write_ffc(state, column_id, meta_bytes, ts, fl)
        # WAL replay loses per-batch receive times on purpose (points keep
        # their value; result_time is transient metadata).
        if state.mem:
            state.mem_dirty = True
            state.rebuild_mem_arrays()
        state.wal = wal.WriteAheadLog(wal_path, fsync=self.fsync)
        state.columns.sort(key=lambda c: c.column_id)
        return state

    # -- writes ------------------------------------------------------------

    def append(self, ds_id, timestamps, values, received_at=None) -> AppendResult:
        """Append points; durable in the WAL before return.

        NaN results are rejected point-by-point and reported; equal
        timestamps replace the stored point (last write wins).
        """
        state = self._state(ds_id)
        ts = np.asarray(timestamps, dtype=np.int64)
        vs = np.asarray(values, dtype=np.float64)
        if len(ts) != len(vs):
            raise ValueError("timestamps and values length mismatch")
        if len(ts) == 0:
            raise ValueError("append requires at least one point")
        nan_mask = np.isnan(vs)
        rejected = [int(t) for t in ts[nan_mask]]
        if nan_mask.any():
            ts = ts[~nan_mask]
            vs = vs[~nan_mask]
        if len(ts) == 0:
            return AppendResult(0, rejected)
        rt = -1 if received_at is None else int(received_at)
        with state.writer_lock:
            state.wal.append(wal.encode_points(ts, vs))
            with state.lock:
                mem = state.mem
                for i in range(len(ts)):
                    mem[int(ts[i])] = (vs[i], rt)
                state.mem_dirty = True
            self._maybe_compact(state)
        return AppendResult(len(ts), rejected)

    def append_observations(self, ds_id, observations) -> AppendResult:
        ts = np.fromiter((o.phenomenon_time for o in observations), np.int64,
                         len(observations))
        vs = np.fromiter((o.result for o in observations), np.float64,
                         len(observations))
        rts = [o.result_time for o in observations if o.result_time is not None]
        received = rts[-1] if rts else None
        return self.append(ds_id, ts, vs, received_at=received)

    def write_flag_column(self, ds_id, meta: dict, timestamps, flags) -> int:
        """Append a new flag column; atomic, validates all timestamps exist."""
        state = self._state(ds_id)
        ts = np.asarray(timestamps, dtype=np.int64)
        fl = np.asarray(flags, dtype=np.float32)
        if len(ts) != len(fl):
            raise ValueError("timestamps and flags length mismatch")
        order = np.argsort(ts, kind="stable")
        ts = ts[order]
        fl = fl[order]
        if len(ts) > 1 and bool(np.any(ts[1:] == ts[:-1])):
            raise ValueError("duplicate timestamps in flag column")
        finite = fl[np.isfinite(fl)]
        if len(finite) and (finite.min() < 0.0 or finite.max() > _FLAG_MAX):
            raise ValueError("flag values must be UNFLAGGED or within [0, 255]")
        if np.any(np.isnan(fl)) or np.any(np.isposinf(fl)):
            raise ValueError("flag values must be UNFLAGGED or within [0, 255]")
        with state.writer_lock:
            if len(ts):
                missing = ~self._timestamps_exist_locked(state, ts)
                if bool(missing.any()):
                    raise UnknownTimestamp([int(t) for t in ts[missing]])
            column_id = (state.columns[-1].column_id + 1) if state.columns else 1
            meta_bytes = flagcol.canonical_meta_bytes(meta)
            state.wal.append(wal.encode_flag_column(column_id, meta_bytes, ts, fl))
            self._write_ffc(state, column_id, meta_bytes, ts, fl)
        return column_id

    def _write_ffc(self, state, column_id, meta_bytes, ts, fl):
        meta = json.loads(meta_bytes.decode())
        data = flagcol.encode_flag_column(state.ds_id, column_id, meta, ts, fl)
        path = state.flags_dir / flagcol.flag_column_filename(column_id)
        # write-tmp + rename: a kill mid-write must never leave a truncated
        # file under the final name (the WAL record covers the gap)
        tmp = state.flags_dir / f".tmp-{column_id}"
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            if self.fsync:
                os.fsync(fh.fileno())
        os.replace(tmp, path)
        with state.lock:
            state.columns.append(FlagColumn(column_id, meta, ts, fl))

    # -- compaction --------------------------------------------------------

    def _maybe_compact(self, state):
        if (state.wal.size >= self.compaction_max_wal_bytes
                or len(state.mem) >= self.compaction_max_points):
            self._compact(state)

    def compact(self, ds_id):
        state = self._state(ds_id)
        with state.writer_lock:
            self._compact(state)

    def _compact(self, state):
        with state.lock:
            state.rebuild_mem_arrays()
            mem_ts, mem_vs = state.mem_ts, state.mem_vs
            seg_ts, seg_vs = state.seg_ts, state.seg_vs
        if len(mem_ts) == 0:
            if state.wal.size > 0:
                state.wal.truncate()
            return
        ts, vs = _merge_upsert(seg_ts, seg_vs, mem_ts, mem_vs)
        name = segment.segment_filename(int(ts[0]), int(ts[-1]))
        final = state.seg_dir / name
        tmp = state.seg_dir / (name + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(segment.encode_segment(state.ds_id, ts, vs))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, final)
        old = state.seg_path
        if old is not None and old != final:
            old.unlink(missing_ok=True)
        state.wal.truncate()
        with state.lock:
            state.seg_path = final
            state.seg_ts = ts
            state.seg_vs = vs
            state.mem = {}
            state.mem_dirty = True
            state.rebuild_mem_arrays()

    # -- reads -------------------------------------------------------------

    def _snapshot(self, state):
        with state.lock:
            state.rebuild_mem_arrays()
            return (state.seg_ts, state.seg_vs, state.mem_ts, state.mem_vs,
                    state.mem_rt, list(state.columns))

    def count(self, ds_id) -> int:
        state = self._state(ds_id)
        seg_ts, _, mem_ts, _, _, _ = self._snapshot(state)
        if len(mem_ts) == 0:
            return len(seg_ts)
        if len(seg_ts) == 0:
            return len(mem_ts)
        dup = np.isin(mem_ts, seg_ts, assume_unique=True)
        return len(seg_ts) + len(mem_ts) - int(dup.sum())

    def time_bounds(self, ds_id):
        """(t_min, t_max) over the datastream, or None when empty."""
        state = self._state(ds_id)
        seg_ts, _, mem_ts, _, _, _ = self._snapshot(state)
        bounds = []
        if len(seg_ts):
            bounds.append((int(seg_ts[0]), int(seg_ts[-1])))
        if len(mem_ts):
            bounds.append((int(mem_ts[0]), int(mem_ts[-1])))
        if not bounds:
            return None
        return min(b[0] for b in bounds), max(b[1] for b in bounds)

    def query_range(self, ds_id, t_start, t_end, order="asc", limit=None,
                    offset=0, with_flags=False) -> QueryResult:
        """Points in [t_start, t_end) in the requested order, paginated."""
        if t_start > t_end:
            raise ValueError("t_start must be <= t_end")
        if order not in ("asc", "desc"):
            raise ValueError(f"order must be 'asc' or 'desc', got {order!r}")
        state = self._state(ds_id)
        seg_ts, seg_vs, mem_ts, mem_vs, mem_rt, columns = self._snapshot(state)

        s0, s1 = np.searchsorted(seg_ts, (t_start, t_end))
        m0, m1 = np.searchsorted(mem_ts, (t_start, t_end))
        ts, vs, rt = _merge_upsert_rt(
            seg_ts[s0:s1], seg_vs[s0:s1],
            mem_ts[m0:m1], mem_vs[m0:m1], mem_rt[m0:m1])

        if order == "desc":
            ts, vs, rt = ts[::-1], vs[::-1], rt[::-1]
        if offset:
            ts, vs, rt = ts[offset:], vs[offset:], rt[offset:]
        if limit is not None:
            ts, vs, rt = ts[:limit], vs[:limit], rt[:limit]

        flags = None
        if with_flags:
            if order == "desc":
                asc = ts[::-1]
                flags = _current_flags(asc, columns)[::-1].copy()
            else:
                flags = _current_flags(ts, columns)
        return QueryResult(ts.copy(), vs.copy(), rt.copy(), flags)

    def timestamps_exist(self, ds_id, timestamps) -> np.ndarray:
        state = self._state(ds_id)
        ts = np.asarray(timestamps, dtype=np.int64)
        with state.lock:
            return self._timestamps_exist_locked(state, ts)

    def _timestamps_exist_locked(self, state, ts: np.ndarray) -> np.ndarray:
        state.rebuild_mem_arrays()
        exists = _sorted_membership(state.seg_ts, ts)
        exists |= _sorted_membership(state.mem_ts, ts)
        return exists

    # -- flags -------------------------------------------------------------

    def flag_columns(self, ds_id):
        state = self._state(ds_id)
        with state.lock:
            return list(state.columns)

    def current_flag(self, ds_id, timestamp) -> float:
        state = self._state(ds_id)
        ts = np.array([int(timestamp)], dtype=np.int64)
        with state.lock:
            if not bool(self._timestamps_exist_locked(state, ts)[0]):
                raise UnknownTimestamp([int(timestamp)])
            columns = list(state.columns)
        return float(_current_flags(ts, columns)[0])

    def current_flags_at(self, ds_id, timestamps) -> np.ndarray:
        """Vector of current flags for a sorted timestamp array."""
        state = self._state(ds_id)
        ts = np.asarray(timestamps, dtype=np.int64)
        with state.lock:
            columns = list(state.columns)
        return _current_flags(ts, columns)


def _sorted_membership(haystack: np.ndarray, needles: np.ndarray) -> np.ndarray:
    if len(haystack) == 0 or len(needles) == 0:
        return np.zeros(len(needles), dtype=bool)
    idx = np.searchsorted(haystack, needles)
    idx = np.minimum(idx, len(haystack) - 1)
    return haystack[idx] == needles


def _merge_upsert(seg_ts, seg_vs, mem_ts, mem_vs):
    """Merge two sorted unique series; the mem side wins on equal ts."""
    if len(mem_ts) == 0:
        return seg_ts, seg_vs
    if len(seg_ts) == 0:
        return mem_ts, mem_vs
    dup = _sorted_membership(mem_ts, seg_ts)
    keep = ~dup
    ts = np.concatenate([seg_ts[keep], mem_ts])
    vs = np.concatenate([seg_vs[keep], mem_vs])
    order = np.argsort(ts, kind="mergesort")
    return ts[order], vs[order]


def _merge_upsert_rt(seg_ts, seg_vs, mem_ts, mem_vs, mem_rt):
    if len(mem_ts) == 0:
        return seg_ts, seg_vs, np.full(len(seg_ts), -1, np.int64)
    if len(seg_ts) == 0:
        return mem_ts, mem_vs, mem_rt
    dup = _sorted_membership(mem_ts, seg_ts)
    keep = ~dup
    ts = np.concatenate([seg_ts[keep], mem_ts])
    vs = np.concatenate([seg_vs[keep], mem_vs])
    rt = np.concatenate([np.full(int(keep.sum()), -1, np.int64), mem_rt])
    order = np.argsort(ts, kind="mergesort")
    return ts[order], vs[order], rt[order]


def _current_flags(ts: np.ndarray, columns) -> np.ndarray:
    """Latest-column-wins flags for a sorted timestamp vector."""
    flags = np.full(len(ts), UNFLAGGED, dtype=np.float32)
    if len(ts) == 0:
        return flags
    for col in columns:  # oldest to newest; later writes overwrite
        if len(col.timestamps) == 0:
            continue
        idx = np.searchsorted(ts, col.timestamps)
        idx_c = np.minimum(idx, len(ts) - 1)
        hit = ts[idx_c] == col.timestamps
        flags[idx_c[hit]] = col.flags[hit]
    return flags
