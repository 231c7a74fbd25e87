"""Pipeline execution with per-point provenance.

Entries run in source order.  Before each entry the variable's working
series is masked: points whose current flag (persisted history merged
with columns produced earlier in this run) is >= the entry's dfilter are
invisible to the function, as are NaN values except as interpolation
targets.  Each flagging entry yields exactly one flag column -- possibly
with zero entries -- whose metadata pins function, canonical parameters,
config hash, engine version and run timestamp.

Runs are atomic: columns are buffered and only persisted once every
entry has succeeded.  Processing entries rebind the variable to the
derived series for the rest of the run; columns computed on a derived
grid are not written back to the source datastream (the timestamps no
longer exist there) and stay in the run result instead.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from .. import ENGINE_VERSION
from ..timeutil import format_rfc3339_ns, now_ns, parse_rfc3339_ns
from . import flags as F
from .dsl import QcConfig, canonical_kwargs_string
from .errors import UnknownVariable
from .functions import CATALOG, DerivedSeries, Series, flag_generic

RUN_TIME_ENV = "FAIRSTREAM_QC_RUN_TIME"


@dataclass
class SeriesFrame:
    timestamps: np.ndarray
    values: np.ndarray
    current_flags: np.ndarray
    source_bound: bool = True  # False once a proc entry rebinds the variable

    @classmethod
    def from_series(cls, ts, vs, flags=None, source_bound=True):
        ts = np.asarray(ts, np.int64)
        vs = np.asarray(vs, np.float64)
        if flags is None:
            flags = np.full(len(ts), F.UNFLAGGED, np.float32)
        return cls(ts, vs, np.asarray(flags, np.float32), source_bound)


@dataclass
class EntryReport:
    line: int
    variable: str
    function: str
    points_evaluated: int
    points_flagged: int
    column_id: int | None
    elapsed_ms: float

    def to_dict(self):
        return {
            "line": self.line,
            "variable": self.variable,
            "function": self.function,
            "points_evaluated": self.points_evaluated,
            "points_flagged": self.points_flagged,
            "column_id": self.column_id,
            "elapsed_ms": round(self.elapsed_ms, 3),
        }


@dataclass
class PendingColumn:
    variable: str
    meta: dict
    timestamps: np.ndarray
    flags: np.ndarray
    persistable: bool
    column_id: int | None = None


@dataclass
class QcRunReport:
    config_hash: str
    engine_version: str
    run_time: str
    window: tuple
    entries: list = field(default_factory=list)

    def to_dict(self):
        return {
            "config_hash": self.config_hash,
            "engine_version": self.engine_version,
            "run_time": self.run_time,
            "window": {"from": self.window[0], "to": self.window[1]},
            "entries": [e.to_dict() for e in self.entries],
        }


@dataclass
class RunResult:
    report: QcRunReport
    columns: list
    frames: dict
    derived: dict = field(default_factory=dict)


def resolve_run_time_ns(run_time_ns=None) -> int:
    """Run timestamp for provenance; FAIRSTREAM_QC_RUN_TIME pins it for
    byte-reproducible runs."""
    if run_time_ns is not None:
        return int(run_time_ns)
    pinned = os.environ.get(RUN_TIME_ENV)
    if pinned:
        return parse_rfc3339_ns(pinned)
    return now_ns()


def run_pipeline(config: QcConfig, frames: dict, column_writer=None,
                 run_time_ns=None, window=(None, None)) -> RunResult:
    """Execute a parsed config over working frames.

    column_writer(variable, meta, timestamps, flags) -> column_id
    persists one column; pass None for a dry run (preview) where columns
    stay in the result only.
    """
    run_time_ns = resolve_run_time_ns(run_time_ns)
    run_time = format_rfc3339_ns(run_time_ns)
    report = QcRunReport(config.config_hash, ENGINE_VERSION, run_time, window)
    pending = []
    derived = {}

    for entry in config.entries:
        frame = frames.get(entry.variable)
        if frame is None:
            raise UnknownVariable(entry.variable)
        call = entry.call
        cat = CATALOG[call.name]
        started = time.perf_counter()
        meta = {
            "function": call.name,
            "kwargs": canonical_kwargs_string(call),
            "config_hash": config.config_hash,
            "engine_version": ENGINE_VERSION,
            "run_time": run_time,
            "variable": entry.variable,
        }

        eval_mask = (frame.current_flags < call.dfilter) & ~np.isnan(frame.values)

        if cat.kind == "flag":
            sub = Series(frame.timestamps[eval_mask], frame.values[eval_mask])
            if cat.cross_variable:
                companions = {
                    name: (other.timestamps, other.values)
                    for name, other in frames.items() if name != entry.variable
                }
                assignment = flag_generic(sub, companions=companions, **call.kwargs)
            else:
                assignment = cat.func(sub, **call.kwargs)
            _apply_flags(frame, assignment.timestamps, assignment.flags)
            pending.append(PendingColumn(entry.variable, meta,
                                         assignment.timestamps, assignment.flags,
                                         persistable=frame.source_bound))
            evaluated, flagged = len(sub), len(assignment.timestamps)

        elif call.name == "procResample":
            sub = Series(frame.timestamps[eval_mask], frame.values[eval_mask])
            result: DerivedSeries = cat.func(sub, **call.kwargs)
            result.provenance["source_variable"] = entry.variable
            derived[entry.variable] = result
            frames[entry.variable] = SeriesFrame.from_series(
                result.series.timestamps, result.series.values, source_bound=False)
            evaluated, flagged = len(sub), 0

        else:  # procInterpolate: NaN points are targets, masked points invisible
            keep = eval_mask | np.isnan(frame.values)
            sub = Series(frame.timestamps[keep], frame.values[keep])
            new_series, assignment = cat.func(sub, **call.kwargs)
            idx = np.searchsorted(frame.timestamps, assignment.timestamps)
            filled_values = new_series.values[np.searchsorted(
                new_series.timestamps, assignment.timestamps)]
            frame.values = frame.values.copy()
            frame.values[idx] = filled_values
            _apply_flags(frame, assignment.timestamps, assignment.flags)
            pending.append(PendingColumn(entry.variable, meta,
                                         assignment.timestamps, assignment.flags,
                                         persistable=frame.source_bound))
            evaluated = int(np.isnan(sub.values).sum())
            flagged = len(assignment.timestamps)

        report.entries.append(EntryReport(
            entry.line, entry.variable, call.name, evaluated, flagged, None,
            (time.perf_counter() - started) * 1000.0))

    # all entries succeeded: persist buffered columns in order (atomic runs)
    if column_writer is not None:
        flag_reports = [r for r in report.entries
                        if CATALOG[r.function].kind == "flag"
                        or r.function == "procInterpolate"]
        for col, rep in zip(pending, flag_reports):
            if col.persistable:
                col.column_id = column_writer(col.variable, col.meta,
                                              col.timestamps, col.flags)
                rep.column_id = col.column_id

    return RunResult(report, pending, frames, derived)


def _apply_flags(frame: SeriesFrame, timestamps, flags):
    if len(timestamps) == 0:
        return
    idx = np.searchsorted(frame.timestamps, timestamps)
    frame.current_flags = frame.current_flags.copy()
    frame.current_flags[idx] = flags


def run_on_store(store, config: QcConfig, var_to_datastream: dict,
                 t_from: int, t_to: int, run_time_ns=None, dry_run=False) -> RunResult:
    """Load frames from the store, run, persist columns (unless dry_run)."""
    for entry in config.entries:
        if entry.variable not in var_to_datastream:
            raise UnknownVariable(entry.variable)
    frames = {}
    for variable, ds_id in var_to_datastream.items():
        res = store.query_range(ds_id, t_from, t_to, with_flags=True)
        frames[variable] = SeriesFrame(res.timestamps, res.values,
                                       res.flags.astype(np.float32))
    writer = None
    if not dry_run:
        def writer(variable, meta, ts, fl):
            return store.write_flag_column(var_to_datastream[variable], meta, ts, fl)
    return run_pipeline(config, frames, column_writer=writer,
                        run_time_ns=run_time_ns, window=(t_from, t_to))
