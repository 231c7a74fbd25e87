import numpy as np
import pytest

import qc_oracles as oracle
from fairstream.qc import flags as F
from fairstream.qc.dsl import parse_config
from fairstream.qc.errors import UnknownVariable
from fairstream.qc.pipeline import SeriesFrame, run_on_store, run_pipeline

S = 1_000_000_000
RUN_T = 1_717_200_000 * S


def frame_of(values, step=S):
    values = np.asarray(values, np.float64)
    ts = np.arange(len(values), dtype=np.int64) * step
    return SeriesFrame.from_series(ts, values)


def test_two_entries_two_columns_consecutive_ids(store):
    store.create_datastream(1)
    store.append(1, np.arange(6, dtype=np.int64) * S, [1.0, 2.0, 2.0, 2.0, 2.0, 99.0])
    cfg = parse_config(
        "temp ; flagRange(min=0, max=45)\n"
        "temp ; flagConstants(window=3, tolerance=0)\n")
    result = run_on_store(store, cfg, {"temp": 1}, 0, 10 * S, run_time_ns=RUN_T)
    ids = [c.column_id for c in result.columns]
    assert ids == [1, 2]
    cols = store.flag_columns(1)
    assert [c.column_id for c in cols] == [1, 2]
    assert cols[0].meta["function"] == "flagRange"
    assert cols[0].meta["config_hash"] == cfg.config_hash
    assert "engine_version" in cols[0].meta and "run_time" in cols[0].meta


def test_empty_config_no_columns(store):
    store.create_datastream(1)
    store.append(1, [0], [1.0])
    result = run_on_store(store, parse_config("# nothing\n"), {"temp": 1}, 0, S,
                          run_time_ns=RUN_T)
    assert result.report.entries == []
    assert store.flag_columns(1) == []


def test_masked_points_excluded_from_spike_windows():
    # flagRange marks the 999 BAD; the subsequent spike pass must not see it,
    # so the windows close over the remaining points and the 50 spike stands out.
    values = [1.0, 1.0, 999.0, 1.0, 50.0, 1.0, 1.0]
    frames = {"v": frame_of(values)}
    cfg = parse_config(
        "v ; flagRange(min=0, max=100)\n"
        "v ; flagSpikeMAD(window=5, z=3.5)\n")
    result = run_pipeline(cfg, frames, run_time_ns=RUN_T)
    range_col, spike_col = result.columns
    assert range_col.timestamps.tolist() == [2 * S]
    # oracle over the unmasked sub-series
    sub = [v for v in values if v <= 100]
    sub_ts = [i * S for i, v in enumerate(values) if v <= 100]
    want = [t for t, hit in zip(sub_ts, oracle.spike_mad_oracle(sub, 5, 3.5)) if hit]
    assert spike_col.timestamps.tolist() == want
    assert 4 * S in spike_col.timestamps.tolist()


def test_dfilter_unflagged_masks_everything():
    frames = {"v": frame_of([1.0, 999.0])}
    cfg = parse_config("v ; flagRange(min=0, max=100, dfilter=UNFLAGGED)\n")
    result = run_pipeline(cfg, frames, run_time_ns=RUN_T)
    assert result.report.entries[0].points_evaluated == 0
    assert len(result.columns[0].timestamps) == 0


def test_unknown_variable_aborts_atomically(store):
    store.create_datastream(1)
    store.append(1, [0], [1.0])
    cfg = parse_config(
        "temp ; flagRange(min=0, max=1)\n"
        "other ; flagRange(min=0, max=1)\n")
    with pytest.raises(UnknownVariable):
        run_on_store(store, cfg, {"temp": 1}, 0, S, run_time_ns=RUN_T)
    assert store.flag_columns(1) == []  # nothing persisted from the failed run


def test_report_totals_exact():
    frames = {"v": frame_of([1.0, 999.0, 2.0, np.nan])}
    cfg = parse_config("v ; flagRange(min=0, max=100)\n")
    result = run_pipeline(cfg, frames, run_time_ns=RUN_T)
    entry = result.report.entries[0]
    assert entry.points_evaluated == 3  # NaN value not evaluated
    assert entry.points_flagged == 1
    assert entry.points_flagged <= entry.points_evaluated


def test_resample_rebinds_variable_and_masks_bad(store):
    store.create_datastream(1)
    ts = np.array([0, 30 * S, 60 * S], np.int64)
    store.append(1, ts, [1.0, 3.0, 5.0])
    store.write_flag_column(1, {"seed": "1"}, ts.tolist(), [F.BAD] * 3)
    cfg = parse_config('temp ; procResample(freq="60s")\n')
    result = run_on_store(store, cfg, {"temp": 1}, 0, 100 * S, run_time_ns=RUN_T)
    assert len(result.frames["temp"].timestamps) == 0  # all sources masked
    assert "temp" in result.derived

    cfg2 = parse_config('temp ; procResample(freq="60s", dfilter=255, aggregation="mean")\n')
    res2 = run_on_store(store, cfg2, {"temp": 1}, 0, 100 * S, run_time_ns=RUN_T)
    assert len(res2.frames["temp"].timestamps) == 0


def test_resample_then_flag_not_persisted_to_source(store):
    store.create_datastream(1)
    store.append(1, np.array([0, 30 * S, 60 * S], np.int64), [1.0, 3.0, 500.0])
    cfg = parse_config(
        'temp ; procResample(freq="60s")\n'
        "temp ; flagRange(min=0, max=100)\n")
    result = run_on_store(store, cfg, {"temp": 1}, 0, 100 * S, run_time_ns=RUN_T)
    # derived grid timestamps do not exist in the source datastream
    assert store.flag_columns(1) == []
    assert result.columns[0].persistable is False
    assert result.columns[0].timestamps.tolist() == [60 * S]


def test_interpolate_writes_doubtful_column():
    frames = {"v": SeriesFrame.from_series(
        np.array([0, 50 * S, 100 * S], np.int64), np.array([0.0, np.nan, 10.0]))}
    cfg = parse_config('v ; procInterpolate(maxgap="120s")\n')
    result = run_pipeline(cfg, frames, run_time_ns=RUN_T)
    assert frames["v"].values.tolist() == [0.0, 5.0, 10.0]
    col = result.columns[0]
    assert col.timestamps.tolist() == [50 * S]
    assert col.flags.tolist() == [F.DOUBTFUL]


def test_determinism_byte_for_byte(tmp_path):
    from fairstream.store import TimeSeriesStore

    def run_once(root):
        store = TimeSeriesStore(root)
        store.create_datastream(1)
        rng = np.random.default_rng(7)
        ts = np.arange(500, dtype=np.int64) * S
        store.append(1, ts, rng.normal(size=500))
        cfg = parse_config(
            "temp ; flagRange(min=-1.5, max=1.5)\n"
            "temp ; flagSpikeMAD(window=5)\n")
        run_on_store(store, cfg, {"temp": 1}, 0, 600 * S, run_time_ns=RUN_T)
        store.close()
        return [(p.name, p.read_bytes())
                for p in sorted((root / "ds" / "1" / "flags").glob("*.ffc"))]

    a = run_once(tmp_path / "a")
    b = run_once(tmp_path / "b")
    assert a == b
    assert len(a) == 2
