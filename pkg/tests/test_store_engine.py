import numpy as np
import pytest

from fairstream.store import TimeSeriesStore, UNFLAGGED
from fairstream.store.errors import UnknownDatastream, UnknownTimestamp
from fairstream.store.verify import verify_store


def test_append_and_query_in_time_order(store):
    store.create_datastream(1)
    store.append(1, [30, 10, 20], [3.0, 1.0, 2.0])
    res = store.query_range(1, 0, 100)
    np.testing.assert_array_equal(res.timestamps, [10, 20, 30])
    np.testing.assert_array_equal(res.values, [1.0, 2.0, 3.0])


def test_upsert_last_write_wins(store):
    store.create_datastream(1)
    store.append(1, [10], [1.0])
    store.append(1, [10], [2.0])
    res = store.query_range(1, 0, 100)
    assert len(res) == 1
    assert res.values[0] == 2.0


def test_upsert_across_compaction(store):
    store.create_datastream(1)
    store.append(1, [10, 20], [1.0, 2.0])
    store.compact(1)
    store.append(1, [10], [5.0])
    res = store.query_range(1, 0, 100)
    np.testing.assert_array_equal(res.values, [5.0, 2.0])
    store.compact(1)
    res = store.query_range(1, 0, 100)
    np.testing.assert_array_equal(res.values, [5.0, 2.0])


def test_shuffled_points_query_sorted_oracle(store, rng):
    store.create_datastream(1)
    ts = rng.choice(np.arange(100_000, dtype=np.int64), size=10_000, replace=False)
    vs = rng.normal(size=10_000)
    store.append(1, ts, vs)
    res = store.query_range(1, 0, 100_000)
    order = np.argsort(ts)
    np.testing.assert_array_equal(res.timestamps, ts[order])
    np.testing.assert_array_equal(res.values, vs[order])


def test_half_open_interval(store):
    store.create_datastream(1)
    store.append(1, [1, 2, 3], [1.0, 2.0, 3.0])
    res = store.query_range(1, 2, 3)
    np.testing.assert_array_equal(res.timestamps, [2])


def test_pagination_union_equals_full_set(store):
    store.create_datastream(1)
    store.append(1, [1, 2, 3, 4, 5], [1.0, 2.0, 3.0, 4.0, 5.0])
    page = store.query_range(1, 0, 10, limit=2, offset=2)
    np.testing.assert_array_equal(page.timestamps, [3, 4])
    seen = []
    off = 0
    while True:
        chunk = store.query_range(1, 0, 10, limit=2, offset=off)
        if len(chunk) == 0:
            break
        seen.extend(chunk.timestamps.tolist())
        off += 2
    assert seen == [1, 2, 3, 4, 5]


def test_desc_order_then_paginate(store):
    store.create_datastream(1)
    store.append(1, [1, 2, 3, 4], [1.0, 2.0, 3.0, 4.0])
    res = store.query_range(1, 0, 10, order="desc", limit=2, offset=1)
    np.testing.assert_array_equal(res.timestamps, [3, 2])


def test_empty_datastream_query_is_empty_not_error(store):
    store.create_datastream(1)
    assert len(store.query_range(1, 0, 100)) == 0


def test_unknown_datastream(store):
    with pytest.raises(UnknownDatastream):
        store.query_range(99, 0, 1)
    with pytest.raises(UnknownDatastream):
        store.append(99, [1], [1.0])


def test_nan_rejected_per_point(store):
    store.create_datastream(1)
    result = store.append(1, [1, 2, 3], [1.0, float("nan"), 3.0])
    assert result.accepted == 2
    assert result.rejected_nan == [2]
    np.testing.assert_array_equal(store.query_range(1, 0, 10).timestamps, [1, 3])


def test_query_oracle_equivalence_random_probes(store, rng):
    """query_range must agree with a naive sorted-dict oracle."""
    store.create_datastream(1)
    oracle = {}
    for _ in range(20):
        n = int(rng.integers(1, 400))
        ts = rng.integers(0, 5_000, size=n)
        vs = rng.normal(size=n)
        store.append(1, ts, vs)
        for t, v in zip(ts.tolist(), vs.tolist()):
            oracle[t] = v
        if rng.random() < 0.3:
            store.compact(1)
    keys = sorted(oracle)
    for _ in range(1000):
        a, b = sorted(rng.integers(-100, 5_200, size=2).tolist())
        order = "asc" if rng.random() < 0.5 else "desc"
        limit = None if rng.random() < 0.3 else int(rng.integers(0, 50))
        offset = int(rng.integers(0, 20))
        expect = [t for t in keys if a <= t < b]
        if order == "desc":
            expect = expect[::-1]
        expect = expect[offset:]
        if limit is not None:
            expect = expect[:limit]
        got = store.query_range(1, a, b, order=order, limit=limit, offset=offset)
        assert got.timestamps.tolist() == expect
        assert got.values.tolist() == [oracle[t] for t in expect]


class TestFlagColumns:
    def test_column_ids_monotonic(self, store):
        store.create_datastream(1)
        store.append(1, [10, 20], [1.0, 2.0])
        c1 = store.write_flag_column(1, {"f": "a"}, [10], [255.0])
        c2 = store.write_flag_column(1, {"f": "b"}, [20], [0.0])
        assert (c1, c2) == (1, 2)

    def test_unknown_timestamp_is_atomic(self, store):
        store.create_datastream(1)
        store.append(1, [10], [1.0])
        with pytest.raises(UnknownTimestamp) as exc:
            store.write_flag_column(1, {}, [10, 11], [0.0, 0.0])
        assert exc.value.offenders == [11]
        assert store.flag_columns(1) == []

    def test_current_flag_latest_column_wins(self, store):
        store.create_datastream(1)
        store.append(1, [10, 20], [1.0, 2.0])
        assert store.current_flag(1, 10) == UNFLAGGED
        store.write_flag_column(1, {}, [10], [255.0])
        store.write_flag_column(1, {}, [10], [0.0])
        assert store.current_flag(1, 10) == 0.0

    def test_untouched_timestamp_keeps_older_flag(self, store):
        store.create_datastream(1)
        store.append(1, [10, 20], [1.0, 2.0])
        store.write_flag_column(1, {}, [10], [255.0])
        store.write_flag_column(1, {}, [20], [0.0])
        assert store.current_flag(1, 10) == 255.0

    def test_current_flag_unknown_timestamp(self, store):
        store.create_datastream(1)
        store.append(1, [10], [1.0])
        with pytest.raises(UnknownTimestamp):
            store.current_flag(1, 11)

    def test_random_history_vs_newest_scan_oracle(self, store, rng):
        store.create_datastream(1)
        all_ts = np.arange(0, 100, dtype=np.int64)
        store.append(1, all_ts, rng.normal(size=100))
        history = []
        for _ in range(20):
            k = int(rng.integers(1, 30))
            ts = np.sort(rng.choice(all_ts, size=k, replace=False))
            fl = rng.choice([0.0, 25.0, 255.0], size=k).astype(np.float32)
            store.write_flag_column(1, {}, ts, fl)
            history.append(dict(zip(ts.tolist(), fl.tolist())))
        for t in all_ts.tolist():
            expect = UNFLAGGED
            for entries in reversed(history):
                if t in entries:
                    expect = entries[t]
                    break
            assert store.current_flag(1, t) == np.float32(expect)

    def test_column_bytes_immutable_after_later_writes(self, store):
        store.create_datastream(1)
        store.append(1, [10, 20], [1.0, 2.0])
        store.write_flag_column(1, {"f": "a"}, [10], [255.0])
        path = store.ds_root / "1" / "flags" / "1.ffc"
        before = path.read_bytes()
        store.write_flag_column(1, {"f": "b"}, [20], [25.0])
        assert path.read_bytes() == before

    def test_query_with_flags(self, store):
        store.create_datastream(1)
        store.append(1, [10, 20, 30], [1.0, 2.0, 3.0])
        store.write_flag_column(1, {}, [20], [255.0])
        res = store.query_range(1, 0, 100, with_flags=True)
        assert res.flags.tolist() == [UNFLAGGED, 255.0, UNFLAGGED]


class TestDurability:
    def test_reopen_after_clean_close(self, tmp_path):
        s = TimeSeriesStore(tmp_path / "d")
        s.create_datastream(5)
        s.append(5, [1, 2], [1.0, 2.0])
        s.write_flag_column(5, {"f": "x"}, [1], [255.0])
        s.close()
        s2 = TimeSeriesStore(tmp_path / "d")
        res = s2.query_range(5, 0, 10, with_flags=True)
        np.testing.assert_array_equal(res.timestamps, [1, 2])
        assert res.flags.tolist() == [255.0, UNFLAGGED]
        s2.close()

    def test_wal_replay_without_compaction(self, tmp_path):
        s = TimeSeriesStore(tmp_path / "d", compaction_max_points=10_000)
        s.create_datastream(1)
        s.append(1, [1, 2, 3], [1.0, 2.0, 3.0])
        # no close: simulate losing in-memory state with the WAL intact
        s2 = TimeSeriesStore(tmp_path / "d")
        assert s2.query_range(1, 0, 10).values.tolist() == [1.0, 2.0, 3.0]
        s2.close()
        s.close()

    def test_torn_wal_tail_is_truncated_and_clean(self, tmp_path):
        s = TimeSeriesStore(tmp_path / "d")
        s.create_datastream(1)
        s.append(1, [1, 2], [1.0, 2.0])
        s.close()
        wal_path = tmp_path / "d" / "ds" / "1" / "wal.log"
        with open(wal_path, "ab") as fh:
            fh.write(b"\x99\x00\x00\x00partial")
        s2 = TimeSeriesStore(tmp_path / "d")
        assert s2.query_range(1, 0, 10).values.tolist() == [1.0, 2.0]
        s2.close()
        report = verify_store(tmp_path / "d")
        assert report.clean

    def test_flag_column_replayed_from_wal(self, tmp_path):
        s = TimeSeriesStore(tmp_path / "d")
        s.create_datastream(1)
        s.append(1, [1], [1.0])
        s.write_flag_column(1, {"f": "x"}, [1], [255.0])
        ffc = tmp_path / "d" / "ds" / "1" / "flags" / "1.ffc"
        original = ffc.read_bytes()
        ffc.unlink()  # simulate crash between WAL append and .ffc write
        s2 = TimeSeriesStore(tmp_path / "d")
        assert ffc.read_bytes() == original
        assert s2.current_flag(1, 1) == 255.0
        s2.close()
        s.close()


class TestVerify:
    def test_pristine_store_clean(self, tmp_path):
        s = TimeSeriesStore(tmp_path / "d")
        s.create_datastream(1)
        s.append(1, [1, 2], [1.0, 2.0])
        s.compact(1)
        s.write_flag_column(1, {}, [1], [0.0])
        s.close()
        report = verify_store(tmp_path / "d")
        assert report.clean
        assert report.segments_checked == 1
        assert report.flag_columns_checked == 1

    def test_flipped_byte_names_the_file(self, tmp_path):
        s = TimeSeriesStore(tmp_path / "d")
        s.create_datastream(1)
        s.append(1, [1, 2], [1.0, 2.0])
        s.compact(1)
        s.close()
        seg = next((tmp_path / "d" / "ds" / "1" / "seg").glob("*.fsg"))
        data = bytearray(seg.read_bytes())
        data[-1] ^= 0x01
        seg.write_bytes(bytes(data))
        report = verify_store(tmp_path / "d")
        assert not report.clean
        assert any(seg.name in err for err in report.errors)

    def test_truncated_segment_is_error(self, tmp_path):
        s = TimeSeriesStore(tmp_path / "d")
        s.create_datastream(1)
        s.append(1, [1, 2], [1.0, 2.0])
        s.compact(1)
        s.close()
        seg = next((tmp_path / "d" / "ds" / "1" / "seg").glob("*.fsg"))
        seg.write_bytes(seg.read_bytes()[:-9])
        report = verify_store(tmp_path / "d")
        assert not report.clean


def test_compaction_produces_single_segment(store):
    store.create_datastream(1)
    for base in range(0, 50_000, 5_000):
        store.append(1, np.arange(base, base + 5_000, dtype=np.int64),
                     np.zeros(5_000))
    segs = list((store.ds_root / "1" / "seg").glob("*.fsg"))
    assert len(segs) == 1
    assert store.count(1) == 50_000
