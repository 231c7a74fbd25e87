"""Spawn-and-kill harness shared by the crash tests and the acceptance suite."""

import os
import signal
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

CHILD = Path(__file__).parent / "crash_child.py"


def run_crash_trial(data_dir, seed, min_acks=2, kill_after_extra=None):
    """Run one kill-and-recover trial; returns (acked_points, acked_columns).

    The child is SIGKILLed at a random instant after `min_acks`
    acknowledgements; the caller then reopens the store and verifies.
    """
    rng = np.random.default_rng(seed)
    if kill_after_extra is None:
        kill_after_extra = float(rng.uniform(0, 0.05))
    proc = subprocess.Popen(
        [sys.executable, str(CHILD), str(data_dir), str(seed)],
        stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True)
    acked = 0
    fcols = []
    try:
        want = min_acks + int(rng.integers(0, 20))
        seen = 0
        for line in proc.stdout:
            parts = line.split()
            if parts[0] == "ACK":
                acked = int(parts[1])
                seen += 1
            elif parts[0] == "FACK":
                fcols.append((int(parts[1]), int(parts[2]), int(parts[3])))
            if seen >= want:
                break
        time.sleep(kill_after_extra)
    finally:
        os.kill(proc.pid, signal.SIGKILL)
        proc.wait()
        proc.stdout.close()
    return acked, fcols


def verify_recovery(data_dir, acked, fcols):
    """Open the killed store and check nothing acknowledged was lost."""
    from fairstream.store import TimeSeriesStore
    from fairstream.store.verify import verify_store
    from crash_child import value_for

    store = TimeSeriesStore(data_dir)
    try:
        res = store.query_range(1, 0, 1 << 62)
        assert len(res) >= acked, f"lost points: {len(res)} < {acked} acked"
        np.testing.assert_array_equal(res.timestamps[:acked],
                                      np.arange(acked, dtype=np.int64))
        np.testing.assert_allclose(res.values[:acked],
                                   value_for(np.arange(acked)), rtol=0, atol=0)
        got_cols = {c.column_id for c in store.flag_columns(1)}
        for column_id, t0, t1 in fcols:
            assert column_id in got_cols, f"lost flag column {column_id}"
            assert store.current_flag(1, t0) == 255.0
    finally:
        store.close()
    report = verify_store(data_dir)
    assert report.clean, f"store not clean after recovery: {report.errors}"
