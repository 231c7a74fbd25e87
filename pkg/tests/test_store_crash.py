"""Kill -9 the writer process at random instants; nothing acknowledged
may be lost and the store must verify clean after recovery.  The
acceptance suite runs the same harness at 100 trials."""

import pytest

from crash_harness import run_crash_trial, verify_recovery


@pytest.mark.parametrize("seed", range(8))
def test_kill_after_append_loses_nothing(tmp_path, seed):
    data_dir = tmp_path / "d"
    acked, fcols = run_crash_trial(data_dir, seed=seed)
    assert acked > 0
    verify_recovery(data_dir, acked, fcols)
