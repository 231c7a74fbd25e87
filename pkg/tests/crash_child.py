"""Child process for the crash-injection harness.

Appends batches forever, printing "ACK <total>" after every append
returns (the durability promise point), until the parent SIGKILLs it.
Values are a pure function of the timestamp so the parent can verify
recovered data without any side channel.  Every few batches a flag
column is written and acknowledged as "FACK <column_id> <t0> <t1>".
"""

import sys

import numpy as np

from fairstream.store import TimeSeriesStore


def value_for(ts):
    return np.sin(np.asarray(ts, dtype=np.float64) * 1e-3) * 100.0


def main():
    data_dir = sys.argv[1]
    seed = int(sys.argv[2])
    rng = np.random.default_rng(seed)
    # tiny compaction threshold so kills land in every phase of the lifecycle
    store = TimeSeriesStore(data_dir, compaction_max_points=64)
    store.create_datastream(1)
    t = 0
    batch = 0
    while True:
        n = int(rng.integers(1, 40))
        ts = np.arange(t, t + n, dtype=np.int64)
        store.append(1, ts, value_for(ts))
        t += n
        batch += 1
        print(f"ACK {t}", flush=True)
        if batch % 5 == 0:
            col_ts = np.array([t - n, t - 1], dtype=np.int64)
            col = store.write_flag_column(
                1, {"trial": "crash"}, col_ts, np.array([255.0, 0.0], np.float32))
            print(f"FACK {col} {t - n} {t - 1}", flush=True)


if __name__ == "__main__":
    main()
