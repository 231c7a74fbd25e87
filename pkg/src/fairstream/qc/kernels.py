"""Hot numeric kernels for the QC functions.

Every kernel has two implementations: a numba @njit loop (default) and a
vectorized pure-numpy fallback.  FAIRSTREAM_PURE_NUMPY=1 forces the
fallback; it is also what you get when numba is not importable.  Both
paths are exercised by the test suite and compared by
benchmarks/bench_qc_kernels.py.

Kernels assume pre-cleaned input: finite float64 values (masked and NaN
points are removed by the caller before windowed logic runs), int64
sorted timestamps.
"""

from __future__ import annotations

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

PURE_NUMPY = os.environ.get("FAIRSTREAM_PURE_NUMPY", "") == "1"

try:
    if PURE_NUMPY:
        raise ImportError("pure numpy forced by FAIRSTREAM_PURE_NUMPY")
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

MAD_SCALE = 1.4826  # consistent-estimator scale for Gaussian data

AGG_MEAN, AGG_MIN, AGG_MAX, AGG_COUNT = 0, 1, 2, 3
AGG_CODES = {"mean": AGG_MEAN, "min": AGG_MIN, "max": AGG_MAX, "count": AGG_COUNT}

_CHUNK = 1 << 16  # fallback sliding-window block size, bounds memory


# -- pure numpy fallbacks ---------------------------------------------------

def _spike_mad_numpy(values, window, z):
    n = len(values)
    out = np.zeros(n, dtype=np.bool_)
    if n < window:
        return out
    half = window // 2
    for start in range(0, n - window + 1, _CHUNK):
        stop = min(start + _CHUNK, n - window + 1)
        sw = sliding_window_view(values[start:stop + window - 1], window)
        med = np.median(sw, axis=1)
        mad = np.median(np.abs(sw - med[:, None]), axis=1)
        center = values[start + half:stop + half]
        dev = np.abs(center - med)
        hit = np.where(mad > 0.0, dev > z * MAD_SCALE * mad, center != med)
        out[start + half:stop + half] = hit
    return out


def _constant_runs_numpy(values, window, tolerance):
    n = len(values)
    out = np.zeros(n, dtype=np.bool_)
    if n < window:
        return out
    ok = np.zeros(n - window + 1, dtype=np.bool_)
    for start in range(0, n - window + 1, _CHUNK):
        stop = min(start + _CHUNK, n - window + 1)
        sw = sliding_window_view(values[start:stop + window - 1], window)
        ok[start:stop] = (sw.max(axis=1) - sw.min(axis=1)) <= tolerance
    # a point is flagged iff some qualifying window covers it
    cum = np.concatenate(([0], np.cumsum(ok)))
    idx = np.arange(n)
    lo = np.maximum(idx - window + 1, 0)
    hi = np.minimum(idx, n - window) + 1
    covered = hi > lo
    out[covered] = (cum[hi[covered]] - cum[lo[covered]]) > 0
    return out


def _resample_numpy(timestamps, values, t0, freq, agg):
    bins = (timestamps - t0) // freq
    starts = np.concatenate(([0], np.flatnonzero(np.diff(bins)) + 1))
    counts = np.diff(np.concatenate((starts, [len(bins)])))
    bin_ts = t0 + bins[starts] * freq
    if agg == AGG_MEAN:
        agg_vs = np.add.reduceat(values, starts) / counts
    elif agg == AGG_MIN:
        agg_vs = np.minimum.reduceat(values, starts)
    elif agg == AGG_MAX:
        agg_vs = np.maximum.reduceat(values, starts)
    else:
        agg_vs = counts.astype(np.float64)
    return bin_ts, agg_vs


def _interpolate_numpy(timestamps, values, maxgap):
    n = len(values)
    isnan = np.isnan(values)
    targets = np.flatnonzero(isnan)
    if len(targets) == 0 or n < 2:
        return np.empty(0, np.int64), np.empty(0, np.float64)
    idx = np.arange(n)
    prev = np.maximum.accumulate(np.where(~isnan, idx, -1))
    nxt = np.minimum.accumulate(np.where(~isnan, idx, n)[::-1])[::-1]
    p, q = prev[targets], nxt[targets]
    valid = (p >= 0) & (q < n)
    p, q, targets = p[valid], q[valid], targets[valid]
    gap_ok = (timestamps[q] - timestamps[p]) <= maxgap
    p, q, targets = p[gap_ok], q[gap_ok], targets[gap_ok]
    if len(targets) == 0:
        return np.empty(0, np.int64), np.empty(0, np.float64)
    t, tp, tq = timestamps[targets], timestamps[p], timestamps[q]
    vp, vq = values[p], values[q]
    filled = vp + (vq - vp) * ((t - tp).astype(np.float64) / (tq - tp).astype(np.float64))
    return targets.astype(np.int64), filled


# -- numba kernels -----------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _sorted_median(buf, count):
        # insertion sort in place; windows are small so O(w^2) beats the
        # allocation np.median would do per window
        for i in range(1, count):
            key = buf[i]
            j = i - 1
            while j >= 0 and buf[j] > key:
                buf[j + 1] = buf[j]
                j -= 1
            buf[j + 1] = key
        if count % 2 == 1:
            return buf[count // 2]
        return 0.5 * (buf[count // 2 - 1] + buf[count // 2])

    @njit(cache=True)
    def _spike_mad_jit(values, window, z):
        n = values.shape[0]
        out = np.zeros(n, dtype=np.bool_)
        if n < window:
            return out
        half = window // 2
        buf = np.empty(window, np.float64)
        dev = np.empty(window, np.float64)
        for i in range(half, n - half):
            for k in range(window):
                buf[k] = values[i - half + k]
            med = _sorted_median(buf, window)
            for k in range(window):
                dev[k] = abs(buf[k] - med)
            mad = _sorted_median(dev, window)
            if mad > 0.0:
                if abs(values[i] - med) > z * MAD_SCALE * mad:
                    out[i] = True
            elif values[i] != med:
                out[i] = True
        return out

    @njit(cache=True)
    def _constant_runs_jit(values, window, tolerance):
        n = values.shape[0]
        out = np.zeros(n, dtype=np.bool_)
        if n < window:
            return out
        for i in range(n - window + 1):
            lo = values[i]
            hi = values[i]
            for j in range(i + 1, i + window):
                v = values[j]
                if v < lo:
                    lo = v
                elif v > hi:
                    hi = v
            if hi - lo <= tolerance:
                for j in range(i, i + window):
                    out[j] = True
        return out

    @njit(cache=True)
    def _resample_jit(timestamps, values, t0, freq, agg):
        n = timestamps.shape[0]
        nbins = 0
        last = np.int64(-(1 << 62))
        for i in range(n):
            b = (timestamps[i] - t0) // freq
            if b != last:
                nbins += 1
                last = b
        bin_ts = np.empty(nbins, np.int64)
        agg_vs = np.empty(nbins, np.float64)
        k = -1
        last = np.int64(-(1 << 62))
        count = 0
        acc = 0.0
        for i in range(n):
            b = (timestamps[i] - t0) // freq
            v = values[i]
            if b != last:
                if k >= 0:
                    if agg == 0:
                        agg_vs[k] = acc / count
                    elif agg == 3:
                        agg_vs[k] = count
                k += 1
                bin_ts[k] = t0 + b * freq
                last = b
                count = 0
                if agg == 0 or agg == 3:
                    acc = 0.0
                else:
                    agg_vs[k] = v
            if agg == 0:
                acc += v
            elif agg == 1:
                if v < agg_vs[k]:
                    agg_vs[k] = v
            elif agg == 2:
                if v > agg_vs[k]:
                    agg_vs[k] = v
            count += 1
        if k >= 0:
            if agg == 0:
                agg_vs[k] = acc / count
            elif agg == 3:
                agg_vs[k] = count
        return bin_ts, agg_vs

    @njit(cache=True)
    def _interpolate_jit(timestamps, values, maxgap):
        n = values.shape[0]
        idx_out = np.empty(n, np.int64)
        val_out = np.empty(n, np.float64)
        k = 0
        prev = -1
        i = 0
        while i < n:
            if not np.isnan(values[i]):
                prev = i
                i += 1
                continue
            j = i
            while j < n and np.isnan(values[j]):
                j += 1
            if prev >= 0 and j < n and timestamps[j] - timestamps[prev] <= maxgap:
                tp = timestamps[prev]
                tq = timestamps[j]
                vp = values[prev]
                vq = values[j]
                for m in range(i, j):
                    frac = (timestamps[m] - tp) / (tq - tp)
                    idx_out[k] = m
                    val_out[k] = vp + (vq - vp) * frac
                    k += 1
            i = j
        return idx_out[:k], val_out[:k]


# -- dispatch ----------------------------------------------------------------

def spike_mad_mask(values: np.ndarray, window: int, z: float) -> np.ndarray:
    """Centered-window Hampel test: True where the point is a spike."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    if HAVE_NUMBA:
        return _spike_mad_jit(values, window, float(z))
    return _spike_mad_numpy(values, window, float(z))


def constant_runs_mask(values: np.ndarray, window: int, tolerance: float) -> np.ndarray:
    """True for every point covered by a length>=window run with range<=tolerance."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    if HAVE_NUMBA:
        return _constant_runs_jit(values, window, float(tolerance))
    return _constant_runs_numpy(values, window, float(tolerance))


def resample_bins(timestamps: np.ndarray, values: np.ndarray, t0: int,
                  freq: int, agg: int):
    """Aggregate sorted points onto the grid t0 + k*freq; empty bins are absent."""
    timestamps = np.ascontiguousarray(timestamps, dtype=np.int64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    if len(timestamps) == 0:
        return np.empty(0, np.int64), np.empty(0, np.float64)
    if HAVE_NUMBA:
        return _resample_jit(timestamps, values, np.int64(t0), np.int64(freq), agg)
    return _resample_numpy(timestamps, values, np.int64(t0), np.int64(freq), agg)


def interpolate_gaps(timestamps: np.ndarray, values: np.ndarray, maxgap: int):
    """Linear fill for NaN runs whose surrounding gap is <= maxgap.

    Returns (indices, filled values); endpoints without both brackets
    stay untouched.
    """
    timestamps = np.ascontiguousarray(timestamps, dtype=np.int64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    if HAVE_NUMBA:
        return _interpolate_jit(timestamps, values, np.int64(maxgap))
    return _interpolate_numpy(timestamps, values, np.int64(maxgap))


def implementations():
    """Both paths of each kernel, for the comparison benchmark."""
    impls = {
        "numpy": {
            "spike_mad": _spike_mad_numpy,
            "constant_runs": _constant_runs_numpy,
            "resample": _resample_numpy,
            "interpolate": _interpolate_numpy,
        }
    }
    if HAVE_NUMBA:
        impls["numba"] = {
            "spike_mad": _spike_mad_jit,
            "constant_runs": _constant_runs_jit,
            "resample": _resample_jit,
            "interpolate": _interpolate_jit,
        }
    return impls
