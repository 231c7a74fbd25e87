"""Independent brute-force oracles for the QC functions.

Pure-Python loops over floats, statistics.median instead of numpy --
deliberately a different code path from the kernels they check.
"""

import math
from statistics import median

MAD_SCALE = 1.4826


def range_oracle(values, lo, hi):
    return [not math.isnan(v) and (v < lo or v > hi) for v in values]


def spike_mad_oracle(values, window, z):
    n = len(values)
    out = [False] * n
    half = window // 2
    for i in range(half, n - half):
        w = [values[j] for j in range(i - half, i + half + 1)]
        med = median(w)
        mad = median(abs(v - med) for v in w)
        if mad > 0.0:
            out[i] = abs(values[i] - med) > z * MAD_SCALE * mad
        else:
            out[i] = values[i] != med
    return out


def constants_oracle(values, window, tolerance):
    n = len(values)
    out = [False] * n
    for start in range(0, n - window + 1):
        w = values[start:start + window]
        if max(w) - min(w) <= tolerance:
            for j in range(start, start + window):
                out[j] = True
    return out


def generic_oracle(expr, target_ts, target_vs, companions):
    """Per-point eval() of the expression with plain floats.

    A referenced companion that is absent (or NaN) at the point, or a
    division by zero, makes the point False.
    """
    import re
    comp_maps = {name: dict(zip(ts, vs)) for name, (ts, vs) in companions.items()}
    referenced = [n for n in comp_maps
                  if re.search(rf"\b{re.escape(n)}\b", expr)]
    hits = []
    for t, x in zip(target_ts, target_vs):
        env = {"x": float(x)}
        missing = False
        for name in referenced:
            v = comp_maps[name].get(t)
            if v is None or math.isnan(v):
                missing = True
                break
            env[name] = float(v)
        if missing:
            hits.append(False)
            continue
        try:
            hits.append(bool(eval(expr, {"__builtins__": {}}, env)))
        except ZeroDivisionError:
            hits.append(False)
    return hits


def resample_oracle(timestamps, values, freq, aggregation):
    """Hand-binned aggregation; returns (bin_ts list, values list)."""
    pts = [(t, v) for t, v in zip(timestamps, values) if not math.isnan(v)]
    if not pts:
        return [], []
    t0 = (pts[0][0] // freq) * freq
    bins = {}
    for t, v in pts:
        k = (t - t0) // freq
        bins.setdefault(k, []).append(v)
    out_ts, out_vs = [], []
    for k in sorted(bins):
        vs = bins[k]
        if aggregation == "mean":
            agg = sum(vs) / len(vs)
        elif aggregation == "min":
            agg = min(vs)
        elif aggregation == "max":
            agg = max(vs)
        else:
            agg = float(len(vs))
        out_ts.append(t0 + k * freq)
        out_vs.append(agg)
    return out_ts, out_vs


def interpolate_oracle(timestamps, values, maxgap):
    """Returns {timestamp: filled value} for NaNs with brackets within maxgap."""
    n = len(values)
    fills = {}
    for i in range(n):
        if not math.isnan(values[i]):
            continue
        p = i - 1
        while p >= 0 and math.isnan(values[p]):
            p -= 1
        q = i + 1
        while q < n and math.isnan(values[q]):
            q += 1
        if p < 0 or q >= n:
            continue
        if timestamps[q] - timestamps[p] > maxgap:
            continue
        frac = (timestamps[i] - timestamps[p]) / (timestamps[q] - timestamps[p])
        fills[timestamps[i]] = values[p] + (values[q] - values[p]) * frac
    return fills
