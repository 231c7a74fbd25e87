"""QC function catalog.

Six functions cover the behavioral families: point-wise (flagRange),
windowed (flagSpikeMAD, flagConstants), cross-variable (flagGeneric) and
processing (procResample, procInterpolate).  Every function is pure:
series in, assignments (or a derived series) out.  All accept a dfilter
kwarg handled by the pipeline (points whose current flag >= dfilter are
masked away before the function sees the series).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..timeutil import parse_duration_ns
from . import flags as F
from . import generic, kernels
from .errors import BadArgument

DFILTER_DEFAULT = F.BAD


@dataclass
class FlagAssignment:
    """Sparse flag writes produced by one function invocation."""
    timestamps: np.ndarray
    flags: np.ndarray

    @classmethod
    def empty(cls):
        return cls(np.empty(0, np.int64), np.empty(0, np.float32))


@dataclass
class Series:
    timestamps: np.ndarray  # int64 ns, sorted ascending
    values: np.ndarray      # float64

    def __len__(self):
        return len(self.timestamps)


@dataclass
class DerivedSeries:
    series: Series
    provenance: dict


def flag_range(series: Series, min: float, max: float) -> FlagAssignment:
    """BAD outside [min, max]; inclusive bounds pass."""
    if min > max:
        raise BadArgument("flagRange", "min", f"min ({min}) > max ({max})")
    hit = (series.values < min) | (series.values > max)
    return _bad_at(series, hit)


def flag_spike_mad(series: Series, window: int, z: float = 3.5) -> FlagAssignment:
    """Hampel-style spike test over a centered count window.

    BAD where |x - median(W)| > z * 1.4826 * MAD(W); a zero MAD degrades
    to x != median.  Points without a full window stay untouched.
    """
    window = _check_window(window, "flagSpikeMAD", odd=True, minimum=3)
    if not z > 0:
        raise BadArgument("flagSpikeMAD", "z", f"z must be > 0, got {z}")
    hit = kernels.spike_mad_mask(series.values, window, float(z))
    return _bad_at(series, hit)


def flag_constants(series: Series, window: int, tolerance: float) -> FlagAssignment:
    """Stuck-sensor test: BAD for whole runs of >= window points whose
    max-min stays within tolerance."""
    window = _check_window(window, "flagConstants", odd=False, minimum=2)
    if tolerance < 0:
        raise BadArgument("flagConstants", "tolerance", "must be >= 0")
    hit = kernels.constant_runs_mask(series.values, window, float(tolerance))
    return _bad_at(series, hit)


def flag_generic(series: Series, expr: str, companions: dict | None = None) -> FlagAssignment:
    """BAD where the expression holds; `x` is this series, other names
    resolve point-wise against companion series by exact timestamp."""
    tree = generic.parse_expr(expr)
    hit = generic.evaluate(tree, series.timestamps, series.values, companions or {})
    return _bad_at(series, hit)


def proc_resample(series: Series, freq, aggregation: str = "mean") -> DerivedSeries:
    """Aggregate onto the regular grid anchored at the first timestamp
    floored to freq; empty bins yield no point."""
    freq_ns = _duration_arg("procResample", "freq", freq)
    if aggregation not in kernels.AGG_CODES:
        raise BadArgument("procResample", "aggregation",
                          f"one of mean/min/max/count, got {aggregation!r}")
    keep = ~np.isnan(series.values)
    ts, vs = series.timestamps[keep], series.values[keep]
    if len(ts) == 0:
        out = Series(np.empty(0, np.int64), np.empty(0, np.float64))
    else:
        t0 = (int(ts[0]) // freq_ns) * freq_ns
        bin_ts, bin_vs = kernels.resample_bins(ts, vs, t0, freq_ns,
                                               kernels.AGG_CODES[aggregation])
        out = Series(bin_ts, bin_vs)
    return DerivedSeries(out, {"function": "procResample",
                               "freq": str(freq), "aggregation": aggregation})


def proc_interpolate(series: Series, maxgap) -> tuple[Series, FlagAssignment]:
    """Linear fill of NaN values whose bracketing gap is <= maxgap;
    filled points are flagged DOUBTFUL so they stay distinguishable."""
    maxgap_ns = _duration_arg("procInterpolate", "maxgap", maxgap)
    idx, filled = kernels.interpolate_gaps(series.timestamps, series.values, maxgap_ns)
    values = series.values.copy()
    values[idx] = filled
    assignment = FlagAssignment(series.timestamps[idx].copy(),
                                np.full(len(idx), F.DOUBTFUL, np.float32))
    return Series(series.timestamps, values), assignment


def _bad_at(series: Series, hit: np.ndarray) -> FlagAssignment:
    return FlagAssignment(series.timestamps[hit].copy(),
                          np.full(int(hit.sum()), F.BAD, np.float32))


def _check_window(window, function, odd, minimum) -> int:
    if not isinstance(window, int) or isinstance(window, bool):
        raise BadArgument(function, "window", f"must be an integer, got {window!r}")
    if window < minimum:
        raise BadArgument(function, "window", f"must be >= {minimum}, got {window}")
    if odd and window % 2 == 0:
        raise BadArgument(function, "window", f"must be odd, got {window}")
    return window


def _duration_arg(function, name, value) -> int:
    try:
        return parse_duration_ns(value)
    except ValueError as exc:
        raise BadArgument(function, name, str(exc)) from None


# -- catalog -----------------------------------------------------------------

@dataclass
class Param:
    name: str
    kind: str                 # number | int | duration | string | bool | flag
    required: bool = True
    default: object = None


@dataclass
class CatalogEntry:
    name: str
    kind: str                 # "flag" | "proc"
    func: object
    params: list = field(default_factory=list)
    cross_variable: bool = False

    def param(self, name):
        for p in self.params:
            if p.name == name:
                return p
        return None


CATALOG = {
    e.name: e for e in [
        CatalogEntry("flagRange", "flag", flag_range, [
            Param("min", "number"), Param("max", "number")]),
        CatalogEntry("flagSpikeMAD", "flag", flag_spike_mad, [
            Param("window", "int"), Param("z", "number", required=False, default=3.5)]),
        CatalogEntry("flagConstants", "flag", flag_constants, [
            Param("window", "int"), Param("tolerance", "number")]),
        CatalogEntry("flagGeneric", "flag", flag_generic, [
            Param("expr", "string")], cross_variable=True),
        CatalogEntry("procResample", "proc", proc_resample, [
            Param("freq", "duration"),
            Param("aggregation", "string", required=False, default="mean")]),
        CatalogEntry("procInterpolate", "proc", proc_interpolate, [
            Param("maxgap", "duration")]),
    ]
}


def validate_kwargs(entry: CatalogEntry, kwargs: dict, line=None):
    """Static validation of literal kwargs against the declared signature."""
    for key, value in kwargs.items():
        param = entry.param(key)
        if param is None:
            raise BadArgument(entry.name, key, "unknown parameter", line=line)
        _check_type(entry.name, param, value, line)
    for param in entry.params:
        if param.required and param.name not in kwargs:
            raise BadArgument(entry.name, param.name, "required parameter missing",
                              line=line)
    # static value checks that need no data
    if entry.name == "flagRange" and "min" in kwargs and "max" in kwargs:
        if kwargs["min"] > kwargs["max"]:
            raise BadArgument(entry.name, "min", "min > max", line=line)
    if entry.name == "flagSpikeMAD":
        _check_window(kwargs["window"], entry.name, odd=True, minimum=3)
        if "z" in kwargs and not kwargs["z"] > 0:
            raise BadArgument(entry.name, "z", "must be > 0", line=line)
    if entry.name == "flagConstants":
        _check_window(kwargs["window"], entry.name, odd=False, minimum=2)
        if kwargs["tolerance"] < 0:
            raise BadArgument(entry.name, "tolerance", "must be >= 0", line=line)
    if entry.name == "flagGeneric":
        generic.parse_expr(kwargs["expr"])
    for key in ("freq", "maxgap"):
        if key in kwargs:
            _duration_arg(entry.name, key, kwargs[key])
    if entry.name == "procResample" and "aggregation" in kwargs:
        if kwargs["aggregation"] not in kernels.AGG_CODES:
            raise BadArgument(entry.name, "aggregation",
                              f"one of mean/min/max/count, got {kwargs['aggregation']!r}",
                              line=line)


def _check_type(function, param, value, line):
    kind = param.kind
    ok = True
    if isinstance(value, bool):
        ok = kind == "bool"
    elif kind == "number":
        ok = isinstance(value, (int, float))
    elif kind == "int":
        ok = isinstance(value, int)
    elif kind in ("string", "duration"):
        ok = isinstance(value, str)
    elif kind == "flag":
        ok = isinstance(value, (int, float))
    elif kind == "bool":
        ok = False
    if not ok:
        raise BadArgument(function, param.name,
                          f"expected {kind}, got {type(value).__name__}", line=line)
