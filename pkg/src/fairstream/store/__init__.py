from .engine import TimeSeriesStore, Observation, FlagColumn, UNFLAGGED
from .errors import (
    StoreError,
    UnknownDatastream,
    UnknownTimestamp,
    CorruptSegment,
    CorruptFlagColumn,
)

__all__ = [
    "TimeSeriesStore",
    "Observation",
    "FlagColumn",
    "UNFLAGGED",
    "StoreError",
    "UnknownDatastream",
    "UnknownTimestamp",
    "CorruptSegment",
    "CorruptFlagColumn",
]
