"""Internal flag vocabulary and translation to external schemes.

Flags are floats: UNFLAGGED (-inf) < GOOD (0) < DOUBTFUL (25) < BAD (255).
Custom float flags inside [0, 255] are legal; the simple scheme rounds
them up to the next named level.  UNTOUCHED (NaN) marks absence inside a
single run and is never persisted.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import UndecodableLabel, UnknownScheme

UNTOUCHED = float("nan")
UNFLAGGED = float("-inf")
GOOD = 0.0
DOUBTFUL = 25.0
BAD = 255.0

FLAG_NAMES = {
    "UNFLAGGED": UNFLAGGED,
    "GOOD": GOOD,
    "DOUBTFUL": DOUBTFUL,
    "BAD": BAD,
}

_SIMPLE_LABELS = {UNFLAGGED: "", GOOD: "OK", DOUBTFUL: "DOUBTFUL", BAD: "BAD"}
_SIMPLE_DECODE = {"": UNFLAGGED, "OK": GOOD, "DOUBTFUL": DOUBTFUL, "BAD": BAD}

SCHEMES = ("float", "simple")


def flag_level(flag: float) -> float:
    """Round a persisted flag up to the next named level."""
    flag = float(flag)
    if flag == UNFLAGGED:
        return UNFLAGGED
    if flag <= GOOD:
        return GOOD
    if flag <= DOUBTFUL:
        return DOUBTFUL
    return BAD


def is_valid_persisted(flag: float) -> bool:
    flag = float(flag)
    if math.isnan(flag):
        return False
    return flag == UNFLAGGED or 0.0 <= flag <= BAD


def encode(flag: float, scheme: str):
    """Translate one internal flag into the scheme's representation."""
    if scheme == "float":
        return float(flag)
    if scheme == "simple":
        return _SIMPLE_LABELS[flag_level(flag)]
    raise UnknownScheme(scheme)


def decode(value, scheme: str) -> float:
    """Inverse of encode; decode(encode(f)) equals flag_level(f)."""
    if scheme == "float":
        flag = float(value)
        if not is_valid_persisted(flag):
            raise UndecodableLabel(value)
        return flag
    if scheme == "simple":
        try:
            return _SIMPLE_DECODE[value]
        except (KeyError, TypeError):
            raise UndecodableLabel(value) from None
    raise UnknownScheme(scheme)


def encode_array(flags: np.ndarray, scheme: str):
    return [encode(float(f), scheme) for f in flags]
