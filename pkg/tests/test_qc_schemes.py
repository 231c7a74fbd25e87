import numpy as np
import pytest
from hypothesis import given, strategies as st

from fairstream.qc import flags as F
from fairstream.qc.errors import UndecodableLabel, UnknownScheme


def test_named_roundtrip():
    for flag, label in [(F.BAD, "BAD"), (F.DOUBTFUL, "DOUBTFUL"),
                        (F.GOOD, "OK"), (F.UNFLAGGED, "")]:
        assert F.encode(flag, "simple") == label
        assert F.decode(label, "simple") == flag


def test_intermediate_floats_round_up():
    assert F.encode(30.0, "simple") == "BAD"
    assert F.encode(25.0, "simple") == "DOUBTFUL"
    assert F.encode(10.0, "simple") == "DOUBTFUL"
    assert F.encode(0.0, "simple") == "OK"


def test_float_scheme_identity():
    assert F.encode(42.5, "float") == 42.5
    assert F.decode(42.5, "float") == 42.5


def test_unknown_scheme_and_label():
    with pytest.raises(UnknownScheme):
        F.encode(0.0, "colour")
    with pytest.raises(UndecodableLabel):
        F.decode("MAYBE", "simple")
    with pytest.raises(UndecodableLabel):
        F.decode(float("nan"), "float")


@given(st.one_of(
    st.just(F.UNFLAGGED),
    st.floats(min_value=0.0, max_value=255.0, allow_nan=False)))
def test_roundtrip_fixpoint_at_level_granularity(flag):
    for scheme in F.SCHEMES:
        decoded = F.decode(F.encode(flag, scheme), scheme)
        if scheme == "float":
            assert decoded == flag
        else:
            assert decoded == F.flag_level(flag)
            # re-encoding a decoded flag is a fixpoint
            assert F.decode(F.encode(decoded, scheme), scheme) == decoded


def test_encode_array():
    flags = np.array([F.UNFLAGGED, F.GOOD, 26.0], np.float32)
    assert F.encode_array(flags, "simple") == ["", "OK", "BAD"]
