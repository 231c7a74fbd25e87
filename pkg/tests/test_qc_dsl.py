import pytest

from fairstream.qc import flags as F
from fairstream.qc.dsl import canonical_kwargs_string, parse_config
from fairstream.qc.errors import BadArgument, ConfigSyntaxError, UnknownFunction


def test_single_entry():
    cfg = parse_config("temp ; flagRange(min=0, max=45)")
    assert len(cfg.entries) == 1
    e = cfg.entries[0]
    assert e.variable == "temp"
    assert e.call.name == "flagRange"
    assert e.call.kwargs == {"min": 0, "max": 45}
    assert e.call.dfilter == F.BAD


def test_comments_and_blanks():
    cfg = parse_config("# comment\n\n")
    assert cfg.entries == []
    cfg = parse_config("  # indented comment\ntemp ; flagRange(min=0, max=1)\n\n")
    assert len(cfg.entries) == 1
    assert cfg.entries[0].line == 2


def test_unknown_function_names_line():
    with pytest.raises(UnknownFunction) as exc:
        parse_config("temp ; flagRang(min=0)")
    assert exc.value.line == 1
    assert exc.value.name == "flagRang"


def test_syntax_errors_carry_position():
    with pytest.raises(ConfigSyntaxError) as exc:
        parse_config("temp flagRange(min=0)")
    assert exc.value.line == 1
    with pytest.raises(ConfigSyntaxError):
        parse_config("temp ; flagRange(min=0")
    with pytest.raises(ConfigSyntaxError):
        parse_config("temp ; flagRange(min 0)")
    with pytest.raises(ConfigSyntaxError):
        parse_config('temp ; flagGeneric(expr="x > 1) ')
    with pytest.raises(ConfigSyntaxError):
        parse_config("temp ; flagRange(min=0, max=1) trailing")


def test_bad_kwargs():
    with pytest.raises(BadArgument) as exc:
        parse_config("temp ; flagRange(mun=0, max=1)")
    assert exc.value.kwarg == "mun"
    assert exc.value.line == 1
    with pytest.raises(BadArgument):
        parse_config("temp ; flagRange(min=0)")  # max missing
    with pytest.raises(BadArgument):
        parse_config('temp ; flagRange(min="a", max=1)')
    with pytest.raises(BadArgument):
        parse_config("temp ; flagRange(min=5, max=0)")
    with pytest.raises(BadArgument):
        parse_config("temp ; flagSpikeMAD(window=4)")
    with pytest.raises(BadArgument):
        parse_config("temp ; flagSpikeMAD(window=5, z=-1)")
    with pytest.raises(BadArgument):
        parse_config('temp ; procResample(freq="60s", aggregation="median")')
    with pytest.raises(BadArgument):
        parse_config('temp ; procResample(freq="bogus")')


def test_duplicate_variable_lines_keep_order():
    cfg = parse_config(
        "temp ; flagRange(min=0, max=45)\n"
        "pressure ; flagRange(min=800, max=1100)\n"
        "temp ; flagConstants(window=3, tolerance=0)\n")
    assert [(e.variable, e.call.name) for e in cfg.entries] == [
        ("temp", "flagRange"), ("pressure", "flagRange"), ("temp", "flagConstants")]


def test_dfilter_literal_forms():
    cfg = parse_config("temp ; flagRange(min=0, max=1, dfilter=DOUBTFUL)")
    assert cfg.entries[0].call.dfilter == F.DOUBTFUL
    cfg = parse_config("temp ; flagRange(min=0, max=1, dfilter=30.5)")
    assert cfg.entries[0].call.dfilter == 30.5


def test_string_literals_survive_canonicalization():
    cfg = parse_config('temp ; flagGeneric(expr="x > 10  and  x < 99")')
    assert 'x > 10  and  x < 99' in cfg.canonical_text


def test_config_hash_ignores_comments_and_whitespace():
    a = parse_config("temp ; flagRange(min=0, max=45)")
    b = parse_config("# hi\n  temp   ;   flagRange( max=45 ,  min=0 )\n")
    assert a.config_hash == b.config_hash
    c = parse_config("temp ; flagRange(min=0, max=46)")
    assert a.config_hash != c.config_hash


def test_canonical_fixpoint():
    text = "# x\ntemp ; flagSpikeMAD(z=4.0, window=5)\n\ntemp ; flagRange(min=0, max=1)"
    cfg = parse_config(text)
    again = parse_config(cfg.canonical_text)
    assert again.canonical_text == cfg.canonical_text
    assert again.config_hash == cfg.config_hash


def test_canonical_kwargs_string_materializes_defaults():
    cfg = parse_config("temp ; flagSpikeMAD(window=5)")
    s = canonical_kwargs_string(cfg.entries[0].call)
    assert s == "dfilter=BAD, window=5, z=3.5"
