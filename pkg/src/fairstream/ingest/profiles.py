"""Per-Thing payload parsing.

A ParserProfile describes how a logger's files/messages map onto
datastream positions: csv or json-lines, where the timestamp lives and
in which format, and which columns carry values.  Parsing is total over
row-level corruption: bad rows become RowErrors with their 1-based line
number, good rows flow on, empty value cells are skipped silently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from ..errors import FairstreamError, ValidationError
from ..timeutil import NS_PER_SECOND, now_ns, parse_rfc3339_ns

KINDS = ("csv", "json-lines")
TIMESTAMP_FORMATS = ("rfc3339", "epoch-seconds", "epoch-millis")

CLOCK_SKEW_NS = 24 * 3600 * NS_PER_SECOND  # future tolerance


class PayloadUndecodable(FairstreamError):
    pass


@dataclass
class RowError:
    line: int
    reason: str

    def to_dict(self):
        return {"line": self.line, "reason": self.reason}


@dataclass
class ParsedRow:
    line: int
    position: str
    timestamp: int
    value: float


@dataclass
class ParserProfile:
    kind: str
    timestamp_column: object            # header name or 0-based index
    timestamp_format: str
    value_columns: dict = field(default_factory=dict)  # column -> position name
    delimiter: str = ","
    skip_header_lines: int = 0
    decimal_separator: str = "."

    def validate(self):
        if self.kind not in KINDS:
            raise ValidationError("kind", f"must be one of {KINDS}")
        if self.timestamp_format not in TIMESTAMP_FORMATS:
            raise ValidationError("timestamp_format",
                                  f"must be one of {TIMESTAMP_FORMATS}")
        if not self.value_columns:
            raise ValidationError("value_columns", "must not be empty")
        if self.timestamp_column in self.value_columns:
            raise ValidationError("timestamp_column",
                                  "timestamp column cannot also be a value column")
        if len(self.delimiter) != 1:
            raise ValidationError("delimiter", "must be a single character")
        if self.decimal_separator != ".":
            raise ValidationError("decimal_separator", "only '.' is supported")
        if self.kind == "csv":
            named = [c for c in list(self.value_columns) + [self.timestamp_column]
                     if isinstance(c, str)]
            if named and self.skip_header_lines < 1:
                raise ValidationError(
                    "skip_header_lines",
                    "named columns need at least one header line to resolve against")
        return self

    def to_dict(self):
        return {
            "kind": self.kind,
            "timestamp_column": self.timestamp_column,
            "timestamp_format": self.timestamp_format,
            "value_columns": dict(self.value_columns),
            "delimiter": self.delimiter,
            "skip_header_lines": self.skip_header_lines,
            "decimal_separator": self.decimal_separator,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ParserProfile":
        """Build from a JSON-shaped dict.

        JSON object keys are always strings, so all-digit column keys
        (and an all-digit timestamp_column) are read as integer indexes.
        """
        allowed = {"kind", "timestamp_column", "timestamp_format", "value_columns",
                   "delimiter", "skip_header_lines", "decimal_separator"}
        unknown = set(raw) - allowed
        if unknown:
            raise ValidationError("parser_profile", f"unknown keys {sorted(unknown)}")
        missing = {"kind", "timestamp_column", "timestamp_format",
                   "value_columns"} - set(raw)
        if missing:
            raise ValidationError("parser_profile", f"missing keys {sorted(missing)}")
        raw = dict(raw)
        if raw["kind"] == "csv":
            raw["timestamp_column"] = _int_key(raw["timestamp_column"])
            raw["value_columns"] = {_int_key(k): v
                                    for k, v in dict(raw["value_columns"]).items()}
        return cls(**raw).validate()


def _int_key(column):
    if isinstance(column, str) and column.isdigit():
        return int(column)
    return column


def parse_payload(profile: ParserProfile, data: bytes, now=None):
    """Parse raw payload bytes into rows + row errors.

    Returns (rows, errors) where rows are ParsedRow and errors RowError.
    Raises PayloadUndecodable when the payload cannot match the profile
    at all (bad encoding, unresolvable csv header).
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise PayloadUndecodable(f"payload is not valid UTF-8: {exc}") from None
    if "\x00" in text:
        raise PayloadUndecodable("payload contains NUL bytes")
    now = now_ns() if now is None else now
    deadline = now + CLOCK_SKEW_NS
    if profile.kind == "csv":
        return _parse_csv(profile, text, deadline)
    return _parse_json_lines(profile, text, deadline)


def _parse_timestamp(cell: str, fmt: str, date_cache: dict) -> int:
    if fmt == "rfc3339":
        return _parse_rfc3339_cached(cell, date_cache)
    value = float(cell)
    if fmt == "epoch-seconds":
        return round(value * NS_PER_SECOND)
    return round(value * 1_000_000)  # epoch-millis


def _parse_rfc3339_cached(cell: str, date_cache: dict) -> int:
    # fast path for the fixed 'YYYY-MM-DDTHH:MM:SS[.frac]Z' layout loggers emit
    if len(cell) >= 20 and cell[10] == "T" and cell[-1] == "Z":
        day_ns = date_cache.get(cell[:10])
        if day_ns is None:
            day_ns = parse_rfc3339_ns(cell[:10] + "T00:00:00Z")
            date_cache[cell[:10]] = day_ns
        try:
            ns = day_ns + (int(cell[11:13]) * 3600 + int(cell[14:16]) * 60
                           + int(cell[17:19])) * NS_PER_SECOND
            if cell[13] != ":" or cell[16] != ":":
                raise ValueError(cell)
            if len(cell) == 20:
                return ns
            if cell[19] == ".":
                frac = cell[20:-1]
                if frac.isdigit() and len(frac) <= 9:
                    return ns + int(frac.ljust(9, "0"))
            raise ValueError(cell)
        except ValueError:
            pass
    return parse_rfc3339_ns(cell)


def _parse_value(cell: str) -> float:
    value = float(cell)
    if not math.isfinite(value):
        raise ValueError(f"not finite: {cell}")
    return value


def _parse_csv(profile: ParserProfile, text: str, deadline: int):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    header_cells = None
    if profile.skip_header_lines >= 1 and lines:
        header_cells = [c.strip() for c in lines[0].split(profile.delimiter)]

    def resolve(column):
        if isinstance(column, int):
            return column
        if header_cells is None or column not in header_cells:
            raise PayloadUndecodable(
                f"column {column!r} not found in header line")
        return header_cells.index(column)

    ts_index = resolve(profile.timestamp_column)
    value_indexes = [(resolve(col), position)
                     for col, position in profile.value_columns.items()]

    rows, errors = [], []
    delimiter = profile.delimiter
    fmt = profile.timestamp_format
    date_cache = {}
    for i in range(profile.skip_header_lines, len(lines)):
        line = lines[i]
        lineno = i + 1
        if not line.strip():
            continue
        cells = line.split(delimiter)
        try:
            t = _parse_timestamp(cells[ts_index].strip(), fmt, date_cache)
        except (ValueError, IndexError):
            errors.append(RowError(lineno, "timestamp"))
            continue
        if t < 0 or t > deadline:
            errors.append(RowError(lineno, "timestamp out of range"))
            continue
        for idx, position in value_indexes:
            cell = cells[idx].strip() if idx < len(cells) else ""
            if not cell:
                continue  # empty cells are skipped silently
            try:
                rows.append(ParsedRow(lineno, position, t, _parse_value(cell)))
            except ValueError:
                errors.append(RowError(lineno, f"value:{position}"))
    return rows, errors


def _parse_json_lines(profile: ParserProfile, text: str, deadline: int):
    rows, errors = [], []
    fmt = profile.timestamp_format
    date_cache = {}
    lineno = 0
    decoded_any = False
    for line in text.split("\n"):
        lineno += 1
        if lineno <= profile.skip_header_lines or not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("not an object")
            decoded_any = True
        except ValueError:
            errors.append(RowError(lineno, "json"))
            continue
        raw_ts = obj.get(profile.timestamp_column)
        try:
            if raw_ts is None:
                raise ValueError("missing timestamp")
            t = _parse_timestamp(str(raw_ts), fmt, date_cache)
        except ValueError:
            errors.append(RowError(lineno, "timestamp"))
            continue
        if t < 0 or t > deadline:
            errors.append(RowError(lineno, "timestamp out of range"))
            continue
        for key, position in profile.value_columns.items():
            value = obj.get(key)
            if value is None:
                continue
            try:
                if isinstance(value, bool):
                    raise ValueError("boolean")
                rows.append(ParsedRow(lineno, position, t, _parse_value(str(value))))
            except ValueError:
                errors.append(RowError(lineno, f"value:{position}"))
    if not decoded_any and errors and all(e.reason == "json" for e in errors):
        raise PayloadUndecodable("no line parsed as a JSON object")
    return rows, errors
