"""OData-subset query option parsing.

Supported options: $top, $skip, $orderby, $select, $expand (one level)
and $filter with the six comparisons (eq ne gt ge lt le) over entity
properties, numeric literals and ISO-8601 time literals, combined with
and/or/not and parentheses.  Precedence: comparisons bind tighter than
'not', then 'and', then 'or'.

The parser is total: any byte string yields either a StaQuery or a
QueryParseError carrying the position inside the offending option (and
UnsupportedOption for declared-but-unimplemented options like $count).
Unknown properties are rejected here, never silently ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from urllib.parse import parse_qsl

import numpy as np

from ..errors import FairstreamError
from ..timeutil import parse_rfc3339_ns

MAX_TOP_DEFAULT = 1000
DEFAULT_TOP = 100

COMPARISONS = ("eq", "ne", "gt", "ge", "lt", "le")

# property universe per entity kind: name -> value class
PROPERTIES = {
    "Thing": {"name": "string", "description": "string"},
    "Datastream": {"name": "string", "unit": "string"},
    "Observation": {"result": "number", "phenomenonTime": "time",
                    "resultTime": "time"},
    "Sensor": {"name": "string"},
    "ObservedProperty": {"name": "string", "definition": "string"},
}

KNOWN_OPTIONS = ("$top", "$skip", "$orderby", "$filter", "$select", "$expand")
UNSUPPORTED_OPTIONS = ("$count", "$format", "$search", "$compute", "$apply",
                       "$levels", "$batch")


class QueryParseError(FairstreamError):
    def __init__(self, position, expected, option="$filter"):
        self.position = position
        self.expected = expected
        self.option = option
        super().__init__(f"{option}: at position {position}: expected {expected}")


class UnsupportedOption(FairstreamError):
    def __init__(self, option):
        self.option = option
        super().__init__(f"query option {option} is not supported")


# -- filter expression tree ----------------------------------------------------

@dataclass
class Comparison:
    prop: str
    op: str
    value: object          # float or int ns (time)
    value_kind: str        # "number" | "time"

    def eval_scalar(self, entity: dict) -> bool:
        got = entity.get(self.prop)
        if got is None:
            return False
        return _compare(float(got), self.op, float(self.value))

    def eval_vector(self, columns: dict) -> np.ndarray:
        values = columns[self.prop]
        present = columns.get(self.prop + "?present")
        ref = float(self.value)
        with np.errstate(invalid="ignore"):
            out = _compare_vec(values.astype(np.float64), self.op, ref)
        if present is not None:
            out &= present
        return out


@dataclass
class BoolOp:
    op: str                # "and" | "or"
    parts: list

    def eval_scalar(self, entity):
        if self.op == "and":
            return all(p.eval_scalar(entity) for p in self.parts)
        return any(p.eval_scalar(entity) for p in self.parts)

    def eval_vector(self, columns):
        out = self.parts[0].eval_vector(columns)
        for part in self.parts[1:]:
            if self.op == "and":
                out = out & part.eval_vector(columns)
            else:
                out = out | part.eval_vector(columns)
        return out


@dataclass
class NotOp:
    part: object

    def eval_scalar(self, entity):
        return not self.part.eval_scalar(entity)

    def eval_vector(self, columns):
        return ~self.part.eval_vector(columns)


def _compare(left, op, right):
    if op == "eq":
        return left == right
    if op == "ne":
        return left != right
    if op == "gt":
        return left > right
    if op == "ge":
        return left >= right
    if op == "lt":
        return left < right
    return left <= right


def _compare_vec(left, op, right):
    if op == "eq":
        return left == right
    if op == "ne":
        return left != right
    if op == "gt":
        return left > right
    if op == "ge":
        return left >= right
    if op == "lt":
        return left < right
    return left <= right


@dataclass
class StaQuery:
    top: int = DEFAULT_TOP
    skip: int = 0
    orderby: list = field(default_factory=list)   # [(prop, "asc"|"desc")]
    filter: object = None
    select: list | None = None
    expand: str | None = None
    extra: dict = field(default_factory=dict)     # non-$ parameters pass through

    def canonical_options(self) -> dict:
        """The raw option strings, for rebuilding nextLink URLs."""
        return dict(self._raw_options)

    _raw_options: dict = field(default_factory=dict, repr=False)


# -- filter tokenizer / parser ---------------------------------------------------

_TIME_RE = re.compile(
    r"\d{4}-\d{2}-\d{2}[Tt]\d{2}:\d{2}:\d{2}(?:\.\d{1,9})?(?:[Zz]|[+-]\d{2}:\d{2})")
_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass
class _Token:
    kind: str    # ident | number | time | lparen | rparen | end
    text: str
    value: object
    pos: int


def _tokenize_filter(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch == "(":
            tokens.append(_Token("lparen", "(", None, pos))
            pos += 1
            continue
        if ch == ")":
            tokens.append(_Token("rparen", ")", None, pos))
            pos += 1
            continue
        m = _TIME_RE.match(text, pos)
        if m:
            try:
                ns = parse_rfc3339_ns(m.group(0))
            except ValueError:
                raise QueryParseError(pos, "a valid ISO-8601 timestamp")
            tokens.append(_Token("time", m.group(0), ns, pos))
            pos = m.end()
            continue
        m = _NUMBER_RE.match(text, pos)
        if m and not text[pos].isalpha():
            tokens.append(_Token("number", m.group(0), float(m.group(0)), pos))
            pos = m.end()
            continue
        m = _IDENT_RE.match(text, pos)
        if m:
            tokens.append(_Token("ident", m.group(0), None, pos))
            pos = m.end()
            continue
        raise QueryParseError(pos, "a property, literal, operator or parenthesis")
    tokens.append(_Token("end", "", None, n))
    return tokens


class _FilterParser:
    def __init__(self, tokens, properties: dict):
        self.tokens = tokens
        self.properties = properties
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected):
        raise QueryParseError(self.peek().pos, expected)

    def parse(self):
        node = self.parse_or()
        if self.peek().kind != "end":
            self.fail("end of expression, 'and' or 'or'")
        return node

    def parse_or(self):
        parts = [self.parse_and()]
        while self.peek().kind == "ident" and self.peek().text == "or":
            self.advance()
            parts.append(self.parse_and())
        return parts[0] if len(parts) == 1 else BoolOp("or", parts)

    def parse_and(self):
        parts = [self.parse_unary()]
        while self.peek().kind == "ident" and self.peek().text == "and":
            self.advance()
            parts.append(self.parse_unary())
        return parts[0] if len(parts) == 1 else BoolOp("and", parts)

    def parse_unary(self):
        if self.peek().kind == "ident" and self.peek().text == "not":
            self.advance()
            return NotOp(self.parse_unary())
        return self.parse_primary()

    def parse_primary(self):
        tok = self.peek()
        if tok.kind == "lparen":
            self.advance()
            node = self.parse_or()
            if self.peek().kind != "rparen":
                self.fail("')'")
            self.advance()
            return node
        return self.parse_comparison()

    def parse_comparison(self):
        left = self.advance()
        if left.kind != "ident":
            raise QueryParseError(left.pos, "a property name")
        if left.text in ("and", "or", "not") or left.text in COMPARISONS:
            raise QueryParseError(left.pos, "a property name")
        prop_kind = self.properties.get(left.text)
        if prop_kind is None:
            raise QueryParseError(
                left.pos, f"a known property ({', '.join(sorted(self.properties))})")
        if prop_kind == "string":
            raise QueryParseError(
                left.pos, "a filterable property (string properties are not"
                          " filterable in this subset)")
        op_tok = self.advance()
        if op_tok.kind != "ident" or op_tok.text not in COMPARISONS:
            raise QueryParseError(op_tok.pos, "a comparison operator"
                                  " (eq, ne, gt, ge, lt, le)")
        value_tok = self.advance()
        if value_tok.kind == "number":
            value, value_kind = value_tok.value, "number"
        elif value_tok.kind == "time":
            value, value_kind = value_tok.value, "time"
        else:
            raise QueryParseError(value_tok.pos,
                                  "a numeric or ISO-8601 time literal")
        if prop_kind == "time" and value_kind != "time":
            raise QueryParseError(value_tok.pos,
                                  f"a time literal for property {left.text}")
        if prop_kind == "number" and value_kind != "number":
            raise QueryParseError(value_tok.pos,
                                  f"a numeric literal for property {left.text}")
        return Comparison(left.text, op_tok.text, value, value_kind)


# -- option parsing ----------------------------------------------------------------

def parse_query(raw, kind: str, navigations=(), max_top: int = MAX_TOP_DEFAULT) -> StaQuery:
    """Parse a raw query string for an entity kind.

    raw may be bytes or str (the part after '?').  Unknown $-options are
    rejected as UnsupportedOption; everything else yields a StaQuery or
    a positioned QueryParseError.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8", errors="replace")
    properties = PROPERTIES.get(kind, {})
    query = StaQuery()
    pairs = parse_qsl(raw, keep_blank_values=True, strict_parsing=False)
    for key, value in pairs:
        key = key.strip()
        if not key.startswith("$"):
            query.extra[key] = value
            continue
        if key in UNSUPPORTED_OPTIONS:
            raise UnsupportedOption(key)
        if key not in KNOWN_OPTIONS:
            raise UnsupportedOption(key)
        query._raw_options[key] = value
        if key == "$top":
            query.top = _parse_non_negative_int(value, "$top")
            if query.top > max_top:
                query.top = max_top
        elif key == "$skip":
            query.skip = _parse_non_negative_int(value, "$skip")
        elif key == "$orderby":
            query.orderby = _parse_orderby(value, properties)
        elif key == "$select":
            query.select = _parse_select(value, properties)
        elif key == "$expand":
            query.expand = _parse_expand(value, navigations)
        elif key == "$filter":
            tokens = _tokenize_filter(value)
            query.filter = _FilterParser(tokens, properties).parse()
    return query


def _parse_non_negative_int(value, option):
    try:
        parsed = int(value.strip())
    except ValueError:
        raise QueryParseError(0, "a non-negative integer", option=option) from None
    if parsed < 0:
        raise QueryParseError(0, "a non-negative integer", option=option)
    return parsed


def _parse_orderby(value, properties):
    out = []
    offset = 0
    for part in value.split(","):
        stripped = part.strip()
        if not stripped:
            raise QueryParseError(offset, "a property name", option="$orderby")
        pieces = stripped.split()
        prop = pieces[0]
        if prop not in properties:
            raise QueryParseError(offset, f"a known property, got {prop!r}",
                                  option="$orderby")
        direction = "asc"
        if len(pieces) == 2:
            direction = pieces[1].lower()
            if direction not in ("asc", "desc"):
                raise QueryParseError(offset, "'asc' or 'desc'", option="$orderby")
        elif len(pieces) > 2:
            raise QueryParseError(offset, "'<property> [asc|desc]'",
                                  option="$orderby")
        out.append((prop, direction))
        offset += len(part) + 1
    return out


def _parse_select(value, properties):
    out = []
    for part in value.split(","):
        prop = part.strip()
        if prop not in properties:
            raise QueryParseError(0, f"a known property, got {prop!r}",
                                  option="$select")
        out.append(prop)
    return out


def _parse_expand(value, navigations):
    nav = value.strip()
    if "/" in nav or "(" in nav:
        raise QueryParseError(0, "a single navigation name (depth 1, no options)",
                              option="$expand")
    if nav not in navigations:
        raise QueryParseError(0, f"one of {sorted(navigations)}, got {nav!r}",
                              option="$expand")
    return nav
