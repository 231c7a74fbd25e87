"""Text configuration for QC pipelines.

Grammar (one pipeline entry per line):

    line    := varname ';' call | comment | blank
    call    := ident '(' [kwarg (',' kwarg)*] ')'
    kwarg   := ident '=' literal
    literal := number | 'string' | "string" | true | false | flag name

Comments are whole lines starting with '#'.  The same variable may
appear on several lines; entry order is pipeline order.  Every function
name must exist in the catalog and its kwargs must match the declared
signature; errors carry the line number.

The canonical form (comments stripped, whitespace collapsed, kwargs
sorted) is rebuilt token-wise from the parse so string literals survive
untouched; its SHA-256 hex digest is the config hash.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from . import flags as F
from .errors import BadArgument, ConfigSyntaxError, UnknownFunction
from .functions import CATALOG, validate_kwargs

_VARNAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")

_FLAG_LITERALS = dict(F.FLAG_NAMES)


@dataclass
class QcCall:
    name: str
    kwargs: dict
    dfilter: float = F.BAD

    def effective_kwargs(self) -> dict:
        """Explicit kwargs plus materialized defaults plus dfilter."""
        entry = CATALOG[self.name]
        out = {p.name: p.default for p in entry.params if not p.required}
        out.update(self.kwargs)
        out["dfilter"] = self.dfilter
        return out


@dataclass
class QcEntry:
    line: int
    variable: str
    call: QcCall


@dataclass
class QcConfig:
    entries: list
    source_text: str
    canonical_text: str = ""
    config_hash: str = ""

    def __post_init__(self):
        if not self.canonical_text:
            self.canonical_text = "\n".join(
                _canonical_entry(e) for e in self.entries)
        if not self.config_hash:
            self.config_hash = hashlib.sha256(
                self.canonical_text.encode()).hexdigest()


class _LineScanner:
    def __init__(self, text: str, lineno: int):
        self.text = text
        self.lineno = lineno
        self.pos = 0

    def error(self, expected):
        raise ConfigSyntaxError(self.lineno, self.pos + 1, expected)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def at_end(self):
        self.skip_ws()
        return self.pos >= len(self.text)

    def expect(self, char):
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != char:
            self.error(f"'{char}'")
        self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def match_re(self, regex):
        self.skip_ws()
        m = regex.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return m.group(0)
        return None

    def read_string(self):
        quote = self.text[self.pos]
        self.pos += 1
        out = []
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "\\":
                if self.pos + 1 >= len(self.text):
                    self.error("escape sequence")
                nxt = self.text[self.pos + 1]
                out.append({"n": "\n", "t": "\t"}.get(nxt, nxt))
                self.pos += 2
                continue
            if ch == quote:
                self.pos += 1
                return "".join(out)
            out.append(ch)
            self.pos += 1
        self.error("closing quote")

    def read_literal(self):
        self.skip_ws()
        if self.pos >= len(self.text):
            self.error("literal")
        ch = self.text[self.pos]
        if ch in "'\"":
            return self.read_string()
        word = _IDENT_RE.match(self.text, self.pos)
        if word:
            token = word.group(0)
            if token == "true":
                self.pos = word.end()
                return True
            if token == "false":
                self.pos = word.end()
                return False
            if token in _FLAG_LITERALS:
                self.pos = word.end()
                return _FLAG_LITERALS[token]
            self.error("literal (number, string, true/false or flag name)")
        num = self.match_re(_NUMBER_RE)
        if num is not None:
            if re.fullmatch(r"[+-]?\d+", num):
                return int(num)
            return float(num)
        self.error("literal (number, string, true/false or flag name)")


def _parse_line(text: str, lineno: int) -> QcEntry:
    sc = _LineScanner(text, lineno)
    variable = sc.match_re(_VARNAME_RE)
    if variable is None:
        sc.error("variable name")
    sc.expect(";")
    name = sc.match_re(_IDENT_RE)
    if name is None:
        sc.error("function name")
    sc.expect("(")
    kwargs = {}
    if sc.peek() != ")":
        while True:
            key = sc.match_re(_IDENT_RE)
            if key is None:
                sc.error("parameter name")
            if key in kwargs:
                sc.error(f"duplicate parameter '{key}'")
            sc.expect("=")
            kwargs[key] = sc.read_literal()
            if sc.peek() == ",":
                sc.expect(",")
                continue
            break
    sc.expect(")")
    if not sc.at_end():
        sc.error("end of line")

    if name not in CATALOG:
        raise UnknownFunction(lineno, name)
    dfilter = F.BAD
    if "dfilter" in kwargs:
        raw = kwargs.pop("dfilter")
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise BadArgument(name, "dfilter", "expected a flag value", line=lineno)
        dfilter = float(raw)
    validate_kwargs(CATALOG[name], kwargs, line=lineno)
    return QcEntry(lineno, variable, QcCall(name, kwargs, dfilter))


def parse_config(text: str) -> QcConfig:
    """Parse and validate DSL text into an ordered pipeline config."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            entries.append(_parse_line(raw, lineno))
        except BadArgument as exc:
            if exc.line is None:
                raise BadArgument(exc.function, exc.kwarg, str(exc), line=lineno) from None
            raise
    return QcConfig(entries, source_text=text)


def _canonical_literal(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        # UTF-8 canonical text: keep non-ASCII raw so any client can
        # reproduce the exact bytes without Python's \u escaping
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _canonical_flag(value: float) -> str:
    for name, flag in F.FLAG_NAMES.items():
        if value == flag:
            return name
    return repr(float(value))


def _canonical_entry(entry: QcEntry) -> str:
    call = entry.call
    parts = [f"{k}={_canonical_literal(call.kwargs[k])}" for k in sorted(call.kwargs)]
    if call.dfilter != F.BAD:
        parts.append(f"dfilter={_canonical_flag(call.dfilter)}")
    parts.sort()
    return f"{entry.variable} ; {call.name}({', '.join(parts)})"


def canonical_kwargs_string(call: QcCall) -> str:
    """Deterministic parameter rendering for provenance metadata."""
    effective = call.effective_kwargs()
    parts = []
    for key in sorted(effective):
        value = effective[key]
        if key == "dfilter":
            parts.append(f"{key}={_canonical_flag(value)}")
        else:
            parts.append(f"{key}={_canonical_literal(value)}")
    return ", ".join(parts)


def config_hash_of(text: str) -> str:
    return parse_config(text).config_hash
