"""Tokenizer for the scenario DSL.

Tokens: IDENT, NUMBER, STRING, ARROW (->), and single-character punctuation
{ } ( ) [ ] : ; , =. Comments run from '#' to end of line. Strings are
double-quoted with \\" and \\\\ escapes. Numbers allow a leading minus,
a decimal fraction, and an exponent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import DslSyntaxError

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>->)
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>[{}()\[\]:;,=])
    """,
    re.VERBOSE,
)

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT | NUMBER | STRING | ARROW | one of {}()[]:;,= | EOF
    value: object
    line: int
    column: int

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of input"
        if self.kind in ("IDENT", "NUMBER", "STRING"):
            return f"{self.kind} {self.value!r}"
        return repr(self.kind)


def _unescape(raw: str, line: int, column: int) -> str:
    body = raw[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            if i + 1 >= len(body) or body[i + 1] not in _ESCAPES:
                raise DslSyntaxError("bad string escape", line, column)
            out.append(_ESCAPES[body[i + 1]])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            col = pos - line_start + 1
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        col = pos - line_start + 1
        kind = m.lastgroup
        raw = m.group()
        if kind == "ws" or kind == "comment":
            pass
        elif kind == "arrow":
            tokens.append(Token("ARROW", "->", line, col))
        elif kind == "number":
            value: object
            if re.fullmatch(r"-?\d+", raw):
                value = int(raw)
            else:
                value = float(raw)
            tokens.append(Token("NUMBER", value, line, col))
        elif kind == "ident":
            tokens.append(Token("IDENT", raw, line, col))
        elif kind == "string":
            tokens.append(Token("STRING", _unescape(raw, line, col), line, col))
        else:
            tokens.append(Token(raw, raw, line, col))
        newlines = raw.count("\n")
        if newlines:
            line += newlines
            line_start = pos + raw.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("EOF", None, line, len(text) - line_start + 1))
    return tokens
