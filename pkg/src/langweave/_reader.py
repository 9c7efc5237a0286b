"""Character-level cursor used by the hand-written artifact parsers
(grammars, language configurations, family configurations)."""

from __future__ import annotations

import re

from .findings import LanguageError, LineIndex, SourcePos, error

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_QNAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*")
_INT = re.compile(r"[0-9]+")


def skip_layout(text: str, pos: int) -> int:
    """Skip whitespace, ``//`` line comments and ``/* */`` block comments."""
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch in " \t\r\n\f":
            pos += 1
        elif text.startswith("//", pos):
            nl = text.find("\n", pos)
            pos = n if nl < 0 else nl + 1
        elif text.startswith("/*", pos):
            end = text.find("*/", pos + 2)
            if end < 0:
                return pos  # unterminated; the caller fails on "/" here
            pos = end + 2
        else:
            break
    return pos


class Reader:
    def __init__(self, text: str, path: str):
        self.text = text
        self.path = path
        self.pos = 0
        self.lines = LineIndex(text, path)

    def source_pos(self, offset: int | None = None) -> SourcePos:
        return self.lines.pos(self.pos if offset is None else offset)

    def fail(self, expected: str, offset: int | None = None) -> LanguageError:
        at = self.pos if offset is None else offset
        found = self.text[at : at + 12].split("\n")[0] or "end of input"
        return LanguageError(
            error("SyntaxError", f"expected {expected}, found {found!r}", self.source_pos(at))
        )

    def skip(self) -> None:
        self.pos = skip_layout(self.text, self.pos)

    def at_end(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)

    def peek(self, literal: str) -> bool:
        self.skip()
        if not self.text.startswith(literal, self.pos):
            return False
        if literal[-1].isalnum() or literal[-1] == "_":
            nxt = self.pos + len(literal)
            if nxt < len(self.text) and (self.text[nxt].isalnum() or self.text[nxt] == "_"):
                return False
        return True

    def accept(self, literal: str) -> bool:
        if self.peek(literal):
            self.pos += len(literal)
            return True
        return False

    def expect(self, literal: str) -> int:
        self.skip()
        start = self.pos
        if not self.accept(literal):
            raise self.fail(repr(literal))
        return start

    def _regex(self, pattern: re.Pattern, what: str) -> tuple[str, int]:
        self.skip()
        m = pattern.match(self.text, self.pos)
        if not m:
            raise self.fail(what)
        start = self.pos
        self.pos = m.end()
        return m.group(), start

    def ident(self) -> tuple[str, int]:
        return self._regex(_IDENT, "identifier")

    def qualified_name(self) -> tuple[str, int]:
        return self._regex(_QNAME, "qualified name")

    def peek_ident(self) -> str | None:
        self.skip()
        m = _IDENT.match(self.text, self.pos)
        return m.group() if m else None

    def string(self) -> tuple[str, int]:
        """Double-quoted string with backslash escapes; returns the decoded value."""
        self.skip()
        start = self.pos
        if not self.text.startswith('"', start):
            raise self.fail("string literal")
        out = []
        i = start + 1
        while i < len(self.text):
            ch = self.text[i]
            if ch == "\\" and i + 1 < len(self.text):
                out.append(_UNESCAPE.get(self.text[i + 1], self.text[i + 1]))
                i += 2
            elif ch == '"':
                self.pos = i + 1
                return "".join(out), start
            elif ch == "\n":
                break
            else:
                out.append(ch)
                i += 1
        raise self.fail("closing '\"'", start)


_UNESCAPE = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}
_ESCAPE = {v: "\\" + k for k, v in _UNESCAPE.items()}


def quote(value: str) -> str:
    return '"' + "".join(_ESCAPE.get(ch, ch) for ch in value) + '"'
