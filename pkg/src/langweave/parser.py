"""Interpreting a bound language over model text.

The engine is a backtracking recursive-descent interpreter with ordered
choice. References to abstract or interface productions try the composed
dispatch list in order; external references try their guest delegates in
binding order, each parsed with the guest grammar's own tokens and
keywords. Failures report the farthest position reached together with the
terminals and tokens expected there.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Mapping, Union

from ._reader import skip_layout
from .composition import BoundLanguage, ComposedGrammar
from .findings import LanguageError, LineIndex, SourcePos, error
from .grammar import (
    Choice,
    Flavor,
    GrammarName,
    NonterminalRef,
    Optional,
    Repetition,
    Sequence,
    Terminal,
    TokenRef,
)


@dataclass(frozen=True)
class Token:
    text: str
    pos: SourcePos = field(default=SourcePos("<unknown>"), compare=False)

    def __str__(self) -> str:
        return self.text


AstValue = Union[Token, "AstNode", tuple, None]


@dataclass(frozen=True)
class AstNode:
    production: str
    grammar: GrammarName
    attributes: tuple[tuple[str, Any], ...] = ()
    span: tuple[SourcePos, SourcePos] | None = field(default=None, compare=False, repr=False)

    def get(self, label: str, default=None):
        for k, v in self.attributes:
            if k == label:
                return v
        return default

    def __getitem__(self, label: str):
        for k, v in self.attributes:
            if k == label:
                return v
        raise KeyError(label)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.attributes)

    def children(self) -> Iterator[AstNode]:
        for _, v in self.attributes:
            if isinstance(v, AstNode):
                yield v
            elif isinstance(v, tuple):
                yield from (x for x in v if isinstance(x, AstNode))

    def text(self, label: str) -> str | None:
        """Text of a token attribute, or dotted text of a child made of tokens."""
        v = self.get(label)
        if v is None:
            return None
        return token_text(v)

    def to_json(self) -> dict:
        return {
            "production": self.production,
            "grammar": self.grammar.qualified,
            "attributes": {k: _value_json(v) for k, v in self.attributes},
            "span": None if self.span is None else {
                "start": [self.span[0].line, self.span[0].column],
                "end": [self.span[1].line, self.span[1].column],
            },
        }


def token_text(value: AstValue) -> str:
    """Concatenate the tokens of a value; ``.`` joins the parts of a dotted name."""
    if isinstance(value, Token):
        return value.text
    if isinstance(value, tuple):
        return ".".join(token_text(v) for v in value)
    if isinstance(value, AstNode):
        return ".".join(token_text(v) for _, v in value.attributes if v is not None)
    return ""


def _value_json(v: AstValue):
    if isinstance(v, Token):
        return {"token": v.text, "line": v.pos.line, "column": v.pos.column}
    if isinstance(v, AstNode):
        return v.to_json()
    if isinstance(v, tuple):
        return [_value_json(x) for x in v]
    return None


def ast_to_json(node: AstNode) -> str:
    return json.dumps(node.to_json(), indent=2, ensure_ascii=False) + "\n"


# --- attribute schemas ------------------------------------------------------

_MANY = 2


def _counts(expr) -> dict[str, tuple[int, int]]:
    """label -> (min, max) occurrences; max is capped at _MANY."""
    if isinstance(expr, Terminal):
        return {expr.label: (1, 1)} if expr.label else {}
    if isinstance(expr, (NonterminalRef, TokenRef)):
        return {expr.label: (1, 1)}
    if isinstance(expr, Sequence):
        out: dict[str, tuple[int, int]] = {}
        for e in expr.elements:
            for k, (lo, hi) in _counts(e).items():
                plo, phi = out.get(k, (0, 0))
                out[k] = (plo + lo, min(_MANY, phi + hi))
        return out
    if isinstance(expr, Choice):
        alts = [_counts(e) for e in expr.alternatives]
        keys = [k for a in alts for k in a]
        out = {}
        for k in dict.fromkeys(keys):
            los = [a.get(k, (0, 0))[0] for a in alts]
            his = [a.get(k, (0, 0))[1] for a in alts]
            out[k] = (min(los), max(his))
        return out
    if isinstance(expr, Optional):
        return {k: (0, hi) for k, (lo, hi) in _counts(expr.inner).items()}
    if isinstance(expr, Repetition):
        return {k: (lo * expr.min, _MANY) for k, (lo, hi) in _counts(expr.inner).items()}
    return {}


def attribute_schema(rhs) -> tuple[tuple[str, bool], ...]:
    """Ordered (label, is_list) pairs implied by a production body."""
    if rhs is None:
        return ()
    return tuple((k, hi >= _MANY) for k, (lo, hi) in _counts(rhs).items())


# --- parsing ----------------------------------------------------------------


class _Unbound(Exception):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset


Trace = Callable[[str, GrammarName, str, int], None]


def parse_model(lang: BoundLanguage, text: str, path: str = "<string>", *,
                start: str | None = None, trace: Trace | None = None) -> AstNode:
    """Parse ``text`` with ``lang`` from its start production (or ``start``).

    Raises :class:`LanguageError` carrying one SyntaxError,
    UnboundExternalReached or InputNotConsumed finding.
    """
    return _Run(lang, text, path, trace).parse(start or lang.host.start)


class _Run:
    def __init__(self, lang: BoundLanguage, text: str, path: str, trace: Trace | None):
        self.lang = lang
        self.text = text
        self.lines = LineIndex(text, path)
        self.trace = trace
        self.far = -1
        self.expected: set[str] = set()
        self._schemas: dict[tuple[int, str], tuple] = {}

    def parse(self, start: str | None) -> AstNode:
        host = self.lang.host
        if start is None or host.key(start) is None:
            raise LanguageError(error("SyntaxError", f"language has no start production {start}",
                                      self.lines.pos(0)))
        try:
            result = self.ref(host, start, 0)
        except _Unbound as exc:
            raise LanguageError(error(
                "UnboundExternalReached",
                f"external production {exc.name} is not bound to any embedded language",
                self.lines.pos(exc.offset), external=exc.name)) from None
        if result is None:
            raise LanguageError(self._syntax_error())
        node, end = result
        end = skip_layout(self.text, end)
        if end < len(self.text):
            if self.far >= end:
                raise LanguageError(self._syntax_error())
            raise LanguageError(error("InputNotConsumed",
                                      f"{start} ends here but input continues",
                                      self.lines.pos(end)))
        return node

    def _syntax_error(self):
        at = max(self.far, 0)
        found = self.text[at:at + 12].split("\n")[0] or "end of input"
        expected = ", ".join(sorted(self.expected)) or "nothing"
        return error("SyntaxError", f"expected {expected}; found {found!r}",
                     self.lines.pos(at), expected=sorted(self.expected))

    def _fail(self, offset: int, what: str) -> None:
        if offset > self.far:
            self.far = offset
            self.expected = {what}
        elif offset == self.far:
            self.expected.add(what)

    # references -------------------------------------------------------------

    def ref(self, cg: ComposedGrammar, target: str, pos: int):
        rule = cg.rule(target)
        if rule is None:
            raise LanguageError(error("UndefinedNonterminal",
                                      f"{cg.root_name} has no production {target}",
                                      self.lines.pos(pos)))
        if rule.flavor is Flavor.EXTERNAL:
            delegates = self.lang.external_delegates.get(rule.name)
            if not delegates:
                raise _Unbound(rule.name, skip_layout(self.text, pos))
            for guest, production in delegates:
                result = self.ref(guest, production, pos)
                if result is not None:
                    return result
            return None
        for alt in cg.dispatch[rule.name]:
            result = self.production(cg, alt, pos)
            if result is not None:
                return result
        return None

    def production(self, cg: ComposedGrammar, name: str, pos: int):
        rule = cg.rule(name)
        origin = cg.origin(name)
        if self.trace:
            self.trace("enter", origin, name, pos)
        caps: list[tuple[str, Any]] = []
        end = self.expr(cg, rule.rhs, pos, caps)
        if end is None:
            if self.trace:
                self.trace("fail", origin, name, pos)
            return None
        if self.trace:
            self.trace("match", origin, name, pos)
        start = skip_layout(self.text, pos) if end > pos else pos
        node = AstNode(name, origin, self._attributes(cg, name, rule.rhs, caps),
                       (self.lines.pos(start), self.lines.pos(end)))
        return node, end

    def _attributes(self, cg, name, rhs, caps):
        key = (id(cg), name)
        schema = self._schemas.get(key)
        if schema is None:
            schema = self._schemas[key] = attribute_schema(rhs)
        values: dict[str, list] = {label: [] for label, _ in schema}
        for label, value in caps:
            values[label].append(value)
        out = []
        for label, many in schema:
            got = values[label]
            out.append((label, tuple(got) if many else (got[0] if got else None)))
        return tuple(out)

    # expressions ------------------------------------------------------------

    def expr(self, cg: ComposedGrammar, e, pos: int, caps: list) -> int | None:
        if isinstance(e, Terminal):
            at = skip_layout(self.text, pos)
            lit = e.literal
            if self.text.startswith(lit, at) and not self._glued(lit, at + len(lit)):
                if e.label:
                    caps.append((e.label, Token(lit, self.lines.pos(at))))
                return at + len(lit)
            self._fail(at, repr(lit))
            return None
        if isinstance(e, TokenRef) or (isinstance(e, NonterminalRef) and cg.is_token(e.target)):
            name = e.token if isinstance(e, TokenRef) else e.target
            at = skip_layout(self.text, pos)
            m = cg.token_regex[name].match(self.text, at)
            if m and m.end() > at and m.group() not in cg.keywords:
                caps.append((e.label, Token(m.group(), self.lines.pos(at))))
                return m.end()
            self._fail(at, name)
            return None
        if isinstance(e, NonterminalRef):
            result = self.ref(cg, e.target, pos)
            if result is None:
                return None
            caps.append((e.label, result[0]))
            return result[1]
        if isinstance(e, Sequence):
            mark = len(caps)
            for el in e.elements:
                pos = self.expr(cg, el, pos, caps)
                if pos is None:
                    del caps[mark:]
                    return None
            return pos
        if isinstance(e, Choice):
            mark = len(caps)
            for alt in e.alternatives:
                end = self.expr(cg, alt, pos, caps)
                if end is not None:
                    return end
                del caps[mark:]
            return None
        if isinstance(e, Optional):
            mark = len(caps)
            end = self.expr(cg, e.inner, pos, caps)
            if end is None:
                del caps[mark:]
                return pos
            return end
        if isinstance(e, Repetition):
            count = 0
            while True:
                mark = len(caps)
                end = self.expr(cg, e.inner, pos, caps)
                if end is None:
                    del caps[mark:]
                    break
                count += 1
                if end == pos:
                    break  # no progress; further iterations would loop
                pos = end
            return pos if count >= e.min else None
        raise TypeError(f"unknown rhs element {e!r}")

    def _glued(self, lit: str, nxt: int) -> bool:
        """True when an identifier-like literal runs into further identifier chars."""
        if not (lit[-1].isalnum() or lit[-1] == "_"):
            return False
        return nxt < len(self.text) and (self.text[nxt].isalnum() or self.text[nxt] == "_")


# --- pretty printing --------------------------------------------------------


def pretty_print(node: AstNode, lang: BoundLanguage) -> str:
    """Canonical text for ``node``: single spaces between tokens, a newline
    after every ``;`` and ``}``. Raises InconsistentNode when the node's
    attributes cannot be produced by its production."""
    cg = _grammar_of(node, lang)
    pieces = _Unparser(lang).node(node, cg)
    return layout(pieces)


def layout(pieces: list[str]) -> str:
    lines: list[str] = []
    current: list[str] = []
    for p in pieces:
        current.append(p)
        if p in (";", "}"):
            lines.append(" ".join(current))
            current = []
    if current:
        lines.append(" ".join(current))
    return "".join(line + "\n" for line in lines)


def _grammar_of(node: AstNode, lang: BoundLanguage) -> ComposedGrammar:
    for cg in lang.grammars:
        key = cg.by_name.get(node.production)
        if key is not None and cg.origins[key] == node.grammar:
            return cg
    raise _inconsistent(node, f"production {node.grammar}.{node.production} is not part of "
                              "the language")


def _inconsistent(node: AstNode, message: str) -> LanguageError:
    pos = node.span[0] if node.span else SourcePos("<ast>")
    return LanguageError(error("InconsistentNode", message, pos))


class _Unparser:
    def __init__(self, lang: BoundLanguage):
        self.lang = lang

    def node(self, node: AstNode, cg: ComposedGrammar) -> list[str]:
        rule = cg.rule(node.production)
        if rule is None or rule.flavor is not Flavor.NORMAL or \
                cg.origin(node.production) != node.grammar:
            raise _inconsistent(node, f"{node.production} is not a concrete production of "
                                      f"{cg.root_name}")
        queues = {}
        for label, many in attribute_schema(rule.rhs):
            v = node.get(label)
            queues[label] = tuple(v) if many else (() if v is None else (v,))
        if set(node.labels) != set(queues):
            raise _inconsistent(node, f"{node.production} attributes {list(node.labels)} do not "
                                      f"match its production {list(queues)}")
        start = {k: 0 for k in queues}
        for pieces, idx in self.expr(rule.rhs, cg, queues, start):
            if all(idx[k] == len(queues[k]) for k in queues):
                return pieces
        raise _inconsistent(node, f"attributes of {node.production} cannot be produced by its "
                                  "right-hand side")

    def expr(self, e, cg, queues, idx):
        """Yield (pieces, idx) for every way ``e`` can emit a prefix of the queues."""
        if isinstance(e, Terminal):
            if e.label is None:
                yield [e.literal], idx
                return
            q = queues[e.label]
            i = idx[e.label]
            if i < len(q) and isinstance(q[i], Token) and q[i].text == e.literal:
                yield [e.literal], {**idx, e.label: i + 1}
            return
        if isinstance(e, TokenRef) or (isinstance(e, NonterminalRef) and cg.is_token(e.target)):
            q = queues[e.label]
            i = idx[e.label]
            if i < len(q) and isinstance(q[i], Token):
                yield [q[i].text], {**idx, e.label: i + 1}
            return
        if isinstance(e, NonterminalRef):
            q = queues[e.label]
            i = idx[e.label]
            if i >= len(q) or not isinstance(q[i], AstNode):
                return
            child_cg = self._accepting(cg, e.target, q[i])
            if child_cg is not None:
                yield self.node(q[i], child_cg), {**idx, e.label: i + 1}
            return
        if isinstance(e, Sequence):
            yield from self._seq(e.elements, 0, cg, queues, idx)
            return
        if isinstance(e, Choice):
            for alt in e.alternatives:
                yield from self.expr(alt, cg, queues, idx)
            return
        if isinstance(e, Optional):
            for pieces, nxt in self.expr(e.inner, cg, queues, idx):
                if nxt != idx:
                    yield pieces, nxt
            yield [], idx
            return
        if isinstance(e, Repetition):
            yield from self._rep(e, 0, cg, queues, idx)
            return
        raise TypeError(f"unknown rhs element {e!r}")

    def _seq(self, elements, i, cg, queues, idx):
        if i == len(elements):
            yield [], idx
            return
        for head, mid in self.expr(elements[i], cg, queues, idx):
            for tail, end in self._seq(elements, i + 1, cg, queues, mid):
                yield head + tail, end

    def _rep(self, e, count, cg, queues, idx):
        for head, mid in self.expr(e.inner, cg, queues, idx):
            if mid == idx and count >= e.min:
                continue
            if mid == idx:
                yield head, mid
                continue
            for tail, end in self._rep(e, count + 1, cg, queues, mid):
                yield head + tail, end
        if count >= e.min:
            yield [], idx

    def _accepting(self, cg: ComposedGrammar, target: str, child: AstNode):
        """Grammar in which ``child`` may stand for a reference to ``target``."""
        rule = cg.rule(target)
        if rule is None:
            return None
        if rule.flavor is Flavor.EXTERNAL:
            for guest, production in self.lang.external_delegates.get(rule.name, ()):
                found = self._accepting(guest, production, child)
                if found is not None:
                    return found
            return None
        for alt in cg.dispatch[rule.name]:
            if alt == child.production and cg.origin(alt) == child.grammar:
                return cg
        return None


# --- traversal --------------------------------------------------------------


def iter_nodes(node: AstNode) -> Iterator[AstNode]:
    """Depth-first, pre-order; embedded subtrees are visited in place."""
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(reversed(list(cur.children())))


VisitorRules = Union[Callable[[AstNode, Any], Any],
                     Mapping[Union[str, tuple[str, str]], Callable[[AstNode, Any], Any]]]


def walk(node: AstNode, rules: VisitorRules, acc: Any = None) -> Any:
    """Fold ``rules`` over the tree in pre-order.

    ``rules`` is either one callable ``(node, acc) -> acc`` or a mapping whose
    keys are ``(grammar, production)`` pairs, bare production names or
    ``"*"``; the most specific key wins for each node.
    """
    for n in iter_nodes(node):
        if callable(rules):
            acc = rules(n, acc)
            continue
        fn = (rules.get((n.grammar.qualified, n.production))
              or rules.get(n.production)
              or rules.get("*"))
        if fn is not None:
            acc = fn(n, acc)
    return acc
