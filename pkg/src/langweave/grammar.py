"""Grammar artifacts: model, parser, canonical printer and validation.

Concrete syntax::

    package a.b;                          // optional
    grammar a.b.Name extends p.Parent {   // extends optional
      start Root;
      token NUMBER = /[0-9]+(\\.[0-9]+)?/;
      Root = Item* ;
      abstract Item = Name:ID ;
      interface Element ;
      external Body ;
      Special extends Item implements Element = "special" Name:ID ;
    }

References to a token defined in the same grammar (or a built-in token)
parse as :class:`TokenRef`; every other reference is a
:class:`NonterminalRef` and may still name a token inherited from a parent
grammar, which is settled once the extends chain is known.
"""

from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Sequence as Seq, Union

from ._reader import Reader, quote
from .findings import Finding, LanguageError, SourcePos, error

BUILTIN_TOKENS: dict[str, str] = {
    "ID": r"[A-Za-z_][A-Za-z0-9_]*",
    "INT": r"[0-9]+",
    "STRING": r'"(?:[^"\\\n]|\\.)*"',
}

_SEGMENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_KEYWORDS = {"grammar", "extends", "implements", "abstract", "interface", "external",
             "token", "start", "package"}
_NOWHERE = SourcePos("<unknown>")


@dataclass(frozen=True, order=True)
class GrammarName:
    package: tuple[str, ...]
    simple: str

    def __post_init__(self) -> None:
        if not self.simple:
            raise ValueError("grammar simple name must not be empty")
        for seg in (*self.package, self.simple):
            if not _SEGMENT.match(seg):
                raise ValueError(f"invalid name segment {seg!r}")

    @classmethod
    def parse(cls, dotted: str) -> GrammarName:
        *pkg, simple = dotted.split(".")
        return cls(tuple(pkg), simple)

    @property
    def qualified(self) -> str:
        return ".".join((*self.package, self.simple))

    def __str__(self) -> str:
        return self.qualified


class Flavor(str, enum.Enum):
    NORMAL = "Normal"
    ABSTRACT = "Abstract"
    INTERFACE = "Interface"
    EXTERNAL = "External"


# --- right-hand sides -------------------------------------------------------


@dataclass(frozen=True)
class Terminal:
    literal: str
    label: str | None = None
    pos: SourcePos = field(default=_NOWHERE, compare=False, repr=False)


@dataclass(frozen=True)
class NonterminalRef:
    target: str
    label: str
    pos: SourcePos = field(default=_NOWHERE, compare=False, repr=False)


@dataclass(frozen=True)
class TokenRef:
    token: str
    label: str
    pos: SourcePos = field(default=_NOWHERE, compare=False, repr=False)


@dataclass(frozen=True)
class Sequence:
    elements: tuple


@dataclass(frozen=True)
class Choice:
    alternatives: tuple


@dataclass(frozen=True)
class Repetition:
    inner: object
    min: int = 0
    unbounded: bool = True


@dataclass(frozen=True)
class Optional:
    inner: object


RhsExpr = Union[Terminal, NonterminalRef, TokenRef, Sequence, Choice, Repetition, Optional]


def iter_rhs(expr: RhsExpr | None) -> Iterator[RhsExpr]:
    """Pre-order iteration over an RHS expression tree."""
    if expr is None:
        return
    yield expr
    if isinstance(expr, Sequence):
        for e in expr.elements:
            yield from iter_rhs(e)
    elif isinstance(expr, Choice):
        for e in expr.alternatives:
            yield from iter_rhs(e)
    elif isinstance(expr, (Repetition, Optional)):
        yield from iter_rhs(expr.inner)


# --- grammar model ----------------------------------------------------------


@dataclass(frozen=True)
class ProductionRule:
    name: str
    flavor: Flavor = Flavor.NORMAL
    extends: str | None = None
    implements: tuple[str, ...] = ()
    rhs: RhsExpr | None = None
    pos: SourcePos = field(default=_NOWHERE, compare=False, repr=False)


@dataclass(frozen=True)
class TokenRule:
    name: str
    pattern: str
    pos: SourcePos = field(default=_NOWHERE, compare=False, repr=False)


@dataclass(frozen=True)
class GrammarModel:
    name: GrammarName
    extends: GrammarName | None = None
    start: str | None = None
    productions: tuple[ProductionRule, ...] = ()
    tokens: tuple[TokenRule, ...] = ()
    path: str = field(default="<string>", compare=False, repr=False)
    extends_pos: SourcePos = field(default=_NOWHERE, compare=False, repr=False)

    def production(self, name: str) -> ProductionRule | None:
        for p in self.productions:
            if p.name == name:
                return p
        return None

    def token(self, name: str) -> TokenRule | None:
        for t in self.tokens:
            if t.name == name:
                return t
        return None

    @property
    def own_start(self) -> str | None:
        """Declared start, else the first normal production, else None."""
        if self.start is not None:
            return self.start
        for p in self.productions:
            if p.flavor is Flavor.NORMAL:
                return p.name
        return None


# --- parsing ----------------------------------------------------------------


def parse_grammar(text: str, path: str = "<string>") -> GrammarModel:
    """Parse grammar text; raises :class:`LanguageError` with findings on failure."""
    return _GrammarParser(text, path).parse()


class _GrammarParser(Reader):
    def parse(self) -> GrammarModel:
        self.findings: list[Finding] = []
        package: tuple[str, ...] | None = None
        if self.accept("package"):
            pkg, _ = self.qualified_name()
            package = tuple(pkg.split("."))
            self.expect(";")
        self.expect("grammar")
        raw, name_at = self.qualified_name()
        name = GrammarName.parse(raw)
        if package is not None:
            if not name.package:
                name = GrammarName(package, name.simple)
            elif name.package != package:
                self.findings.append(error(
                    "PackageMismatch",
                    f"package {'.'.join(package)} disagrees with grammar name {raw}",
                    self.source_pos(name_at)))
        parent = None
        parent_at = name_at
        if self.accept("extends"):
            raw_parent, parent_at = self.qualified_name()
            parent = GrammarName.parse(raw_parent)
            if parent == name:
                self.findings.append(error("SelfInheritance", f"grammar {name} extends itself",
                                           self.source_pos(parent_at)))
        self.expect("{")

        start: str | None = None
        productions: list[ProductionRule] = []
        tokens: list[TokenRule] = []
        # bodies are parsed after all token declarations are known
        pending: list[tuple[ProductionRule, int]] = []
        while not self.accept("}"):
            if self.at_end():
                raise self.fail("'}'")
            if self.accept("start"):
                sname, sat = self.ident()
                self.expect(";")
                if start is not None:
                    self.findings.append(error("DuplicateStart",
                                               f"start already declared as {start}",
                                               self.source_pos(sat)))
                else:
                    start = sname
            elif self.accept("token"):
                tokens.append(self._token_rule())
            else:
                rule, body_at = self._production_header()
                pending.append((rule, body_at))
        if not self.at_end():
            raise self.fail("end of input")

        self._check_tokens(tokens)
        token_names = set(BUILTIN_TOKENS) | {t.name for t in tokens}
        seen: dict[str, ProductionRule] = {}
        for rule, body_at in pending:
            rhs = None
            if body_at >= 0:
                self.pos = body_at
                rhs = self._choice(token_names)
                if not self.accept(";"):
                    raise self.fail("';'")
            rule = ProductionRule(rule.name, rule.flavor, rule.extends, rule.implements,
                                  rhs, rule.pos)
            if rule.name in seen:
                self.findings.append(error("DuplicateProduction",
                                           f"production {rule.name} already defined",
                                           rule.pos))
                continue
            if rule.name in token_names:
                self.findings.append(error("NameClash",
                                           f"production {rule.name} clashes with a token",
                                           rule.pos))
            self._check_flavor(rule)
            seen[rule.name] = rule
            productions.append(rule)

        if self.findings:
            raise LanguageError(self.findings)
        return GrammarModel(name, parent, start, tuple(productions), tuple(tokens), self.path,
                            self.source_pos(parent_at))

    def _token_rule(self) -> TokenRule:
        tname, tat = self.ident()
        self.expect("=")
        self.skip()
        if not self.text.startswith("/", self.pos):
            raise self.fail("regular expression /.../")
        buf = []
        i = self.pos + 1
        while True:
            if i >= len(self.text) or self.text[i] == "\n":
                raise self.fail("closing '/'", self.pos)
            ch = self.text[i]
            if ch == "\\" and i + 1 < len(self.text):
                nxt = self.text[i + 1]
                buf.append("/" if nxt == "/" else ch + nxt)
                i += 2
            elif ch == "/":
                break
            else:
                buf.append(ch)
                i += 1
        self.pos = i + 1
        self.expect(";")
        return TokenRule(tname, "".join(buf), self.source_pos(tat))

    def _check_tokens(self, tokens: list[TokenRule]) -> None:
        names: set[str] = set()
        for t in tokens:
            if t.name in BUILTIN_TOKENS:
                self.findings.append(error("BuiltinTokenRedefined",
                                           f"token {t.name} is built in", t.pos))
            elif t.name in names:
                self.findings.append(error("DuplicateToken",
                                           f"token {t.name} already defined", t.pos))
            names.add(t.name)
            problem = token_pattern_problem(t.pattern)
            if problem:
                self.findings.append(error("InvalidTokenPattern",
                                           f"token {t.name}: {problem}", t.pos))

    def _production_header(self) -> tuple[ProductionRule, int]:
        flavor = Flavor.NORMAL
        for kw, fl in (("abstract", Flavor.ABSTRACT), ("interface", Flavor.INTERFACE),
                       ("external", Flavor.EXTERNAL)):
            if self.accept(kw):
                flavor = fl
                break
        pname, pat = self.ident()
        if pname in _KEYWORDS:
            raise self.fail("production name", pat)
        extends = None
        implements: list[str] = []
        if self.accept("extends"):
            extends, _ = self.ident()
        if self.accept("implements"):
            implements.append(self.ident()[0])
            while self.accept(","):
                implements.append(self.ident()[0])
        body_at = -1
        if self.accept("="):
            body_at = self.pos
            self._skip_body()
        else:
            self.expect(";")
        rule = ProductionRule(pname, flavor, extends, tuple(implements), None,
                              self.source_pos(pat))
        return rule, body_at

    def _skip_body(self) -> None:
        # first pass only needs to find the terminating ';'
        self._choice(set(BUILTIN_TOKENS))
        if not self.accept(";"):
            raise self.fail("';'")

    def _check_flavor(self, rule: ProductionRule) -> None:
        problem = None
        if rule.flavor is Flavor.EXTERNAL:
            if rule.rhs is not None or rule.extends or rule.implements:
                problem = "external productions take no body, extends or implements"
        elif rule.flavor is Flavor.INTERFACE:
            if rule.rhs is not None:
                problem = "interface productions define no concrete syntax"
        elif rule.rhs is None:
            problem = f"{rule.flavor.value.lower()} production requires a body"
        if problem:
            self.findings.append(error("InvalidFlavor", f"{rule.name}: {problem}", rule.pos))

    # rhs := seq ("|" seq)* ; seq := postfix* ; postfix := atom ("*"|"+"|"?")*
    def _choice(self, tokens: set[str]) -> RhsExpr:
        alts = [self._sequence(tokens)]
        while self.accept("|"):
            alts.append(self._sequence(tokens))
        return alts[0] if len(alts) == 1 else Choice(tuple(alts))

    def _sequence(self, tokens: set[str]) -> RhsExpr:
        elems = []
        while True:
            self.skip()
            if self.pos >= len(self.text) or self.text[self.pos] in "|);":
                break
            elems.append(self._postfix(tokens))
        return elems[0] if len(elems) == 1 else Sequence(tuple(elems))

    def _postfix(self, tokens: set[str]) -> RhsExpr:
        expr = self._atom(tokens)
        while True:
            if self.accept("*"):
                expr = Repetition(expr, 0)
            elif self.accept("+"):
                expr = Repetition(expr, 1)
            elif self.accept("?"):
                expr = Optional(expr)
            else:
                return expr

    def _atom(self, tokens: set[str]) -> RhsExpr:
        self.skip()
        at = self.pos
        if self.accept("("):
            inner = self._choice(tokens)
            self.expect(")")
            return inner
        if self.text.startswith('"', at):
            return self._terminal(None, at)
        if self.peek_ident() is None:
            raise self.fail("terminal, reference or '('")
        first, _ = self.qualified_name()
        label = None
        if "." not in first and self.accept(":"):
            label = first
            self.skip()
            if self.text.startswith('"', self.pos):
                return self._terminal(label, at)
            first, _ = self.qualified_name()
        if first in tokens:
            return TokenRef(first, label or first, self.source_pos(at))
        return NonterminalRef(first, label or first.rsplit(".", 1)[-1], self.source_pos(at))

    def _terminal(self, label: str | None, at: int) -> Terminal:
        lit, lit_at = self.string()
        if not lit:
            raise self.fail("non-empty terminal", lit_at)
        return Terminal(lit, label, self.source_pos(at))


def token_pattern_problem(pattern: str) -> str | None:
    try:
        compiled = re.compile(pattern)
    except re.error as exc:
        return f"pattern does not compile: {exc}"
    if compiled.match("") is not None:
        return "pattern matches the empty string"
    return None


# --- printing ---------------------------------------------------------------


def print_grammar(g: GrammarModel) -> str:
    """Canonical text for ``g``; ``parse_grammar`` of the result equals ``g``."""
    head = f"grammar {g.name}"
    if g.extends:
        head += f" extends {g.extends}"
    lines = [head + " {"]
    if g.start is not None:
        lines.append(f"  start {g.start};")
    for t in g.tokens:
        lines.append(f"  token {t.name} = /{_escape_pattern(t.pattern)}/;")
    for p in g.productions:
        lines.append("  " + print_production(p))
    lines.append("}")
    return "\n".join(lines) + "\n"


def print_production(p: ProductionRule) -> str:
    out = ""
    if p.flavor is not Flavor.NORMAL:
        out += p.flavor.value.lower() + " "
    out += p.name
    if p.extends:
        out += f" extends {p.extends}"
    if p.implements:
        out += " implements " + ", ".join(p.implements)
    if p.rhs is not None:
        body = print_rhs(p.rhs)
        out += " =" + (" " + body if body else "")
    return out + " ;"


def _escape_pattern(pattern: str) -> str:
    out = []
    i = 0
    while i < len(pattern):
        ch = pattern[i]
        if ch == "\\" and i + 1 < len(pattern):
            out.append(pattern[i:i + 2])
            i += 2
            continue
        out.append("\\/" if ch == "/" else ch)
        i += 1
    return "".join(out)


def print_rhs(expr: RhsExpr) -> str:
    if isinstance(expr, Terminal):
        lit = quote(expr.literal)
        return f"{expr.label}:{lit}" if expr.label else lit
    if isinstance(expr, NonterminalRef):
        default = expr.target.rsplit(".", 1)[-1]
        return expr.target if expr.label == default else f"{expr.label}:{expr.target}"
    if isinstance(expr, TokenRef):
        return expr.token if expr.label == expr.token else f"{expr.label}:{expr.token}"
    if isinstance(expr, Sequence):
        return " ".join(_paren(e, (Sequence, Choice)) for e in expr.elements)
    if isinstance(expr, Choice):
        return " | ".join(_paren(e, (Choice,)) for e in expr.alternatives)
    if isinstance(expr, Repetition):
        return _paren(expr.inner, (Sequence, Choice)) + ("*" if expr.min == 0 else "+")
    if isinstance(expr, Optional):
        return _paren(expr.inner, (Sequence, Choice)) + "?"
    raise TypeError(f"not an rhs expression: {expr!r}")


def _paren(expr: RhsExpr, needs: tuple) -> str:
    text = print_rhs(expr)
    return f"({text})" if isinstance(expr, needs) else text


# --- validation -------------------------------------------------------------


def merged_productions(g: GrammarModel, parents: Seq[GrammarModel]
                       ) -> dict[str, tuple[ProductionRule, GrammarModel]]:
    """Name -> (rule, defining grammar) with child definitions overriding parents.

    ``parents`` is ordered nearest-first.
    """
    table: dict[str, tuple[ProductionRule, GrammarModel]] = {}
    for grammar in reversed([g, *parents]):
        for p in grammar.productions:
            table[p.name] = (p, grammar)
    return table


def merged_tokens(g: GrammarModel, parents: Seq[GrammarModel]) -> dict[str, str]:
    tokens = dict(BUILTIN_TOKENS)
    for grammar in reversed([g, *parents]):
        for t in grammar.tokens:
            tokens[t.name] = t.pattern
    return tokens


def effective_start(g: GrammarModel, parents: Seq[GrammarModel]) -> str | None:
    """Nearest declared start along the chain, else the base grammar's first
    normal production, else the first normal production of any grammar."""
    chain = [g, *parents]
    for grammar in chain:
        if grammar.start is not None:
            return grammar.start
    for grammar in reversed(chain):
        s = grammar.own_start
        if s is not None:
            return s
    return None


def validate_grammar(g: GrammarModel, parents: Seq[GrammarModel] = ()) -> list[Finding]:
    """All well-formedness violations of ``g`` given its resolved extends chain
    (nearest parent first). Findings are ordered by position, then code."""
    table = merged_productions(g, parents)
    tokens = merged_tokens(g, parents)
    findings: list[Finding] = []

    def defined(target: str) -> bool:
        return _lookup(target, table) is not None or target in tokens

    for p in g.productions:
        for ref in iter_rhs(p.rhs):
            if isinstance(ref, NonterminalRef) and not defined(ref.target):
                findings.append(error("UndefinedNonterminal",
                                      f"{p.name} references undefined nonterminal {ref.target}",
                                      ref.pos))
            elif isinstance(ref, TokenRef) and ref.token not in tokens:
                findings.append(error("UndefinedToken",
                                      f"{p.name} references undefined token {ref.token}",
                                      ref.pos))
        if p.extends is not None:
            target = table.get(p.extends)
            if target is None or target[0].flavor not in (Flavor.NORMAL, Flavor.ABSTRACT) \
                    or (target[0] is p):
                what = "undefined" if target is None else (
                    "itself" if target[0] is p else target[0].flavor.value.lower())
                findings.append(error("InvalidExtends",
                                      f"{p.name} extends {p.extends} ({what}); "
                                      "only normal or abstract productions can be extended",
                                      p.pos))
        for iface in p.implements:
            target = table.get(iface)
            if target is None or target[0].flavor is not Flavor.INTERFACE:
                what = "undefined" if target is None else target[0].flavor.value.lower()
                findings.append(error("InvalidImplements",
                                      f"{p.name} implements {iface} ({what}); "
                                      "only interface productions can be implemented",
                                      p.pos))

    findings.extend(_extends_cycles(g, table))

    extenders = _extender_graph(table)
    for p in g.productions:
        if p.flavor is Flavor.ABSTRACT and not _has_normal_extender(p.name, table, extenders):
            findings.append(error("AbstractWithoutExtender",
                                  f"abstract production {p.name} has no normal production "
                                  "extending it", p.pos))

    start = effective_start(g, parents)
    if start is not None:
        if start not in table:
            findings.append(error("UndefinedStart", f"start production {start} is not defined",
                                  SourcePos(g.path)))
        else:
            findings.extend(_left_recursion(start, table, tokens, extenders, g))

    findings.sort(key=lambda f: (f.pos.line, f.pos.column, f.code, f.message))
    return findings


def _lookup(target: str, table):
    if "." not in target:
        return table.get(target)
    gname, _, pname = target.rpartition(".")
    entry = table.get(pname)
    if entry is not None and entry[1].name.qualified == gname:
        return entry
    return None


def _extender_graph(table) -> dict[str, list[str]]:
    """Production name -> names that extend or implement it (table order)."""
    graph: dict[str, list[str]] = {name: [] for name in table}
    for name, (p, _) in table.items():
        for sup in ([p.extends] if p.extends else []) + list(p.implements):
            if sup in graph and sup != name:
                graph[sup].append(name)
    return graph


def _has_normal_extender(name: str, table, extenders) -> bool:
    seen = set()
    stack = list(extenders.get(name, ()))
    while stack:
        sub = stack.pop()
        if sub in seen:
            continue
        seen.add(sub)
        if table[sub][0].flavor is Flavor.NORMAL:
            return True
        stack.extend(extenders.get(sub, ()))
    return False


def _extends_cycles(g: GrammarModel, table) -> list[Finding]:
    found = []
    for p in g.productions:
        seen = {p.name}
        cur = p.extends
        while cur is not None and cur in table:
            if cur in seen:
                # direct self-extension is reported as InvalidExtends
                if cur == p.name and p.extends != p.name:
                    found.append(error("CyclicExtends",
                                       f"extends chain of {p.name} is cyclic", p.pos))
                break
            seen.add(cur)
            cur = table[cur][0].extends
    return found


def concrete_alternatives(name: str, table, extenders) -> list[str]:
    """Normal productions usable where ``name`` is referenced (unordered closure)."""
    out = []
    seen = set()
    stack = [name]
    while stack:
        cur = stack.pop()
        if cur in seen or cur not in table:
            continue
        seen.add(cur)
        if table[cur][0].flavor is Flavor.NORMAL:
            out.append(cur)
        stack.extend(extenders.get(cur, ()))
    return out


def _left_recursion(start: str, table, tokens, extenders, g: GrammarModel) -> list[Finding]:
    alts = {n: concrete_alternatives(n, table, extenders) for n in table}

    nullable: dict[str, bool] = {n: False for n in table}

    def null(expr) -> bool:
        if isinstance(expr, (Terminal, TokenRef)):
            return False
        if isinstance(expr, NonterminalRef):
            name = expr.target.rpartition(".")[2]
            return any(nullable.get(a, False) for a in alts.get(name, ()))
        if isinstance(expr, Sequence):
            return all(null(e) for e in expr.elements)
        if isinstance(expr, Choice):
            return any(null(e) for e in expr.alternatives)
        if isinstance(expr, Optional):
            return True
        if isinstance(expr, Repetition):
            return expr.min == 0 or null(expr.inner)
        return False

    changed = True
    while changed:
        changed = False
        for n, (p, _) in table.items():
            if not nullable[n] and p.flavor is Flavor.NORMAL and p.rhs is not None and null(p.rhs):
                nullable[n] = changed = True

    def left_refs(expr) -> list[str]:
        if isinstance(expr, NonterminalRef):
            return [expr.target.rpartition(".")[2]]
        if isinstance(expr, Sequence):
            out = []
            for e in expr.elements:
                out += left_refs(e)
                if not null(e):
                    break
            return out
        if isinstance(expr, Choice):
            return [r for e in expr.alternatives for r in left_refs(e)]
        if isinstance(expr, (Optional, Repetition)):
            return left_refs(expr.inner)
        return []

    # left-call graph over normal productions
    graph: dict[str, list[str]] = {}
    for n, (p, _) in table.items():
        if p.flavor is Flavor.NORMAL and p.rhs is not None:
            targets = []
            for r in left_refs(p.rhs):
                for a in alts.get(r, ()):
                    if a not in targets:
                        targets.append(a)
            graph[n] = targets

    # productions reachable from start through any reference
    reach: list[str] = []
    stack = list(alts.get(start, ()))
    while stack:
        n = stack.pop()
        if n in reach:
            continue
        reach.append(n)
        for ref in iter_rhs(table[n][0].rhs):
            if isinstance(ref, NonterminalRef):
                stack.extend(alts.get(ref.target.rpartition(".")[2], ()))

    findings = []
    reported: set[frozenset] = set()
    own = {p.name for p in g.productions}
    for n in sorted(reach, key=lambda x: list(table).index(x)):
        cycle = _find_cycle(n, graph)
        if cycle and frozenset(cycle) not in reported:
            reported.add(frozenset(cycle))
            anchor = next((c for c in cycle if c in own), cycle[0])
            findings.append(error("LeftRecursion",
                                  "left-recursive cycle " + " -> ".join(cycle + [cycle[0]]),
                                  table[anchor][0].pos))
    return findings


def _find_cycle(origin: str, graph) -> list[str] | None:
    """Shortest left-call path from ``origin`` back to itself."""
    prev: dict[str, str] = {}
    queue = deque([origin])
    seen = {origin}
    while queue:
        cur = queue.popleft()
        for nxt in graph.get(cur, ()):
            if nxt == origin:
                path = [cur]
                while path[-1] != origin:
                    path.append(prev[path[-1]])
                return list(reversed(path))
            if nxt not in seen:
                seen.add(nxt)
                prev[nxt] = cur
                queue.append(nxt)
    return None
