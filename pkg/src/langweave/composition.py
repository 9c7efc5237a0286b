"""Language inheritance (extends-chain flattening) and language embedding
(binding external productions to guest grammars via ``.lcfg`` artifacts)."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Mapping

from ._reader import Reader
from .findings import Finding, LanguageError, SourcePos, error
from .grammar import (
    BUILTIN_TOKENS,
    Flavor,
    GrammarModel,
    GrammarName,
    ProductionRule,
    Terminal,
    concrete_alternatives,
    effective_start,
    iter_rhs,
    parse_grammar,
    validate_grammar,
)

GRAMMAR_EXT = ".mcg"
GRAMMAR_PATH_ENV = "LANGWEAVE_GRAMMAR_PATH"

GrammarLookup = Callable[[GrammarName], GrammarModel]


class GrammarLoader:
    """Finds ``<package dirs>/<SimpleName>.mcg`` under a list of root directories."""

    def __init__(self, search_path: Iterable[os.PathLike | str] = ()):
        self.search_path = [Path(p) for p in search_path]
        self._cache: dict[GrammarName, GrammarModel] = {}

    @classmethod
    def from_environment(cls, extra: Iterable[os.PathLike | str] = ()) -> GrammarLoader:
        paths = list(extra)
        env = os.environ.get(GRAMMAR_PATH_ENV)
        if env:
            paths.extend(p for p in env.split(os.pathsep) if p)
        return cls(paths)

    def locate(self, name: GrammarName) -> Path | None:
        rel = Path(*name.package, name.simple + GRAMMAR_EXT)
        for root in self.search_path:
            candidate = root / rel
            if candidate.is_file():
                return candidate
        return None

    def __call__(self, name: GrammarName) -> GrammarModel:
        if name in self._cache:
            return self._cache[name]
        path = self.locate(name)
        if path is None:
            raise LanguageError(error("MissingGrammar",
                                      f"grammar {name} not found on grammar path "
                                      f"{[str(p) for p in self.search_path]}",
                                      SourcePos(str(name))))
        g = parse_grammar(path.read_text(encoding="utf-8"), str(path))
        if g.name != name:
            raise LanguageError(error("MissingGrammar",
                                      f"{path} declares {g.name}, expected {name}",
                                      SourcePos(str(path))))
        self._cache[name] = g
        return g


# --- inheritance ------------------------------------------------------------


class ComposedGrammar:
    """One grammar with its extends chain virtually copied in.

    Productions are keyed ``<grammar qualified name>.<production>``; only the
    most-derived definition of a name survives. ``dispatch[name]`` lists the
    normal productions acceptable wherever ``name`` is referenced, in the
    order the parser tries them.
    """

    def __init__(self, root_name: GrammarName, chain: tuple[GrammarModel, ...],
                 productions: dict[str, ProductionRule], origins: dict[str, GrammarName],
                 by_name: dict[str, str], dispatch: dict[str, tuple[str, ...]],
                 tokens: dict[str, str], start: str | None):
        self.root_name = root_name
        self.chain = chain
        self.productions = productions
        self.origins = origins
        self.by_name = by_name
        self.dispatch = dispatch
        self.tokens = tokens
        self.start = start

    def __repr__(self) -> str:
        return f"ComposedGrammar({self.root_name}, {len(self.productions)} productions)"

    @property
    def unbound_externals(self) -> frozenset[str]:
        return frozenset(n for n, k in self.by_name.items()
                         if self.productions[k].flavor is Flavor.EXTERNAL)

    def rule(self, name: str) -> ProductionRule | None:
        key = self.key(name)
        return None if key is None else self.productions[key]

    def key(self, ref: str) -> str | None:
        """Production key for a simple or grammar-qualified reference."""
        if "." not in ref:
            return self.by_name.get(ref)
        gname, _, pname = ref.rpartition(".")
        key = self.by_name.get(pname)
        if key is not None and self.origins[key].qualified == gname:
            return key
        return None

    def origin(self, name: str) -> GrammarName:
        return self.origins[self.by_name[name]]

    def is_token(self, ref: str) -> bool:
        return ref in self.tokens and self.key(ref) is None

    @cached_property
    def keywords(self) -> frozenset[str]:
        """Terminal literals shaped like identifiers; tokens never match them."""
        ident = re.compile(BUILTIN_TOKENS["ID"] + r"\Z")
        return frozenset(
            e.literal for rule in self.productions.values()
            for e in iter_rhs(rule.rhs)
            if isinstance(e, Terminal) and ident.match(e.literal))

    @cached_property
    def token_regex(self) -> dict[str, re.Pattern]:
        return {name: re.compile(p) for name, p in self.tokens.items()}


def resolve_chain(g: GrammarModel, loader: GrammarLookup) -> list[GrammarModel]:
    """Parents of ``g``, nearest first."""
    parents: list[GrammarModel] = []
    seen = [g.name]
    cur = g
    while cur.extends is not None:
        if cur.extends in seen:
            cycle = " -> ".join(str(n) for n in (*seen, cur.extends))
            raise LanguageError(error("CyclicInheritance",
                                      f"cyclic grammar inheritance {cycle}", cur.extends_pos))
        try:
            parent = loader(cur.extends)
        except LanguageError as exc:
            if any(f.code == "MissingGrammar" for f in exc.findings):
                raise LanguageError(error("MissingParentGrammar",
                                          f"{cur.name} extends {cur.extends}, which cannot "
                                          "be found", cur.extends_pos)) from exc
            raise
        seen.append(parent.name)
        parents.append(parent)
        cur = parent
    return parents


def flatten_inheritance(g: GrammarModel, loader: GrammarLookup) -> ComposedGrammar:
    """Copy the extends chain of ``g`` into one production table.

    Raises :class:`LanguageError` for cyclic or unresolvable chains and for
    child definitions that override a parent token.
    """
    parents = resolve_chain(g, loader)
    chain = (g, *parents)

    findings: list[Finding] = []
    for depth, grammar in enumerate(chain):
        ancestor_tokens = {t.name for a in chain[depth + 1:] for t in a.tokens}
        ancestor_prods = {p.name for a in chain[depth + 1:] for p in a.productions}
        for p in grammar.productions:
            if p.name in ancestor_tokens:
                findings.append(error("IncompatibleOverride",
                                      f"{grammar.name}.{p.name} overrides an inherited token",
                                      p.pos))
        for t in grammar.tokens:
            if t.name in ancestor_tokens or t.name in ancestor_prods:
                findings.append(error("IncompatibleOverride",
                                      f"token {grammar.name}.{t.name} overrides an inherited "
                                      "definition", t.pos))
    if findings:
        raise LanguageError(findings)

    table: dict[str, tuple[ProductionRule, GrammarModel]] = {}
    depth_of: dict[str, int] = {}
    order_of: dict[str, int] = {}
    for depth in range(len(chain) - 1, -1, -1):
        grammar = chain[depth]
        for i, p in enumerate(grammar.productions):
            table[p.name] = (p, grammar)
            depth_of[p.name] = depth
            order_of[p.name] = i

    extenders: dict[str, list[str]] = {n: [] for n in table}
    for n, (p, _) in table.items():
        for sup in ([p.extends] if p.extends else []) + list(p.implements):
            if sup in extenders and sup != n:
                extenders[sup].append(n)

    dispatch = {}
    for n in table:
        alts = concrete_alternatives(n, table, extenders)
        alts.sort(key=lambda a: (depth_of[a], 0 if a == n else 1, order_of[a]))
        dispatch[n] = tuple(alts)

    productions = {}
    origins = {}
    by_name = {}
    for n, (p, grammar) in table.items():
        key = f"{grammar.name.qualified}.{n}"
        productions[key] = p
        origins[key] = grammar.name
        by_name[n] = key

    tokens = dict(BUILTIN_TOKENS)
    for grammar in reversed(chain):
        for t in grammar.tokens:
            tokens[t.name] = t.pattern

    return ComposedGrammar(g.name, chain, productions, origins, by_name, dispatch, tokens,
                           effective_start(g, parents))


def compose(name: GrammarName, loader: GrammarLookup) -> ComposedGrammar:
    """Load, validate and flatten ``name``; raises on any error finding."""
    g = loader(name)
    parents = resolve_chain(g, loader)
    errors = [f for grammar_chain in _chains(g, parents)
              for f in validate_grammar(*grammar_chain) if f.is_error]
    if errors:
        raise LanguageError(errors)
    return flatten_inheritance(g, loader)


def _chains(g, parents):
    chain = [g, *parents]
    for i, grammar in enumerate(chain):
        yield grammar, chain[i + 1:]


# --- embedding --------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingBinding:
    host_external: str
    guest_grammar: GrammarName
    guest_production: str
    pos: SourcePos = field(default=SourcePos("<unknown>"), compare=False, repr=False)


@dataclass(frozen=True)
class LanguageConfiguration:
    language_name: str
    file_extension: str
    host_grammar: GrammarName
    bindings: tuple[EmbeddingBinding, ...] = ()
    path: str = field(default="<string>", compare=False)

    def __post_init__(self) -> None:
        if not self.file_extension.startswith("."):
            raise ValueError(f"file extension must start with '.': {self.file_extension!r}")

    @property
    def guest_grammars(self) -> tuple[GrammarName, ...]:
        seen: list[GrammarName] = []
        for b in self.bindings:
            if b.guest_grammar not in seen:
                seen.append(b.guest_grammar)
        return tuple(seen)

    def without_bindings(self) -> LanguageConfiguration:
        return LanguageConfiguration(self.language_name, self.file_extension,
                                     self.host_grammar, (), self.path)


def parse_language_config(text: str, path: str = "<string>") -> LanguageConfiguration:
    """Parse a ``.lcfg`` artifact::

        language CDHQL {
          file-extension ".cd" ;
          grammar cd.CD ;
          embed hql.HQL.HQLBlock into Body ;
        }
    """
    r = Reader(text, path)
    r.expect("language")
    name, _ = r.ident()
    r.expect("{")
    ext = host = None
    bindings = []
    while not r.accept("}"):
        if r.at_end():
            raise r.fail("'}'")
        r.skip()
        at = r.pos
        if r.accept("file-extension"):
            ext, ext_at = r.string()
            if not re.fullmatch(r"\.[A-Za-z0-9_]+", ext):
                raise LanguageError(error("MalformedConfig", f"bad file extension {ext!r}",
                                          r.source_pos(ext_at)))
        elif r.accept("grammar"):
            raw, _ = r.qualified_name()
            host = GrammarName.parse(raw)
        elif r.accept("embed"):
            raw, raw_at = r.qualified_name()
            if raw.count(".") < 1:
                raise r.fail("<grammar>.<Production>", raw_at)
            gname, _, prod = raw.rpartition(".")
            r.expect("into")
            ext_name, _ = r.ident()
            bindings.append(EmbeddingBinding(ext_name, GrammarName.parse(gname), prod,
                                             r.source_pos(at)))
        else:
            raise r.fail("'file-extension', 'grammar' or 'embed'")
        r.expect(";")
    if not r.at_end():
        raise r.fail("end of input")
    missing = [w for w, v in (("file-extension", ext), ("grammar", host)) if v is None]
    if missing:
        raise LanguageError(error("MalformedConfig",
                                  f"language {name} lacks {', '.join(missing)}",
                                  SourcePos(path)))
    return LanguageConfiguration(name, ext, host, tuple(bindings), path)


def print_language_config(cfg: LanguageConfiguration) -> str:
    lines = [f"language {cfg.language_name} {{",
             f'  file-extension "{cfg.file_extension}" ;',
             f"  grammar {cfg.host_grammar} ;"]
    for b in cfg.bindings:
        lines.append(f"  embed {b.guest_grammar}.{b.guest_production} into {b.host_external} ;")
    lines.append("}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class BoundLanguage:
    """A host composed grammar plus the guest delegates of its externals."""

    host: ComposedGrammar
    external_delegates: Mapping[str, tuple[tuple[ComposedGrammar, str], ...]]
    unbound_externals: frozenset[str]
    guests: tuple[ComposedGrammar, ...] = ()
    config: LanguageConfiguration | None = None

    @property
    def grammars(self) -> tuple[ComposedGrammar, ...]:
        return (self.host, *self.guests)

    @property
    def tokens_per_grammar(self) -> dict[GrammarName, dict[str, str]]:
        return {cg.root_name: dict(cg.tokens) for cg in self.grammars}

    def grammar_for(self, name: GrammarName) -> ComposedGrammar | None:
        for cg in self.grammars:
            if cg.root_name == name:
                return cg
        return None


def bind_embeddings(host: ComposedGrammar, cfg: LanguageConfiguration,
                    loader: GrammarLookup,
                    composer: Callable[[GrammarName], ComposedGrammar] | None = None
                    ) -> BoundLanguage:
    """Attach the configuration's guest productions to external productions.

    Externals without bindings stay in ``unbound_externals``; reaching one
    while parsing is an error, binding it later is not required here.
    """
    cache: dict[GrammarName, ComposedGrammar] = {host.root_name: host}

    def guest(name: GrammarName) -> ComposedGrammar:
        if name not in cache:
            cache[name] = (composer or (lambda n: flatten_inheritance(loader(n), loader)))(name)
        return cache[name]

    findings: list[Finding] = []
    guests: list[ComposedGrammar] = []
    for name in cfg.guest_grammars:
        try:
            cg = guest(name)
        except LanguageError as exc:
            findings.extend(exc.findings)
            continue
        if cg is not host and cg not in guests:
            guests.append(cg)
    if findings:
        raise LanguageError(findings)

    externals = set(host.unbound_externals)
    for cg in guests:
        externals |= cg.unbound_externals

    delegates: dict[str, list[tuple[ComposedGrammar, str]]] = {}
    for b in cfg.bindings:
        if b.host_external not in externals:
            findings.append(error("UnknownExternal",
                                  f"{b.host_external} is not an external production of "
                                  f"{cfg.host_grammar} or its embedded guests", b.pos))
            continue
        cg = cache[b.guest_grammar]
        rule = cg.rule(b.guest_production)
        if rule is None or rule.flavor is Flavor.EXTERNAL:
            findings.append(error("UnknownGuestProduction",
                                  f"{b.guest_grammar} has no embeddable production "
                                  f"{b.guest_production}", b.pos))
            continue
        delegates.setdefault(b.host_external, []).append((cg, b.guest_production))
    if findings:
        raise LanguageError(findings)

    return BoundLanguage(
        host,
        {k: tuple(v) for k, v in delegates.items()},
        frozenset(externals - set(delegates)),
        tuple(guests),
        cfg,
    )


def load_language(cfg: LanguageConfiguration, loader: GrammarLookup) -> BoundLanguage:
    """Validate, flatten and bind every grammar a configuration mentions."""
    cache: dict[GrammarName, ComposedGrammar] = {}

    def composer(name: GrammarName) -> ComposedGrammar:
        if name not in cache:
            cache[name] = compose(name, loader)
        return cache[name]

    return bind_embeddings(composer(cfg.host_grammar), cfg, loader, composer)
