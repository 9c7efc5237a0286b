"""Symbol tables: entries, namespaces, qualification, resolution, adapters
and symbol files.

Entries move monotonically through three states. An unqualified entry
knows only its simple name, a qualified one its full dotted name, and a
full one all associated information (attributes and child entries).
Namespaces form a tree per model; imports point at other namespaces by
dotted path, and local definitions hide imported ones of the same name and
kind.
"""

from __future__ import annotations

import enum
import json
import os
import threading
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Union

from .findings import Finding, LanguageError, SourcePos, error, warning
from .parser import AstNode, Token, token_text

_NOWHERE = SourcePos("<symbols>")


@dataclass(frozen=True, order=True)
class Kind:
    language: str
    name: str

    def __post_init__(self) -> None:
        for part in (self.language, self.name):
            if not part or not part.replace("_", "a").isalnum():
                raise ValueError(f"invalid kind part {part!r}")

    @classmethod
    def parse(cls, text: str) -> Kind:
        language, sep, name = text.partition(".")
        if not sep:
            raise ValueError(f"kind must look like <language>.<Kind>: {text!r}")
        return cls(language, name)

    def __str__(self) -> str:
        return f"{self.language}.{self.name}"


class EntryState(enum.IntEnum):
    UNQUALIFIED = 0
    QUALIFIED = 1
    FULL = 2


@dataclass(frozen=True)
class NameRef:
    """Attribute value naming another model element."""

    name: str
    pos: SourcePos | None = field(default=None, compare=False)


Scalar = Union[str, int, float, bool, None]


def join_name(prefix: str, name: str) -> str:
    return f"{prefix}.{name}" if prefix else name


# --- entries ----------------------------------------------------------------


class SymbolEntry:
    def __init__(self, kind: Kind, simple_name: str, *, qualified_name: str | None = None,
                 state: EntryState = EntryState.UNQUALIFIED,
                 attributes: dict[str, Any] | None = None, model_id: str = "",
                 pos: SourcePos | None = None):
        if state > EntryState.UNQUALIFIED and qualified_name is None:
            raise ValueError("qualified entries need a qualified name")
        self._kind = kind
        self._simple_name = simple_name
        self._qualified_name = qualified_name if state > EntryState.UNQUALIFIED else None
        self._state = state
        self._attributes: dict[str, Any] = dict(attributes or {})
        self._children: list[SymbolEntry] = []
        self._origin = (model_id, pos)
        self._adapters: dict[Kind, AdaptedEntry] = {}
        self.owner: SymbolEntry | None = None
        self.scope: NamespaceNode | None = None
        self.frozen = False
        self._check_name()

    def _check_name(self) -> None:
        q = self._qualified_name
        if q is not None and not (q == self._simple_name or q.endswith("." + self._simple_name)):
            raise ValueError(f"qualified name {q!r} does not end with {self._simple_name!r}")

    kind = property(lambda self: self._kind)
    simple_name = property(lambda self: self._simple_name)
    qualified_name = property(lambda self: self._qualified_name)
    state = property(lambda self: self._state)
    origin = property(lambda self: self._origin)
    adapted_from: SymbolEntry | None = None

    @property
    def attributes(self) -> Mapping[str, Any]:
        return self._attributes

    @property
    def children(self) -> list[SymbolEntry]:
        return list(self._children)

    @property
    def pos(self) -> SourcePos | None:
        return self.origin[1]

    def __repr__(self) -> str:
        return (f"<{type(self).__name__} {self.kind} {self.qualified_name or self.simple_name}"
                f" {self.state.name}>")

    def advance(self, state: EntryState, qualified_name: str | None = None) -> None:
        """Move to ``state``; moving backwards raises StateRegression."""
        if state < self._state:
            raise LanguageError(error("StateRegression",
                                      f"{self.simple_name}: cannot go from {self._state.name} "
                                      f"to {state.name}", self.pos or _NOWHERE))
        if qualified_name is not None and self._qualified_name is None:
            self._qualified_name = qualified_name
            self._check_name()
        if state > EntryState.UNQUALIFIED and self._qualified_name is None:
            raise LanguageError(error("UnresolvableName",
                                      f"{self.simple_name} needs a qualified name before "
                                      f"reaching {state.name}", self.pos or _NOWHERE))
        self._state = max(self._state, state)

    def set_attribute(self, name: str, value: Any) -> None:
        if self.frozen:
            raise LanguageError(error("FrozenEntry", f"{self.simple_name} is frozen",
                                      self.pos or _NOWHERE))
        self._attributes[name] = value

    def add_child(self, child: SymbolEntry) -> None:
        if self.frozen:
            raise LanguageError(error("FrozenEntry", f"{self.simple_name} is frozen",
                                      self.pos or _NOWHERE))
        child.owner = self
        self._children.append(child)

    def freeze(self) -> None:
        self.frozen = True
        self._attributes = _ReadOnly(self._attributes)
        for c in self._children:
            c.freeze()

    def iter_tree(self) -> Iterator[SymbolEntry]:
        yield self
        for c in self.children:
            yield from c.iter_tree()

    def to_record(self, exported: Callable[[Kind], bool] | None = None) -> dict:
        return {
            "kind": str(self.kind),
            "name": self.simple_name,
            "qualifiedName": self.qualified_name,
            "attributes": {k: _attr_to_json(self.attributes[k]) for k in sorted(self.attributes)},
            "children": [c.to_record(exported) for c in self.children
                         if exported is None or exported(c.kind)],
        }


class _ReadOnly(dict):
    def _blocked(self, *a, **k):
        raise TypeError("entry attributes are frozen")

    __setitem__ = __delitem__ = update = pop = popitem = clear = setdefault = _blocked


def _attr_to_json(value):
    if isinstance(value, NameRef):
        return {"ref": value.name}
    if isinstance(value, (list, tuple)):
        return [_attr_to_json(v) for v in value]
    if value is None or isinstance(value, (str, int, float, bool)):
        return value
    raise TypeError(f"attribute value {value!r} is not serializable")


def _attr_from_json(value):
    if isinstance(value, dict):
        if set(value) != {"ref"} or not isinstance(value["ref"], str):
            raise ValueError(f"bad attribute value {value!r}")
        return NameRef(value["ref"])
    if isinstance(value, list):
        return tuple(_attr_from_json(v) for v in value)
    return value


# --- adapters ---------------------------------------------------------------


@dataclass(frozen=True)
class AdapterSpec:
    """Presents entries of ``from_kind`` as entries of ``to_kind``.

    ``attribute_map`` maps target attribute names to adaptee attribute
    names (unlisted names pass through); ``child_kind_map`` maps the kinds
    of adaptee children to the kinds their adapters present.
    """

    from_kind: Kind
    to_kind: Kind
    attribute_map: Mapping[str, str] = field(default_factory=dict)
    child_kind_map: Mapping[Kind, Kind] = field(default_factory=dict)

    def __hash__(self) -> int:
        return hash((self.from_kind, self.to_kind))

    @property
    def pair(self) -> tuple[Kind, Kind]:
        return (self.from_kind, self.to_kind)


class AdaptedEntry(SymbolEntry):
    """Entry of another kind that delegates every read to its adaptee."""

    def __init__(self, adaptee: SymbolEntry, spec: AdapterSpec):
        self.adapted_from = adaptee
        self.spec = spec
        self._adapters = {}
        self.owner = None

    kind = property(lambda self: self.spec.to_kind)
    simple_name = property(lambda self: self.adapted_from.simple_name)
    qualified_name = property(lambda self: self.adapted_from.qualified_name)
    state = property(lambda self: self.adapted_from.state)
    origin = property(lambda self: self.adapted_from.origin)
    frozen = property(lambda self: self.adapted_from.frozen)
    scope = property(lambda self: self.adapted_from.scope)

    @property
    def attributes(self) -> Mapping[str, Any]:
        return _AttributeView(self.adapted_from, self.spec.attribute_map)

    @property
    def children(self) -> list[SymbolEntry]:
        out = []
        for child in self.adapted_from.children:
            target = self.spec.child_kind_map.get(child.kind)
            if target is None:
                if self.spec.from_kind == self.spec.to_kind:
                    out.append(child)
                    continue
                raise LanguageError(error(
                    "NoChildKindMapping",
                    f"adapter {self.spec.from_kind} -> {self.spec.to_kind} has no mapping for "
                    f"child {child.simple_name} of kind {child.kind}",
                    child.pos or _NOWHERE))
            sub = AdapterSpec(child.kind, target, {}, self.spec.child_kind_map)
            out.append(adapt_entry(child, target, sub))
        return out

    def advance(self, state: EntryState, qualified_name: str | None = None) -> None:
        self.adapted_from.advance(state, qualified_name)

    def set_attribute(self, name: str, value: Any) -> None:
        self.adapted_from.set_attribute(self.spec.attribute_map.get(name, name), value)

    def add_child(self, child: SymbolEntry) -> None:
        raise LanguageError(error("FrozenEntry", "adapters are read-only views",
                                  self.pos or _NOWHERE))

    def freeze(self) -> None:
        self.adapted_from.freeze()


class _AttributeView(Mapping):
    def __init__(self, adaptee: SymbolEntry, mapping: Mapping[str, str]):
        self._adaptee = adaptee
        self._map = mapping
        self._inverse = {v: k for k, v in mapping.items()}

    def __getitem__(self, key: str):
        return self._adaptee.attributes[self._map.get(key, key)]

    def __iter__(self):
        for k in self._adaptee.attributes:
            yield self._inverse.get(k, k)

    def __len__(self) -> int:
        return len(self._adaptee.attributes)


def adapt_entry(entry: SymbolEntry, target_kind: Kind, spec: AdapterSpec) -> SymbolEntry:
    """Wrap ``entry`` so it reads as ``target_kind``; one adapter per (entry, kind)."""
    if spec.from_kind != entry.kind or spec.to_kind != target_kind:
        raise ValueError(f"adapter {spec.from_kind}->{spec.to_kind} cannot adapt "
                         f"{entry.kind} to {target_kind}")
    cached = entry._adapters.get(target_kind)
    if cached is not None and cached.spec == spec:
        return cached
    adapted = AdaptedEntry(entry, spec)
    entry._adapters[target_kind] = adapted
    return adapted


class AdapterRegistry:
    """Adapter specs keyed by (from kind, to kind); adapters never chain."""

    def __init__(self, specs: Iterable[AdapterSpec] = ()):
        self._specs: dict[tuple[Kind, Kind], AdapterSpec] = {}
        for s in specs:
            self.add(s)

    def add(self, spec: AdapterSpec) -> None:
        if spec.pair in self._specs:
            raise LanguageError(error("DuplicateAdapter",
                                      f"adapter {spec.from_kind} -> {spec.to_kind} registered "
                                      "twice", _NOWHERE))
        self._specs[spec.pair] = spec

    def get(self, from_kind: Kind, to_kind: Kind) -> AdapterSpec | None:
        return self._specs.get((from_kind, to_kind))

    def sources(self, target: Kind) -> list[Kind]:
        return [f for (f, t) in self._specs if t == target and f != target]

    def __iter__(self):
        return iter(self._specs.values())

    def __len__(self) -> int:
        return len(self._specs)

    def merged(self, other: Iterable[AdapterSpec]) -> AdapterRegistry:
        out = AdapterRegistry(self)
        for s in other:
            if s.pair not in out._specs:
                out.add(s)
        return out


# --- namespaces -------------------------------------------------------------


Key = tuple[str, Kind]


class NamespaceNode:
    def __init__(self, name: str = "", parent: NamespaceNode | None = None,
                 model_id: str = ""):
        self.name = name
        self.parent = parent
        self.children: list[NamespaceNode] = []
        self.imports: list[str] = []
        self.table: dict[Key, list[SymbolEntry]] = {}
        self.hidden_imports: set[Key] = set()
        self.model_id = model_id if parent is None else parent.model_id
        self.frozen = False
        self._node_scopes: dict[int, tuple[AstNode, NamespaceNode]] = {}

    def __repr__(self) -> str:
        return f"<NamespaceNode {self.path or '<root>'} {len(self.table)} keys>"

    @property
    def root(self) -> NamespaceNode:
        ns = self
        while ns.parent is not None:
            ns = ns.parent
        return ns

    @property
    def path(self) -> str:
        parts = []
        ns: NamespaceNode | None = self
        while ns is not None:
            if ns.name:
                parts.append(ns.name)
            ns = ns.parent
        return ".".join(reversed(parts))

    def chain(self) -> Iterator[NamespaceNode]:
        ns: NamespaceNode | None = self
        while ns is not None:
            yield ns
            ns = ns.parent

    def _check_open(self) -> None:
        if self.frozen:
            raise LanguageError(error("FrozenEntry", f"namespace {self.path} is frozen",
                                      _NOWHERE))

    def add_child(self, name: str) -> NamespaceNode:
        self._check_open()
        child = NamespaceNode(name, self)
        self.children.append(child)
        return child

    def add_import(self, dotted: str) -> None:
        self._check_open()
        if dotted not in self.imports:
            self.imports.append(dotted)

    def define(self, entry: SymbolEntry) -> None:
        self._check_open()
        self.table.setdefault((entry.simple_name, entry.kind), []).append(entry)
        entry.scope = self

    def local(self, name: str, kind: Kind) -> list[SymbolEntry]:
        return list(self.table.get((name, kind), ()))

    def entries(self) -> Iterator[SymbolEntry]:
        for group in self.table.values():
            yield from group

    def walk(self) -> Iterator[NamespaceNode]:
        yield self
        for c in self.children:
            yield from c.walk()

    def find(self, path: str) -> NamespaceNode | None:
        for ns in self.root.walk():
            if ns.path == path:
                return ns
        return None

    def freeze(self) -> None:
        for ns in self.walk():
            ns.frozen = True
            for e in ns.entries():
                e.freeze()

    def scope_of(self, node: AstNode) -> NamespaceNode:
        """Namespace enclosing ``node`` (recorded by :func:`build_namespaces`)."""
        hit = self.root._node_scopes.get(id(node))
        return hit[1] if hit and hit[0] is node else self.root

    def all_entries(self) -> Iterator[SymbolEntry]:
        for ns in self.walk():
            for e in ns.entries():
                yield from e.iter_tree() if e.owner is None else (e,)


# --- building ---------------------------------------------------------------


ProductionKey = tuple[str, str]  # (grammar qualified name, production)


@dataclass(frozen=True)
class EntryCreationRule:
    production: ProductionKey
    kind: Kind
    name_from: str
    opens_namespace: bool = False
    attributes: Mapping[str, str] = field(default_factory=dict)
    references: Mapping[str, str] = field(default_factory=dict)
    constants: Mapping[str, Scalar] = field(default_factory=dict)
    child_rules: tuple[EntryCreationRule, ...] = ()
    hook: Callable[[AstNode, SymbolEntry], None] | None = field(default=None, compare=False)

    def matches(self, node: AstNode) -> bool:
        return (node.grammar.qualified, node.production) == self.production


@dataclass(frozen=True)
class ImportRule:
    production: ProductionKey
    target_from: str

    def matches(self, node: AstNode) -> bool:
        return (node.grammar.qualified, node.production) == self.production


@dataclass(frozen=True)
class PackageRule:
    """Names the root namespace from a (possibly absent) attribute of a node."""

    production: ProductionKey
    package_from: str

    def matches(self, node: AstNode) -> bool:
        return (node.grammar.qualified, node.production) == self.production


AnyRule = Union[EntryCreationRule, ImportRule, PackageRule]


def build_namespaces(ast: AstNode, rules: Iterable[AnyRule], model_id: str) -> NamespaceNode:
    """Create the namespace tree and entries of one model.

    Walks the AST depth-first, applying at each node the first matching
    entry rule (the enclosing entry's child rules take precedence).
    """
    rules = list(rules)
    entry_rules = [r for r in rules if isinstance(r, EntryCreationRule)]
    root = NamespaceNode("", None, model_id)
    scopes = root._node_scopes

    def visit(node: AstNode, ns: NamespaceNode, owner: SymbolEntry | None,
              child_rules: tuple[EntryCreationRule, ...]) -> None:
        for r in rules:
            if isinstance(r, PackageRule) and r.matches(node) and ns is root:
                pkg = node.text(r.package_from)
                if pkg:
                    root.name = pkg
            elif isinstance(r, ImportRule) and r.matches(node):
                target = node.text(r.target_from)
                if target:
                    ns.add_import(target)
        rule = next((r for r in (*child_rules, *entry_rules) if r.matches(node)), None)
        if rule is not None:
            entry = _create_entry(rule, node, ns, model_id)
            ns.define(entry)
            if owner is not None and rule in child_rules:
                owner.add_child(entry)
            if rule.opens_namespace:
                ns = ns.add_child(entry.simple_name)
            if rule.opens_namespace or rule.child_rules:
                owner, child_rules = entry, rule.child_rules
        scopes[id(node)] = (node, ns)
        for child in node.children():
            visit(child, ns, owner, child_rules)

    visit(ast, root, None, ())
    return root


def _create_entry(rule: EntryCreationRule, node: AstNode, ns: NamespaceNode,
                  model_id: str) -> SymbolEntry:
    value = node.get(rule.name_from)
    pos = node.span[0] if node.span else None
    if value is None or rule.name_from not in node.labels:
        raise LanguageError(error("MissingNameAttribute",
                                  f"{node.production} has no attribute {rule.name_from} to "
                                  f"name a {rule.kind} entry", pos or _NOWHERE))
    name = token_text(value)
    if isinstance(value, Token):
        pos = value.pos
    attrs: dict[str, Any] = dict(rule.constants)
    for attr, label in rule.attributes.items():
        v = node.get(label)
        if isinstance(v, tuple):
            attrs[attr] = tuple(token_text(x) for x in v)
        else:
            attrs[attr] = None if v is None else token_text(v)
    for attr, label in rule.references.items():
        v = node.get(label)
        if v is not None:
            ref_pos = v.pos if isinstance(v, Token) else (
                v.span[0] if isinstance(v, AstNode) and v.span else None)
            attrs[attr] = NameRef(token_text(v), ref_pos)
    root = ns.root
    if root.name:
        entry = SymbolEntry(rule.kind, name, qualified_name=join_name(ns.path, name),
                            state=EntryState.QUALIFIED, attributes=attrs, model_id=model_id,
                            pos=pos)
    else:
        entry = SymbolEntry(rule.kind, name, attributes=attrs, model_id=model_id, pos=pos)
    if rule.hook is not None:
        rule.hook(node, entry)
    return entry


# --- family index -----------------------------------------------------------


class FamilyIndex:
    """``"<qualifiedName>#<kind>"`` -> symbol file path relative to the index."""

    def __init__(self, entries: Mapping[str, str] | None = None):
        self.entries: dict[str, str] = dict(entries or {})

    @staticmethod
    def key(qualified_name: str, kind: Kind) -> str:
        return f"{qualified_name}#{kind}"

    def add(self, qualified_name: str, kind: Kind, path: str) -> bool:
        k = self.key(qualified_name, kind)
        if k in self.entries:
            return False
        self.entries[k] = path
        return True

    def has(self, qualified_name: str, kind: Kind) -> bool:
        return self.key(qualified_name, kind) in self.entries

    def path_for(self, qualified_name: str, kind: Kind) -> str | None:
        return self.entries.get(self.key(qualified_name, kind))

    def items(self) -> Iterator[tuple[str, Kind, str]]:
        for k, p in self.entries.items():
            qname, _, kind = k.rpartition("#")
            yield qname, Kind.parse(kind), p

    def keys_under(self, prefix: str) -> set[Key]:
        out = set()
        for qname, kind, _ in self.items():
            head, _, simple = qname.rpartition(".")
            if head == prefix:
                out.add((simple, kind))
        return out

    def simple_names(self, kinds: Iterable[Kind]) -> set[str]:
        kinds = set(kinds)
        return {q.rpartition(".")[2] for q, k, _ in self.items() if k in kinds}

    def dumps(self) -> str:
        return json.dumps(dict(sorted(self.entries.items())), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def loads(cls, text: str, path: str = "<index>") -> FamilyIndex:
        try:
            data = json.loads(text)
            if not isinstance(data, dict) or not all(
                    isinstance(k, str) and isinstance(v, str) for k, v in data.items()):
                raise ValueError("index must map strings to strings")
        except ValueError as exc:
            raise LanguageError(error("MalformedSymbolFile", f"bad family index: {exc}",
                                      SourcePos(path))) from None
        return cls(data)


class ModelRepository:
    """Loads symbol files named by a family index; records every access.

    ``access_log`` holds ``(phase, action, target)`` triples where action is
    ``"index"`` or ``"load"``; ``phase`` is whatever the caller last set.
    Loads of one file are single-flight; loaded files are shared.
    """

    def __init__(self, index_path: os.PathLike | str | None = None, *,
                 index: FamilyIndex | None = None, base_dir: os.PathLike | str | None = None):
        self.index_path = Path(index_path) if index_path is not None else None
        self.base_dir = Path(base_dir) if base_dir is not None else (
            self.index_path.parent if self.index_path is not None else Path("."))
        self._index = index
        self._files: dict[str, SymbolFile] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self.phase: str | None = None
        self.access_log: list[tuple[str | None, str, str]] = []

    @property
    def index(self) -> FamilyIndex:
        with self._guard:
            self.access_log.append((self.phase, "index", str(self.index_path or "<memory>")))
            if self._index is None:
                if self.index_path is None or not self.index_path.is_file():
                    self._index = FamilyIndex()
                else:
                    self._index = FamilyIndex.loads(
                        self.index_path.read_text(encoding="utf-8"), str(self.index_path))
            return self._index

    def load(self, rel_path: str) -> SymbolFile:
        with self._guard:
            if rel_path in self._files:
                return self._files[rel_path]
            lock = self._locks.setdefault(rel_path, threading.Lock())
        with lock:
            with self._guard:
                if rel_path in self._files:
                    return self._files[rel_path]
                self.access_log.append((self.phase, "load", rel_path))
            path = self.base_dir / rel_path
            if not path.is_file():
                raise LanguageError(error("SymbolFileMissing", f"symbol file {rel_path} not "
                                          "found", SourcePos(str(path))))
            sf = deserialize_symbols(path.read_bytes(), str(path))
            with self._guard:
                self._files[rel_path] = sf
            return sf

    def put(self, rel_path: str, symbol_file: SymbolFile) -> None:
        with self._guard:
            self._files[rel_path] = symbol_file

    def loads(self) -> list[str]:
        return [t for _, action, t in self.access_log if action == "load"]


# --- shadowing --------------------------------------------------------------


def importable_keys(ns: NamespaceNode, index: FamilyIndex | None = None) -> set[Key]:
    keys: set[Key] = set()
    for imp in ns.imports:
        target = ns.find(imp)
        if target is not None:
            keys.update(target.table)
        if index is not None:
            keys.update(index.keys_under(imp))
    return keys


def compute_shadowing(ns: NamespaceNode, index: FamilyIndex | None = None) -> NamespaceNode:
    """Mark imported (name, kind) keys hidden wherever a local entry shares them."""
    for cur in ns.walk():
        cur.hidden_imports = set(cur.table) & importable_keys(cur, index)
    return ns


# --- qualification ----------------------------------------------------------


def qualification_candidates(name: str, kinds: list[Kind], ns: NamespaceNode,
                             index: FamilyIndex | None) -> list[str]:
    if "." in name:
        return [name]
    for cur in ns.chain():
        if any((name, k) in cur.table for k in kinds):
            return [join_name(cur.path, name)]
    found: list[str] = []
    for cur in ns.chain():
        for imp in cur.imports:
            candidate = join_name(imp, name)
            target = ns.find(imp)
            local = target is not None and any((name, k) in target.table for k in kinds)
            exported = index is not None and any(index.has(candidate, k) for k in kinds)
            if (local or exported) and candidate not in found:
                found.append(candidate)
    if not found and index is not None and any(index.has(name, k) for k in kinds):
        found.append(name)
    return found


def qualify(entry: SymbolEntry, ns: NamespaceNode | None = None,
            index: FamilyIndex | None = None) -> SymbolEntry:
    """Bring ``entry`` to at least the qualified state (idempotent)."""
    if entry.state >= EntryState.QUALIFIED:
        return entry
    ns = ns or entry.scope
    if ns is None:
        raise ValueError(f"{entry!r} has no namespace to qualify in")
    candidates = qualification_candidates(entry.simple_name, [entry.kind], ns, index)
    pos = entry.pos or _NOWHERE
    if not candidates:
        raise LanguageError(error("UnresolvableName",
                                  f"{entry.simple_name} ({entry.kind}) cannot be qualified",
                                  pos))
    if len(candidates) > 1:
        raise LanguageError(error("AmbiguousName",
                                  f"{entry.simple_name} ({entry.kind}) is ambiguous: "
                                  + ", ".join(candidates), pos, candidates=candidates))
    entry.advance(EntryState.QUALIFIED, candidates[0])
    return entry


def qualify_all(root: NamespaceNode, index: FamilyIndex | None = None) -> list[Finding]:
    findings = []
    for entry in root.all_entries():
        try:
            qualify(entry, entry.scope, index)
        except LanguageError as exc:
            findings.extend(exc.findings)
    return findings


# --- resolution -------------------------------------------------------------


def resolve(name: str, kind: Kind, start: NamespaceNode, repo: ModelRepository | None = None,
            adapters: AdapterRegistry | None = None, *, pos: SourcePos | None = None
            ) -> SymbolEntry:
    """Resolve ``name`` as ``kind`` from namespace ``start``.

    Order: the namespace's own table (native kind before adaptable kinds),
    its non-hidden imports, then each parent in turn; finally the name is
    qualified against the family index and the exporting model's symbol
    file is loaded. The result is a full entry, adapted when its native kind
    differs from ``kind``. Raises NotFound, Ambiguous or SymbolFileMissing.
    """
    adapters = adapters or AdapterRegistry()
    kinds = [kind, *adapters.sources(kind)]
    where = pos or _NOWHERE

    if "." not in name:
        for ns in start.chain():
            hit = _lookup_in(ns, name, kind, kinds, adapters, where)
            if hit is not None:
                return hit
            for imp in ns.imports:
                target = ns.find(imp)
                if target is None:
                    continue
                visible = [k for k in kinds if (name, k) not in ns.hidden_imports]
                hit = _lookup_in(target, name, kind, visible, adapters, where)
                if hit is not None:
                    return hit
    else:
        prefix, _, simple = name.rpartition(".")
        target = start.find(prefix)
        if target is not None:
            hit = _lookup_in(target, simple, kind, kinds, adapters, where)
            if hit is not None:
                return hit

    if repo is None:
        raise _not_found(name, kind, kinds, start, None, where)
    index = repo.index
    hits: list[tuple[str, Kind]] = []
    for candidate in _external_candidates(name, start):
        for k in kinds:
            if index.has(candidate, k):
                hits.append((candidate, k))
                break
    qnames = list(dict.fromkeys(q for q, _ in hits))
    if not qnames:
        raise _not_found(name, kind, kinds, start, index, where)
    if len(qnames) > 1:
        raise LanguageError(error("Ambiguous", f"{name} ({kind}) is ambiguous: "
                                  + ", ".join(qnames), where, candidates=qnames))
    qname, native_kind = hits[0]
    try:
        sf = repo.load(index.path_for(qname, native_kind))
    except LanguageError as exc:
        raise LanguageError([error("SymbolFileMissing", f"{name} ({kind}): {f.message}", where)
                             if f.code == "SymbolFileMissing" else f
                             for f in exc.findings]) from None
    entry = sf.find(qname, native_kind)
    if entry is None:
        raise LanguageError(error("NotFound", f"{qname} ({native_kind}) missing from its "
                                  "symbol file", where))
    entry.advance(EntryState.FULL)
    if native_kind == kind:
        return entry
    return adapt_entry(entry, kind, adapters.get(native_kind, kind))


def _lookup_in(ns: NamespaceNode, name: str, kind: Kind, kinds: list[Kind],
               adapters: AdapterRegistry, where: SourcePos) -> SymbolEntry | None:
    if kind in kinds:
        native = ns.local(name, kind)
        if len(native) > 1:
            raise _ambiguous(name, kind, native, where)
        if native:
            return _complete(native[0])
    adapted = [(e, k) for k in kinds if k != kind for e in ns.local(name, k)]
    if len(adapted) > 1:
        raise _ambiguous(name, kind, [e for e, _ in adapted], where)
    if adapted:
        entry, k = adapted[0]
        return adapt_entry(_complete(entry), kind, adapters.get(k, kind))
    return None


def _complete(entry: SymbolEntry) -> SymbolEntry:
    if entry.state < EntryState.QUALIFIED:
        qualify(entry, entry.scope)
    entry.advance(EntryState.FULL)
    return entry


def _ambiguous(name, kind, entries, where) -> LanguageError:
    names = sorted({str(e.qualified_name or e.simple_name) + f" ({e.kind})" for e in entries})
    return LanguageError(error("Ambiguous", f"{name} ({kind}) is ambiguous: " + ", ".join(names),
                               where, candidates=names))


def _external_candidates(name: str, start: NamespaceNode) -> list[str]:
    if "." in name:
        return [name]
    out: list[str] = []
    for ns in start.chain():
        for prefix in (ns.path, *ns.imports):
            c = join_name(prefix, name)
            if c not in out:
                out.append(c)
    if name not in out:
        out.append(name)
    return out


def _not_found(name, kind, kinds, start, index, where) -> LanguageError:
    visible: set[str] = set()
    for ns in start.chain():
        visible.update(n for (n, k) in ns.table if k in kinds)
        for imp in ns.imports:
            target = ns.find(imp)
            if target is not None:
                visible.update(n for (n, k) in target.table if k in kinds)
    if index is not None:
        visible.update(index.simple_names(kinds))
    simple = name.rpartition(".")[2]
    suggestion = nearest_name(simple, visible)
    message = f"cannot resolve {name!r} as {kind}"
    if suggestion:
        message += f"; did you mean {suggestion!r}?"
    return LanguageError(error("NotFound", message, where, suggestion=suggestion))


def edit_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def nearest_name(name: str, candidates: Iterable[str], limit: int = 2) -> str | None:
    best = None
    for c in sorted(candidates):
        d = edit_distance(name, c)
        if 0 < d <= limit and (best is None or d < best[0]):
            best = (d, c)
    return best[1] if best else None


# --- symbol files -----------------------------------------------------------


@dataclass(eq=False)
class SymbolFile:
    model_id: str
    language_id: str
    root_namespace: str
    entries: list[SymbolEntry]

    def records(self) -> dict:
        return {
            "modelId": self.model_id,
            "languageId": self.language_id,
            "rootNamespace": self.root_namespace,
            "entries": [e.to_record() for e in self.entries],
        }

    def __eq__(self, other) -> bool:
        return isinstance(other, SymbolFile) and self.records() == other.records()

    def find(self, qualified_name: str, kind: Kind) -> SymbolEntry | None:
        for top in self.entries:
            for e in top.iter_tree():
                if e.qualified_name == qualified_name and e.kind == kind:
                    return e
        return None

    def iter_entries(self) -> Iterator[SymbolEntry]:
        for top in self.entries:
            yield from top.iter_tree()


def _dump(records: dict) -> bytes:
    return (json.dumps(records, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def serialize_symbols(root: NamespaceNode, model_id: str, language_id: str,
                      exported_kinds: Iterable[Kind] | None = None,
                      findings: list[Finding] | None = None) -> bytes:
    """Write the exported entries of a model in the ``.sym`` JSON layout.

    Unqualified entries are qualified first; those that cannot be are left
    out with an UnqualifiedEntrySkipped warning appended to ``findings``.
    """
    allowed = None if exported_kinds is None else set(exported_kinds)

    def exported(kind: Kind) -> bool:
        return allowed is None or kind in allowed

    records = []
    for ns in root.walk():
        for entry in ns.entries():
            if entry.owner is not None or not exported(entry.kind):
                continue
            try:
                for e in entry.iter_tree():
                    if exported(e.kind):
                        qualify(e, e.scope or ns)
            except LanguageError as exc:
                if findings is not None:
                    findings.append(warning("UnqualifiedEntrySkipped",
                                            f"{entry.simple_name} not exported: "
                                            f"{exc.finding.message}",
                                            entry.pos or _NOWHERE))
                continue
            records.append(entry.to_record(exported))
    return _dump({
        "modelId": model_id,
        "languageId": language_id,
        "rootNamespace": root.name,
        "entries": records,
    })


def serialize_symbol_file(sf: SymbolFile) -> bytes:
    return _dump(sf.records())


def deserialize_symbols(data: bytes | str, path: str = "<symbols>") -> SymbolFile:
    """Parse a ``.sym`` document; every entry comes back qualified."""
    try:
        doc = json.loads(data)
        if not isinstance(doc, dict):
            raise ValueError("top level must be an object")
        model_id = _field(doc, "modelId", str)
        language_id = _field(doc, "languageId", str)
        root_ns = _field(doc, "rootNamespace", str)
        raw = _field(doc, "entries", list)
        entries = [_entry_from_record(r, model_id) for r in raw]
    except (ValueError, TypeError, KeyError) as exc:
        raise LanguageError(error("MalformedSymbolFile", f"malformed symbol file: {exc}",
                                  SourcePos(path))) from None
    return SymbolFile(model_id, language_id, root_ns, entries)


def _field(doc: dict, key: str, typ):
    value = doc[key]
    if not isinstance(value, typ):
        raise TypeError(f"{key} must be {typ.__name__}")
    return value


def _entry_from_record(rec: dict, model_id: str) -> SymbolEntry:
    if not isinstance(rec, dict):
        raise TypeError("entry must be an object")
    qname = _field(rec, "qualifiedName", str)
    entry = SymbolEntry(Kind.parse(_field(rec, "kind", str)), _field(rec, "name", str),
                        qualified_name=qname, state=EntryState.QUALIFIED,
                        attributes={k: _attr_from_json(v)
                                    for k, v in _field(rec, "attributes", dict).items()},
                        model_id=model_id)
    for child in _field(rec, "children", list):
        entry.add_child(_entry_from_record(child, model_id))
    return entry
