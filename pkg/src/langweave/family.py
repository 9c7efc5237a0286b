"""Language components, composite and modeling languages, language families,
context conditions and the family processing pipeline.

A family processes a set of model files in eight steps: parse, build
namespaces, compute shadowing, qualify, write symbol files and the family
index, then run component-level, composite-level and family-level context
conditions. Only the last step sees other models, and it sees them only
through their symbol files.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Union

from ._reader import Reader
from .composition import (BoundLanguage, GrammarLookup, LanguageConfiguration,
                          load_language, parse_language_config)
from .findings import (Finding, LanguageError, Severity, SourcePos, error, has_errors,
                       warning)
from .grammar import GrammarName
from .parser import AstNode, iter_nodes, parse_model
from .symtab import (AdapterRegistry, AdapterSpec, AnyRule, EntryCreationRule, FamilyIndex,
                     Kind, ModelRepository, NamespaceNode, SymbolEntry, build_namespaces,
                     compute_shadowing, deserialize_symbols, qualify_all, resolve,
                     serialize_symbols)

INDEX_FILE = "family.symindex"


class Level(str, enum.Enum):
    COMPONENT = "component"
    COMPOSITE = "composite"
    FAMILY = "family"


@dataclass(frozen=True)
class ContextConditionSpec:
    id: str
    level: Level
    predicate_id: str
    severity: Severity = Severity.ERROR


# --- composition hierarchy --------------------------------------------------


@dataclass(eq=False)
class LanguageComponent:
    """Symbol-table knowledge of one single language.

    ``vocabulary`` lists every kind the language talks about, including
    kinds it only resolves (never creates). A component whose grammar
    extends another language's grammar names that component as ``parent``
    and inherits its entry rules and conditions.
    """

    language_id: str
    grammar: GrammarName
    entry_rules: tuple[AnyRule, ...] = ()
    exported_kinds: tuple[Kind, ...] = ()
    vocabulary: tuple[Kind, ...] = ()
    parent: LanguageComponent | None = None
    context_conditions: list[ContextConditionSpec] = field(default_factory=list)

    def __post_init__(self) -> None:
        produced = set(self.created_kinds())
        stray = [str(k) for k in self.exported_kinds if k not in produced]
        if stray:
            raise ValueError(f"{self.language_id} exports kinds it never creates: {stray}")

    def created_kinds(self) -> Iterator[Kind]:
        def walk(rules):
            for r in rules:
                if isinstance(r, EntryCreationRule):
                    yield r.kind
                    yield from walk(r.child_rules)
        for comp in self.lineage():
            yield from walk(comp.entry_rules)

    def lineage(self) -> Iterator[LanguageComponent]:
        comp: LanguageComponent | None = self
        while comp is not None:
            yield comp
            comp = comp.parent

    def all_rules(self) -> list[AnyRule]:
        return [r for comp in self.lineage() for r in comp.entry_rules]

    def all_exported(self) -> list[Kind]:
        return list(dict.fromkeys(k for comp in self.lineage() for k in comp.exported_kinds))

    def kinds(self) -> set[Kind]:
        return {k for comp in self.lineage()
                for k in (*comp.vocabulary, *comp.exported_kinds)} | set(self.created_kinds())


@dataclass(eq=False)
class CompositeLanguageDef:
    name: str
    children: list[Union[LanguageComponent, CompositeLanguageDef]]
    adapters: list[AdapterSpec] = field(default_factory=list)
    context_conditions: list[ContextConditionSpec] = field(default_factory=list)

    def components(self) -> Iterator[LanguageComponent]:
        for c in self.children:
            if isinstance(c, CompositeLanguageDef):
                yield from c.components()
            else:
                yield from c.lineage()

    def composites(self) -> Iterator[CompositeLanguageDef]:
        yield self
        for c in self.children:
            if isinstance(c, CompositeLanguageDef):
                yield from c.composites()

    def kinds(self) -> set[Kind]:
        return {k for comp in self.components() for k in comp.kinds()}


@dataclass(eq=False)
class ModelingLanguageDef:
    name: str
    file_extension: str
    root: Union[LanguageComponent, CompositeLanguageDef]
    bound: BoundLanguage
    config: LanguageConfiguration | None = None

    def components(self) -> list[LanguageComponent]:
        if isinstance(self.root, CompositeLanguageDef):
            return list(dict.fromkeys(self.root.components()))
        return list(self.root.lineage())

    def composites(self) -> list[CompositeLanguageDef]:
        if isinstance(self.root, CompositeLanguageDef):
            return list(self.root.composites())
        return []

    def entry_rules(self) -> list[AnyRule]:
        return [r for comp in self.components() for r in comp.entry_rules]

    def exported_kinds(self) -> list[Kind]:
        return list(dict.fromkeys(k for comp in self.components() for k in comp.exported_kinds))

    def kinds(self) -> set[Kind]:
        return self.root.kinds()


@dataclass(eq=False)
class LanguageFamilyDef:
    name: str
    members: list[ModelingLanguageDef]
    adapters: list[AdapterSpec] = field(default_factory=list)
    context_conditions: list[ContextConditionSpec] = field(default_factory=list)
    registry: LanguageRegistry | None = None
    path: Path | None = None

    def member_for(self, model_path: str) -> ModelingLanguageDef | None:
        for m in self.members:
            if model_path.endswith(m.file_extension):
                return m
        return None

    def all_adapters(self) -> AdapterRegistry:
        reg = AdapterRegistry(self.adapters)
        for m in self.members:
            for comp in m.composites():
                reg = reg.merged(comp.adapters)
        return reg


# --- registry ---------------------------------------------------------------


Predicate = Callable[["ConditionContext"], Iterable[tuple[SourcePos, str]]]


class LanguageRegistry:
    """Language components by grammar, and context-condition predicates by id."""

    def __init__(self) -> None:
        self.components: dict[str, LanguageComponent] = {}
        self.predicates: dict[str, tuple[Predicate, str | None]] = {}

    def add_component(self, component: LanguageComponent) -> LanguageComponent:
        self.components[component.grammar.qualified] = component
        return component

    def component_for(self, grammar: GrammarName) -> LanguageComponent:
        found = self.components.get(grammar.qualified)
        if found is None:
            found = LanguageComponent(grammar.simple.lower(), grammar)
            self.components[grammar.qualified] = found
        return found

    def add_predicate(self, predicate_id: str, fn: Predicate,
                      language: str | None = None) -> None:
        self.predicates[predicate_id] = (fn, language)

    def predicate(self, predicate_id: str) -> Predicate:
        return self.predicates[predicate_id][0]


# --- family configuration ---------------------------------------------------


@dataclass(frozen=True)
class MemberDecl:
    name: str
    config_path: str
    pos: SourcePos


@dataclass(frozen=True)
class FamilyConfiguration:
    name: str
    members: tuple[MemberDecl, ...]
    adapters: tuple[tuple[AdapterSpec, SourcePos], ...]
    conditions: tuple[tuple[ContextConditionSpec, SourcePos], ...]


def parse_family_config(text: str, path: str = "<string>") -> FamilyConfiguration:
    r = Reader(text, path)
    members, adapters, conditions = [], [], []
    r.expect("family")
    name, _ = r.ident()
    r.expect("{")
    while not r.accept("}"):
        r.skip()
        at = r.source_pos()
        if r.accept("member"):
            member, _ = r.ident()
            r.expect("from")
            cfg_path, _ = r.string()
            members.append(MemberDecl(member, cfg_path, at))
        elif r.accept("adapter"):
            src, dst = _kind_pair(r)
            children = {}
            while r.accept("child"):
                c_src, c_dst = _kind_pair(r)
                children[c_src] = c_dst
            adapters.append((AdapterSpec(src, dst, {}, children), at))
        elif r.accept("condition"):
            cc_id = _condition_id(r)
            r.expect("level")
            level_text, level_at = r.ident()
            try:
                level = Level(level_text)
            except ValueError:
                raise r.fail("component, composite or family", level_at) from None
            r.expect("predicate")
            pred, _ = r.qualified_name()
            conditions.append((ContextConditionSpec(cc_id, level, pred), at))
        else:
            raise r.fail("'member', 'adapter', 'condition' or '}'")
        r.expect(";")
    if not r.at_end():
        raise r.fail("end of input")
    return FamilyConfiguration(name, tuple(members), tuple(adapters), tuple(conditions))


def _kind_pair(r: Reader) -> tuple[Kind, Kind]:
    src, _ = r.qualified_name()
    r.expect("->")
    dst, at = r.qualified_name()
    try:
        return Kind.parse(src), Kind.parse(dst)
    except ValueError as exc:
        raise LanguageError(error("SyntaxError", str(exc), r.source_pos(at))) from None


def _condition_id(r: Reader) -> str:
    r.skip()
    start = r.pos
    while r.pos < len(r.text) and (r.text[r.pos].isalnum() or r.text[r.pos] in "-_"):
        r.pos += 1
    if r.pos == start:
        raise r.fail("condition id")
    return r.text[start:r.pos]


def modeling_language(lcfg: LanguageConfiguration, loader: GrammarLookup,
                      registry: LanguageRegistry) -> ModelingLanguageDef:
    """Bind a language configuration and attach its registered components.

    A configuration with embeddings becomes a composite of the host and
    guest components; one without is its host component alone.
    """
    bound = load_language(lcfg, loader)
    host = registry.component_for(lcfg.host_grammar)
    if lcfg.bindings:
        guests = [registry.component_for(g) for g in lcfg.guest_grammars]
        root: Union[LanguageComponent, CompositeLanguageDef] = CompositeLanguageDef(
            lcfg.language_name, [host, *guests])
    else:
        root = host
    return ModelingLanguageDef(lcfg.language_name, lcfg.file_extension, root, bound, lcfg)


def assemble_family(cfg_text: str, loader: GrammarLookup, base_dir: os.PathLike | str = ".",
                    registry: LanguageRegistry | None = None,
                    path: str = "<string>") -> LanguageFamilyDef:
    """Link a family configuration into a :class:`LanguageFamilyDef`.

    Adapters whose two kinds both belong to one composite member are placed
    on that composite; all others are family adapters. Conditions are placed
    by their level and the language their predicate was registered for.
    Raises LanguageError carrying every problem found.
    """
    if registry is None:
        from .demo import default_registry
        registry = default_registry()
    cfg = parse_family_config(cfg_text, path)
    base = Path(base_dir)
    findings: list[Finding] = []
    members: list[ModelingLanguageDef] = []
    seen_ext: dict[str, str] = {}

    for decl in cfg.members:
        cfg_file = base / decl.config_path
        try:
            lcfg = parse_language_config(cfg_file.read_text(encoding="utf-8"), str(cfg_file))
        except OSError as exc:
            findings.append(error("MalformedConfig", f"cannot read {decl.config_path}: "
                                  f"{exc.strerror}", decl.pos))
            continue
        except LanguageError as exc:
            findings.extend(exc.findings)
            continue
        if lcfg.language_name != decl.name:
            findings.append(error("MalformedConfig", f"member {decl.name} loads language "
                                  f"{lcfg.language_name}", decl.pos))
            continue
        if lcfg.file_extension in seen_ext:
            findings.append(error("DuplicateExtension", f"{decl.name} and "
                                  f"{seen_ext[lcfg.file_extension]} both claim "
                                  f"{lcfg.file_extension}", decl.pos))
            continue
        seen_ext[lcfg.file_extension] = decl.name
        try:
            members.append(modeling_language(lcfg, loader, registry))
        except LanguageError as exc:
            findings.extend(exc.findings)

    family = LanguageFamilyDef(cfg.name, members, registry=registry,
                               path=Path(path) if path != "<string>" else None)
    pairs: set[tuple[Kind, Kind]] = set()
    for spec, at in cfg.adapters:
        if spec.pair in pairs:
            findings.append(error("DuplicateAdapter", f"adapter {spec.from_kind} -> "
                                  f"{spec.to_kind} declared twice", at))
            continue
        pairs.add(spec.pair)
        kinds = [spec.from_kind, spec.to_kind, *spec.child_kind_map.keys(),
                 *spec.child_kind_map.values()]
        known = set().union(*(m.kinds() for m in members)) if members else set()
        unknown = [str(k) for k in kinds if k not in known]
        if unknown:
            findings.append(error("UnknownKindVocabulary", f"adapter {spec.from_kind} -> "
                                  f"{spec.to_kind} uses unknown kinds {', '.join(unknown)}",
                                  at))
            continue
        home = next((c for m in members for c in m.composites()
                     if spec.from_kind in c.kinds() and spec.to_kind in c.kinds()), None)
        (home.adapters if home is not None else family.adapters).append(spec)

    for spec, at in cfg.conditions:
        if spec.predicate_id not in registry.predicates:
            findings.append(error("UnknownPredicate", f"condition {spec.id} uses unregistered "
                                  f"predicate {spec.predicate_id}", at))
            continue
        placed = _place_condition(spec, registry.predicates[spec.predicate_id][1], family)
        if not placed:
            findings.append(error("UnknownComponent", f"condition {spec.id} matches no "
                                  f"{spec.level.value} of this family", at))

    if has_errors(findings):
        raise LanguageError(findings)
    return family


def _place_condition(spec: ContextConditionSpec, language: str | None,
                     family: LanguageFamilyDef) -> bool:
    if spec.level is Level.FAMILY:
        family.context_conditions.append(spec)
        return True
    placed = False
    for m in family.members:
        if spec.level is Level.COMPONENT:
            targets = [c for c in m.components() if language in (None, c.language_id)]
        else:
            targets = [c for c in m.composites()
                       if language is None or any(x.language_id == language
                                                  for x in c.components())]
        for t in targets:
            if spec not in t.context_conditions:
                t.context_conditions.append(spec)
            placed = True
    return placed


def load_family(path: os.PathLike | str, loader: GrammarLookup,
                registry: LanguageRegistry | None = None) -> LanguageFamilyDef:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LanguageError(error("MalformedConfig", f"cannot read family: {exc.strerror}",
                                  SourcePos(str(path)))) from None
    return assemble_family(text, loader, path.parent, registry, str(path))


# --- pipeline ---------------------------------------------------------------


@dataclass
class ModelUnit:
    path: str
    model_id: str
    member: ModelingLanguageDef | None
    ast: AstNode | None = None
    namespace: NamespaceNode | None = None
    findings: list[Finding] = field(default_factory=list)
    symbol_file: str | None = None

    @property
    def parse_ok(self) -> bool:
        return self.ast is not None

    def nodes(self, grammar: str, production: str) -> Iterator[AstNode]:
        if self.ast is None:
            return
        for n in iter_nodes(self.ast):
            if n.grammar.qualified == grammar and n.production == production:
                yield n

    def scope_of(self, node: AstNode) -> NamespaceNode:
        return self.namespace.scope_of(node)


@dataclass
class ConditionContext:
    """What a predicate may see; ``repo`` is only set at family level."""

    level: Level
    models: list[ModelUnit]
    adapters: AdapterRegistry
    repo: ModelRepository | None = None

    def resolve(self, name: str, kind: Kind, start: NamespaceNode,
                pos: SourcePos | None = None) -> SymbolEntry:
        return resolve(name, kind, start, self.repo, self.adapters, pos=pos)

    def nodes(self, grammar: str, production: str) -> Iterator[tuple[ModelUnit, AstNode]]:
        for unit in self.models:
            if unit.namespace is None:
                continue
            for n in unit.nodes(grammar, production):
                yield unit, n


def run_context_condition(spec: ContextConditionSpec, predicate: Predicate,
                          ctx: ConditionContext) -> list[Finding]:
    """Run one predicate; its complaints become findings coded ``spec.id``."""
    where = SourcePos(ctx.models[0].path) if ctx.models else SourcePos("<family>")
    try:
        raw = list(predicate(ctx))
    except Exception as exc:  # a broken predicate must not stop the run
        return [error("CC-INTERNAL", f"{spec.id} ({spec.predicate_id}) raised "
                      f"{type(exc).__name__}: {exc}", where, condition=spec.id)]
    return [Finding(spec.severity, spec.id, message, pos, {"condition": spec.id})
            for pos, message in raw]


@dataclass
class ModelResult:
    path: str
    model_id: str
    language: str | None
    parse_ok: bool
    findings: list[Finding]


@dataclass
class FamilyReport:
    per_model: dict[str, ModelResult] = field(default_factory=dict)
    cross_findings: list[Finding] = field(default_factory=list)
    symbol_files_written: list[str] = field(default_factory=list)
    index_path: str | None = None
    access_log: list[tuple[str | None, str, str]] = field(default_factory=list)

    def all_findings(self) -> list[Finding]:
        out = [f for r in self.per_model.values() for f in r.findings]
        out.extend(self.cross_findings)
        return sorted(out, key=Finding.sort_key)

    @property
    def exit_status(self) -> str:
        return "Error" if has_errors(self.all_findings()) else "Ok"

    def to_json(self) -> dict:
        return {
            "models": [
                {"path": r.path, "modelId": r.model_id, "language": r.language,
                 "parseOk": r.parse_ok,
                 "findings": [f.to_json() for f in sorted(r.findings, key=Finding.sort_key)]}
                for r in self.per_model.values()
            ],
            "findings": [f.to_json() for f in self.all_findings()],
            "symbolFiles": list(self.symbol_files_written),
            "exitStatus": self.exit_status,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"


def symbol_path_for(model_path: str) -> str:
    return model_path + ".sym"


def process_family(family: LanguageFamilyDef, model_paths: Iterable[os.PathLike | str], *,
                   index_dir: os.PathLike | str | None = None) -> FamilyReport:
    """Run the eight-step pipeline; problems go into the report, never raised.

    The family index is written to ``index_dir`` (default: the directory
    of the family file, else the current directory). Models are processed
    in sorted path order so the report does not depend on argument order.
    """
    registry = family.registry or LanguageRegistry()
    index_dir = Path(index_dir if index_dir is not None else
                     (family.path.parent if family.path is not None else "."))
    report = FamilyReport()
    paths = sorted(dict.fromkeys(os.fspath(p) for p in model_paths))
    units = [_front_end(family, p) for p in paths]

    # step 5: symbol files and the family index
    index = FamilyIndex()
    for unit in units:
        if unit.namespace is None:
            continue
        data = serialize_symbols(unit.namespace, unit.model_id, unit.member.name,
                                 unit.member.exported_kinds(), unit.findings)
        sym_path = symbol_path_for(unit.path)
        _write_if_changed(Path(sym_path), data)
        unit.symbol_file = sym_path
        report.symbol_files_written.append(sym_path)
        rel = Path(os.path.relpath(sym_path, index_dir)).as_posix()
        for entry in deserialize_symbols(data, sym_path).iter_entries():
            if not index.add(entry.qualified_name, entry.kind, rel):
                unit.findings.append(warning(
                    "DuplicateExport", f"{entry.qualified_name} ({entry.kind}) is already "
                    f"exported by {index.path_for(entry.qualified_name, entry.kind)}",
                    SourcePos(unit.path)))
    index_path = index_dir / INDEX_FILE
    if units:
        _write_if_changed(index_path, index.dumps().encode("utf-8"))
    report.index_path = str(index_path)

    # steps 6 and 7: per-model conditions, no repository
    for unit in units:
        if unit.namespace is None:
            continue
        for comp in unit.member.components():
            for spec in comp.context_conditions:
                ctx = ConditionContext(Level.COMPONENT, [unit], AdapterRegistry())
                unit.findings.extend(run_context_condition(
                    spec, registry.predicate(spec.predicate_id), ctx))
        for comp in unit.member.composites():
            for spec in comp.context_conditions:
                ctx = ConditionContext(Level.COMPOSITE, [unit], AdapterRegistry(comp.adapters))
                unit.findings.extend(run_context_condition(
                    spec, registry.predicate(spec.predicate_id), ctx))

    # step 8: family conditions with cross-model resolution
    if units and family.context_conditions:
        repo = ModelRepository(index_path)
        repo.phase = Level.FAMILY.value
        ctx = ConditionContext(Level.FAMILY, [u for u in units if u.namespace is not None],
                               family.all_adapters(), repo)
        for spec in family.context_conditions:
            report.cross_findings.extend(run_context_condition(
                spec, registry.predicate(spec.predicate_id), ctx))
        report.access_log = list(repo.access_log)

    for unit in units:
        report.per_model[unit.path] = ModelResult(
            unit.path, unit.model_id, unit.member.name if unit.member else None,
            unit.parse_ok, sorted(unit.findings, key=Finding.sort_key))
    return report


def _front_end(family: LanguageFamilyDef, path: str) -> ModelUnit:
    """Steps 1 to 4 for one model."""
    unit = ModelUnit(path, os.path.basename(path), family.member_for(path))
    if unit.member is None:
        unit.findings.append(error("UnknownExtension", f"no family member handles {path}",
                                   SourcePos(path)))
        return unit
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        unit.findings.append(error("ModelUnreadable", f"cannot read model: {exc}",
                                   SourcePos(path)))
        return unit
    try:
        unit.ast = parse_model(unit.member.bound, text, path)
        root = build_namespaces(unit.ast, unit.member.entry_rules(), unit.model_id)
    except LanguageError as exc:
        unit.findings.extend(exc.findings)
        return unit
    compute_shadowing(root)
    unit.findings.extend(qualify_all(root))
    root.freeze()
    unit.namespace = root
    return unit


def _write_if_changed(path: Path, data: bytes) -> None:
    if path.is_file() and path.read_bytes() == data:
        return
    path.write_bytes(data)
