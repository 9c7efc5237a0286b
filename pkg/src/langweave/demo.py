"""The sensor-platform example family: class diagrams with embedded queries,
component architectures with a cloud extension, and the context conditions
that tie them together.

Grammars, configurations and models live under ``fixtures/``. This module
supplies the parts that are code: entry creation rules per language, the
kind vocabularies, and the predicates behind the condition catalog.
"""

from __future__ import annotations

import shutil
from pathlib import Path
from typing import Iterator

from .composition import GrammarLoader
from .family import (ConditionContext, LanguageComponent, LanguageRegistry, Level)
from .findings import LanguageError, SourcePos
from .grammar import GrammarName
from .parser import AstNode, Token
from .symtab import (EntryCreationRule, ImportRule, Kind, NameRef, PackageRule, SymbolEntry)

FIXTURES = Path(__file__).resolve().parent / "fixtures"
GRAMMARS = FIXTURES / "grammars"
MODELS = FIXTURES / "models"
FAMILY_FILE = FIXTURES / "clarcfamily.family"
CD_MODEL = MODELS / "SensorData.cd"
ARC_MODEL = MODELS / "SensorDataSubmissionHandler.arc"

CD, HQL, EXPR = "cd.CD", "hql.HQL", "expr.Expr"
MONTIARC, CLARC = "montiarc.MontiArc", "clarc.ClArc"

CD_DIAGRAM = Kind("cd", "Diagram")
CD_TYPE = Kind("cd", "Type")
CD_METHOD = Kind("cd", "Method")
CD_ATTRIBUTE = Kind("cd", "Attribute")
HQL_TYPE = Kind("hql", "Type")
HQL_METHOD = Kind("hql", "Method")
HQL_ATTRIBUTE = Kind("hql", "Attribute")
ARC_COMPONENT = Kind("arc", "Component")
ARC_PORT = Kind("arc", "Port")
ARC_TYPE = Kind("arc", "Type")
ARC_METHOD = Kind("arc", "Method")
ARC_ATTRIBUTE = Kind("arc", "Attribute")
CLARC_SERVICE_PORT = Kind("clarc", "ServicePort")

# Port types that need no class diagram.
PRIMITIVE_TYPES = frozenset({"Boolean", "Byte", "Character", "Double", "Float", "Integer",
                             "Long", "Short", "String"})


def fixture_text(relative: str) -> str:
    return (FIXTURES / relative).read_text(encoding="utf-8")


def fixture_loader() -> GrammarLoader:
    return GrammarLoader([GRAMMARS])


def copy_fixtures(dest: Path | str) -> Path:
    """Copy the fixture tree (without generated files) to ``dest``."""
    dest = Path(dest)
    shutil.copytree(FIXTURES, dest, dirs_exist_ok=True,
                    ignore=shutil.ignore_patterns("*.sym", "*.symindex", "__pycache__"))
    return dest


# --- entry creation helpers -------------------------------------------------


def render_type(value) -> str | None:
    """Source form of a ReferenceType node, e.g. ``List<SensorValue>``."""
    if value is None:
        return None
    if isinstance(value, Token):
        return value.text
    name = value.text("Name")
    args = value.get("TypeArguments")
    if args is None:
        return name
    return f"{name}<{', '.join(render_type(a) for a in args['Args'])}>"


def _visibility(node: AstNode) -> str:
    mod = node.get("Modifier")
    return (mod.text("Visibility") if mod is not None else None) or "package"


def _type_hook(node: AstNode, entry: SymbolEntry) -> None:
    params = node.get("TypeParameters")
    entry.set_attribute("typeParameters",
                        tuple(t.text for t in params["Params"]) if params is not None else ())
    entry.set_attribute("superclass", render_type(node.get("Superclass")))
    entry.set_attribute("visibility", _visibility(node))


def _method_hook(node: AstNode, entry: SymbolEntry) -> None:
    entry.set_attribute("returnType", render_type(node.get("ReturnType")))
    entry.set_attribute("parameters", tuple(p.text("Name") for p in node.get("CDParameter", ())))
    entry.set_attribute("visibility", _visibility(node))
    body = node.get("Body")
    entry.set_attribute("bodyLanguage",
                        body.grammar.qualified if isinstance(body, AstNode) else None)


def _attribute_hook(node: AstNode, entry: SymbolEntry) -> None:
    entry.set_attribute("type", render_type(node.get("Type")))
    entry.set_attribute("visibility", _visibility(node))


_CD_MEMBERS = (
    EntryCreationRule((CD, "CDMethod"), CD_METHOD, "Name", hook=_method_hook),
    EntryCreationRule((CD, "CDAttribute"), CD_ATTRIBUTE, "Name", hook=_attribute_hook),
)


def cd_component() -> LanguageComponent:
    rules = (
        PackageRule((CD, "CDDefinition"), "Package"),
        ImportRule((CD, "CDImport"), "Target"),
        EntryCreationRule((CD, "CDDefinition"), CD_DIAGRAM, "Name"),
        EntryCreationRule((CD, "CDClass"), CD_TYPE, "Name", opens_namespace=True,
                          constants={"isInterface": False}, child_rules=_CD_MEMBERS,
                          hook=_type_hook),
        EntryCreationRule((CD, "CDInterface"), CD_TYPE, "Name", opens_namespace=True,
                          constants={"isInterface": True}, child_rules=_CD_MEMBERS,
                          hook=_type_hook),
    )
    return LanguageComponent("cd", GrammarName.parse(CD), rules,
                             exported_kinds=(CD_DIAGRAM, CD_TYPE, CD_METHOD, CD_ATTRIBUTE),
                             vocabulary=(CD_DIAGRAM, CD_TYPE, CD_METHOD, CD_ATTRIBUTE))


def hql_component() -> LanguageComponent:
    # Queries declare nothing; they only refer to types.
    return LanguageComponent("hql", GrammarName.parse(HQL),
                             vocabulary=(HQL_TYPE, HQL_METHOD, HQL_ATTRIBUTE))


def expr_component() -> LanguageComponent:
    return LanguageComponent("expr", GrammarName.parse(EXPR))


def arc_component() -> LanguageComponent:
    rules = (
        ImportRule((MONTIARC, "ArcImport"), "Target"),
        EntryCreationRule((MONTIARC, "Component"), ARC_COMPONENT, "Name", opens_namespace=True,
                          constants={"replicating": False}),
        EntryCreationRule((MONTIARC, "Subcomponent"), ARC_COMPONENT, "Name",
                          opens_namespace=True, constants={"replicating": False}),
        EntryCreationRule((MONTIARC, "ArcPort"), ARC_PORT, "Name",
                          attributes={"direction": "direction"}, references={"type": "Type"},
                          constants={"replicating": False}),
    )
    return LanguageComponent("arc", GrammarName.parse(MONTIARC), rules,
                             exported_kinds=(ARC_COMPONENT, ARC_PORT),
                             vocabulary=(ARC_COMPONENT, ARC_PORT, ARC_TYPE, ARC_METHOD,
                                         ARC_ATTRIBUTE))


def clarc_component(parent: LanguageComponent | None = None) -> LanguageComponent:
    # Replicating ports and components are still ports and components, so
    # they create entries of the parent language's kinds.
    rules = (
        EntryCreationRule((CLARC, "ClArcPort"), ARC_PORT, "Name",
                          attributes={"direction": "direction"}, references={"type": "Type"},
                          constants={"replicating": True}),
        EntryCreationRule((CLARC, "ReplicatingComponent"), ARC_COMPONENT, "Name",
                          opens_namespace=True, constants={"replicating": True}),
        EntryCreationRule((CLARC, "ServicePort"), CLARC_SERVICE_PORT, "Name",
                          references={"model": "Model"}),
    )
    return LanguageComponent("clarc", GrammarName.parse(CLARC), rules,
                             exported_kinds=(CLARC_SERVICE_PORT,),
                             vocabulary=(CLARC_SERVICE_PORT,),
                             parent=parent or arc_component())


# --- condition catalog ------------------------------------------------------

Complaints = Iterator[tuple[SourcePos, str]]


def unique_types(ctx: ConditionContext) -> Complaints:
    """CC-CD-001: a type name is declared once per namespace."""
    for unit in ctx.models:
        for ns in unit.namespace.walk():
            for (name, kind), entries in ns.table.items():
                if kind == CD_TYPE and len(entries) > 1:
                    for dup in entries[1:]:
                        yield dup.pos, f"type {name} is declared {len(entries)} times"


def connector_endpoints(ctx: ConditionContext) -> Complaints:
    """CC-ARC-001: both ends of a connector name declared ports."""
    for unit, node in ctx.nodes(MONTIARC, "Connector"):
        scope = unit.scope_of(node)
        for label in ("Source", "Target"):
            ref = node[label]
            comp, port = ref.get("Component"), ref["Port"]
            target = scope
            if comp is not None:
                target = next((c for c in scope.children if c.name == comp.text), None)
                if target is None:
                    yield comp.pos, f"connector names unknown component {comp.text}"
                    continue
            if not target.local(port.text, ARC_PORT):
                owner = comp.text if comp is not None else (scope.name or "the component")
                yield port.pos, f"{owner} declares no port {port.text}"


def entity_names(ctx: ConditionContext) -> Complaints:
    """CC-CMP-001: query entities are classes of the surrounding diagram."""
    for unit, node in ctx.nodes(HQL, "EntityRef"):
        tok = node["Entity"]
        try:
            ctx.resolve(tok.text, HQL_TYPE, unit.scope_of(node), tok.pos)
        except LanguageError as exc:
            yield tok.pos, f"entity {tok.text} is not a class of this diagram" + _hint(exc)


def port_types(ctx: ConditionContext) -> Complaints:
    """CC-FAM-001: port types are primitive or exported by a family class diagram."""
    for unit in ctx.models:
        for entry in unit.namespace.all_entries():
            ref = entry.attributes.get("type") if entry.kind == ARC_PORT else None
            if not isinstance(ref, NameRef) or ref.name in PRIMITIVE_TYPES:
                continue
            try:
                ctx.resolve(ref.name, ARC_TYPE, entry.scope, ref.pos)
            except LanguageError as exc:
                yield (ref.pos or entry.pos,
                       f"port {entry.simple_name} has unknown type {ref.name}" + _hint(exc))


def service_models(ctx: ConditionContext) -> Complaints:
    """CC-FAM-002: a service port names a class diagram of the family."""
    for unit in ctx.models:
        for entry in unit.namespace.all_entries():
            if entry.kind != CLARC_SERVICE_PORT:
                continue
            ref = entry.attributes["model"]
            try:
                ctx.resolve(ref.name, CD_DIAGRAM, entry.scope, ref.pos)
            except LanguageError as exc:
                yield (ref.pos or entry.pos,
                       f"service port {entry.simple_name} names unknown class diagram "
                       f"{ref.name}" + _hint(exc))


def _hint(exc: LanguageError) -> str:
    f = exc.finding
    if f.data.get("suggestion"):
        return f"; did you mean {f.data['suggestion']}?"
    if f.code != "NotFound":
        return f" ({f.message})"
    return ""


CATALOG = {
    "CC-CD-001": (Level.COMPONENT, "cd.uniqueTypes", unique_types, "cd"),
    "CC-ARC-001": (Level.COMPONENT, "arc.connectorEndpoints", connector_endpoints, "arc"),
    "CC-CMP-001": (Level.COMPOSITE, "cdhql.entityNames", entity_names, "hql"),
    "CC-FAM-001": (Level.FAMILY, "family.portTypes", port_types, None),
    "CC-FAM-002": (Level.FAMILY, "family.serviceModels", service_models, None),
}


def default_registry() -> LanguageRegistry:
    reg = LanguageRegistry()
    arc = reg.add_component(arc_component())
    reg.add_component(clarc_component(arc))
    reg.add_component(cd_component())
    reg.add_component(hql_component())
    reg.add_component(expr_component())
    for _level, pred_id, fn, language in CATALOG.values():
        reg.add_predicate(pred_id, fn, language)
    return reg
