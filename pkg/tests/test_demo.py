from __future__ import annotations

import random

import pytest

from conftest import language
from langweave import demo
from langweave.composition import GrammarLoader, compose, parse_language_config
from langweave.family import Level, load_family
from langweave.grammar import GrammarName
from langweave.parser import iter_nodes, parse_model
from langweave.sentences import IDENTIFIERS, SentenceGenerator, random_sentences

# Each case exercises one grammar feature the fixture models rely on, on
# text written independently of the fixtures.


def cd_element(text: str):
    ast = parse_model(language("cdhql"), f"classdiagram D {{ {text} }}")
    element, = ast["CDElement"]
    return element


def arc_element(text: str):
    ast = parse_model(language("clarc"), f"component C {{ {text} }}")
    element, = ast["ArcElement"]
    return element


# --- class diagrams ---------------------------------------------------------


def test_package_and_imports():
    ast = parse_model(language("cdhql"), "package a.b; import x.y; classdiagram D { }")
    assert [t.text for t in ast["Package"]["Parts"]] == ["a", "b"]
    assert [t.text for t in ast["CDImport"][0]["Target"]["Parts"]] == ["x", "y"]


def test_generic_class():
    node = cd_element("class Box<T, U> { }")
    assert node.production == "CDClass"
    assert [t.text for t in node["TypeParameters"]["Params"]] == ["T", "U"]


def test_class_with_zero_members():
    node = cd_element("class Empty { }")
    assert node["CDMember"] == ()


def test_class_modifiers_and_superclass():
    node = cd_element("public class A extends Base<X> { }")
    assert node["Modifier"].text("Visibility") == "public"
    assert node["Superclass"].text("Name") == "Base"
    assert cd_element("class A { }")["Modifier"].get("Visibility") is None


def test_interface_and_association():
    assert cd_element("interface I { Integer x; }").production == "CDInterface"
    assoc = cd_element("association A -> B;")
    assert (assoc.text("Left"), assoc.text("Right")) == ("A", "B")


def test_nested_type_arguments():
    attr, = cd_element("class A { Map<String, List<B>> m; }")["CDMember"]
    t = attr["Type"]
    assert demo.render_type(t) == "Map<String, List<B>>"


def test_method_parameters_with_and_without_types():
    m, = cd_element("class A { R f(k, Integer n) { } }")["CDMember"]
    params = m["CDParameter"]
    assert [p.text("Name") for p in params] == ["k", "n"]
    assert params[0].get("Type") is None and params[1]["Type"].text("Name") == "Integer"


def test_hql_statements():
    m, = cd_element('class A { R f() { delete from A where a.b <> "x" and c >= 3 '
                    'select a from A } }')["CDMember"]
    stmts = m["Body"]["HQLStatement"]
    assert [s.production for s in stmts] == ["DeleteStatement", "SelectStatement"]
    where = stmts[0]["WhereClause"]
    assert [c.text("Operator") for c in where["Condition"]] == ["<>", ">="]
    assert where["Condition"][0]["Right"].text("Text") == '"x"'
    assert where["Condition"][1]["Right"].text("Number") == "3"


def test_placeholder_body():
    m, = cd_element("class A { R f() { return 1; return x; } }")["CDMember"]
    body = m["Body"]
    assert (body.production, body.grammar.qualified) == ("PlaceholderExpr", "expr.Expr")
    values = [r["Value"] for r in body["ReturnStatement"]]
    assert [(v.text("Number"), v.text("Name")) for v in values] == [("1", None), (None, "x")]


# --- architectures ----------------------------------------------------------


def test_component_with_no_ports():
    ast = parse_model(language("montiarc"), "component Lonely { }")
    assert ast.text("Name") == "Lonely" and ast["ArcElement"] == ()


def test_arc_imports():
    ast = parse_model(language("montiarc"), "import a.b; import c; component X { }")
    assert [[t.text for t in i["Target"]["Parts"]] for i in ast["ArcImport"]] == [
        ["a", "b"], ["c"]]


@pytest.mark.parametrize("text, production", [
    ("port out Boolean ok;", "ArcPort"),
    ("port in T[*] many;", "ClArcPort"),
    ("service port Model s;", "ServicePort"),
    ("component Inner { port in T p; }", "Subcomponent"),
    ("replicating component R { }", "ReplicatingComponent"),
    ("connect a -> b;", "Connector"),
])
def test_architecture_elements(text, production):
    assert arc_element(text).production == production


def test_connector_endpoints():
    node = arc_element("connect A.result -> input;")
    src, dst = node["Source"], node["Target"]
    assert (src.text("Component"), src.text("Port")) == ("A", "result")
    assert (dst.get("Component"), dst.text("Port")) == (None, "input")


def test_service_port_attributes():
    node = arc_element("service port Data store;")
    assert (node.text("Model"), node.text("Name")) == ("Data", "store")


def test_nested_subcomponents():
    node = arc_element("component A { component B { replicating component C { } } }")
    inner = node["ArcElement"][0]["ArcElement"][0]
    assert inner.production == "ReplicatingComponent"


# --- fixtures ---------------------------------------------------------------


def test_fixture_grammars_compose_and_validate():
    loader = demo.fixture_loader()
    for name in ("cd.CD", "hql.HQL", "expr.Expr", "montiarc.MontiArc", "clarc.ClArc"):
        cg = compose(GrammarName.parse(name), loader)
        assert cg.root_name.qualified == name


def test_fixture_configs_parse():
    for name in ("cdhql", "clarc", "montiarc"):
        cfg = parse_language_config((demo.FIXTURES / f"{name}.lcfg").read_text())
        assert cfg.language_name == name


def test_fixture_models_parse_cleanly():
    parse_model(language("cdhql"), demo.CD_MODEL.read_text(encoding="utf-8"))
    parse_model(language("clarc"), demo.ARC_MODEL.read_text(encoding="utf-8"))


def test_fixture_model_content():
    cd = parse_model(language("cdhql"), demo.CD_MODEL.read_text(encoding="utf-8"))
    classes = [e.text("Name") for e in cd["CDElement"] if e.production == "CDClass"]
    assert classes[:2] == ["SensorDataMessage", "SensorValue"]
    arc = parse_model(language("clarc"), demo.ARC_MODEL.read_text(encoding="utf-8"))
    subs = {n.text("Name"): n.production for n in iter_nodes(arc)
            if n.production in {"Subcomponent", "ReplicatingComponent"}}
    assert subs == {"MessageDecoder": "Subcomponent", "DataStore": "Subcomponent",
                    "EventBroadcaster": "Subcomponent",
                    "PatternMatcher": "ReplicatingComponent"}
    services = [n.text("Model") for n in iter_nodes(arc) if n.production == "ServicePort"]
    assert services == ["SensorData", "SensorData"]


def test_copy_fixtures_skips_generated_files(tmp_path):
    dest = demo.copy_fixtures(tmp_path / "copy")
    assert (dest / "clarcfamily.family").is_file()
    assert not list(dest.rglob("*.sym")) and not list(dest.rglob("*.symindex"))


def test_catalog_levels_match_family_file():
    fam = load_family(demo.FAMILY_FILE, demo.fixture_loader())
    declared = {c.id: c.level for c in fam.context_conditions}
    for m in fam.members:
        for holder in (*m.components(), *m.composites()):
            declared.update({c.id: c.level for c in holder.context_conditions})
    assert declared == {cc: level for cc, (level, *_rest) in demo.CATALOG.items()}
    assert declared["CC-CMP-001"] is Level.COMPOSITE


def test_default_registry_has_every_predicate():
    reg = demo.default_registry()
    assert {pid for _, pid, _, _ in demo.CATALOG.values()} <= set(reg.predicates)
    assert reg.component_for(GrammarName.parse("clarc.ClArc")).parent.language_id == "arc"


@pytest.mark.parametrize("text, expected", [(None, None), ("Integer", "Integer")])
def test_render_type_edge_cases(text, expected):
    if text is None:
        assert demo.render_type(None) is None
    else:
        attr, = cd_element(f"class A {{ {text} x; }}")["CDMember"]
        assert demo.render_type(attr["Type"]) == expected


# --- sentence generator -----------------------------------------------------


def test_sentences_are_reproducible():
    g = language("montiarc").host
    assert random_sentences(g, 5, seed=3) == random_sentences(g, 5, seed=3)
    assert random_sentences(g, 5, seed=3) != random_sentences(g, 5, seed=4)


def test_sentences_parse_under_their_own_grammar():
    lang = language("cdhql")
    gen = SentenceGenerator(lang.host, max_depth=6, rng=random.Random(1))
    for _ in range(20):
        text = gen.sentence()
        # cd method bodies are external, so only body-free diagrams parse unbound
        if "(" not in text:
            parse_model(lang, text)


def test_sentences_avoid_reserved_words():
    g = language("montiarc").host
    reserved = {"Sensor", "Temp"}
    for text in random_sentences(g, 30, seed=5, reserved=reserved):
        assert not reserved & set(text.split())


def test_sentence_depth_bound(tmp_path):
    (tmp_path / "d").mkdir()
    (tmp_path / "d" / "N.mcg").write_text('grammar d.N { A = "(" A ")" | "x" ; }')
    g = compose(GrammarName.parse("d.N"), GrammarLoader([tmp_path]))
    for text in random_sentences(g, 50, seed=2, max_depth=4):
        assert text.count("(") <= 3


def test_generator_rejects_impossible_budgets(tmp_path):
    (tmp_path / "d").mkdir()
    (tmp_path / "d" / "Deep.mcg").write_text('grammar d.Deep { A = B ; B = C ; C = "c" ; }')
    g = compose(GrammarName.parse("d.Deep"), GrammarLoader([tmp_path]))
    with pytest.raises(ValueError):
        SentenceGenerator(g, max_depth=2).sentence()
    assert SentenceGenerator(g, max_depth=3).sentence() == "c"
    with pytest.raises(ValueError):
        SentenceGenerator(g, reserved=IDENTIFIERS)
