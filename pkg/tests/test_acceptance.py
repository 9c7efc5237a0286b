"""Acceptance criteria, one test per criterion.

Every test prints a single ``[PASS]`` or ``[FAIL]`` line (visible even when
pytest captures output) and then asserts. Tolerances are pinned below.
"""

from __future__ import annotations

import itertools
import random
import time
from pathlib import Path

import pytest

from conftest import language
from langweave import demo, symtab
from langweave.cli import main
from langweave.composition import load_language, parse_language_config
from langweave.family import Level, load_family, process_family
from langweave.findings import LanguageError
from langweave.grammar import parse_grammar, print_grammar
from langweave.parser import iter_nodes, parse_model, pretty_print
from langweave.sentences import random_sentences
from langweave.symtab import (AdapterRegistry, EntryState, Kind, SymbolEntry, adapt_entry,
                              build_namespaces, compute_shadowing, deserialize_symbols,
                              qualify, qualify_all, resolve, serialize_symbol_file,
                              serialize_symbols)
from test_symtab import random_tree, shadowing_oracle, tree_depth

# pinned tolerances
INHERITANCE_SECONDS = 1.0
SUBSTITUTABILITY_SECONDS = 10.0
SUBSTITUTABILITY_SENTENCES = 100
SUBSTITUTABILITY_DEPTH = 6
EMBEDDING_SECONDS = 1.0
AGGREGATION_SECONDS = 2.0
ADAPTER_ENTRIES = 50
SHADOWING_TREES = 200
SHADOWING_MAX_LEVELS = 4
SHADOWING_MAX_ENTRIES = 8
SHADOWING_MAX_IMPORTS = 3
SEED = 20240601

CD_TYPE, HQL_TYPE = Kind("cd", "Type"), Kind("hql", "Type")


@pytest.fixture
def verdict(capsys):
    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})")
        assert ok, detail
    return emit


def fixture_paths(ws: Path) -> tuple[Path, Path, Path]:
    return (ws / "clarcfamily.family", ws / "models" / "SensorData.cd",
            ws / "models" / "SensorDataSubmissionHandler.arc")


def lw_check(capsys, *argv) -> tuple[int, str]:
    capsys.readouterr()
    code = main(["check", *map(str, argv)])
    return code, capsys.readouterr().err


def test_criterion_01_inheritance(verdict):
    t0 = time.perf_counter()
    montiarc, clarc = language("montiarc"), language("clarc")
    plain, replicating = "port in Integer wattage;", "port in String[*] signals;"
    problems = []
    for lang in (montiarc, clarc):
        if parse_model(lang, plain, start="ArcPort").production != "ArcPort":
            problems.append("plain port misparsed")
    if parse_model(clarc, replicating, start="ArcPort").production != "ClArcPort":
        problems.append("replicating port not a ClArcPort")
    try:
        parse_model(montiarc, replicating, start="ArcPort")
        problems.append("parent grammar accepted [*]")
    except LanguageError as exc:
        f = exc.finding
        if (f.code, f.pos.line, f.pos.column) != ("SyntaxError", 1, replicating.index("[") + 1):
            problems.append(f"wrong rejection {f.render()}")
    elapsed = time.perf_counter() - t0
    if elapsed >= INHERITANCE_SECONDS:
        problems.append(f"too slow: {elapsed:.3f}s")
    verdict(1, "inheritance", not problems,
            "; ".join(problems) or f"{elapsed:.3f}s < {INHERITANCE_SECONDS}s")


def test_criterion_02_substitutability(verdict):
    t0 = time.perf_counter()
    montiarc, clarc = language("montiarc"), language("clarc")
    # parent sentences must avoid words the child reserves as keywords
    sentences = random_sentences(montiarc.host, SUBSTITUTABILITY_SENTENCES, seed=SEED,
                                 max_depth=SUBSTITUTABILITY_DEPTH,
                                 reserved=clarc.host.keywords)
    failures = 0
    for text in sentences:
        try:
            ast = parse_model(clarc, text)
        except LanguageError:
            failures += 1
            continue
        if {n.grammar.qualified for n in iter_nodes(ast)} != {"montiarc.MontiArc"}:
            failures += 1
    elapsed = time.perf_counter() - t0
    ok = (failures == 0 and len(sentences) == SUBSTITUTABILITY_SENTENCES
          and elapsed < SUBSTITUTABILITY_SECONDS)
    verdict(2, "substitutability", ok,
            f"{failures} failures in {len(sentences)} sentences, {elapsed:.3f}s")


def test_criterion_03_embedding(verdict):
    t0 = time.perf_counter()
    problems = []
    text = demo.CD_MODEL.read_text(encoding="utf-8")
    ast = parse_model(language("cdhql"), text, str(demo.CD_MODEL))
    bodies = [n["Body"] for n in iter_nodes(ast) if n.production == "CDMethod"]
    if not any(b.production == "HQLBlock" and b.grammar.qualified == "hql.HQL"
               for b in bodies):
        problems.append("no HQLBlock body from hql.HQL")
    cfg_path = demo.FIXTURES / "cdhql.lcfg"
    cfg = parse_language_config(cfg_path.read_text(encoding="utf-8"), str(cfg_path))
    bare = load_language(cfg.without_bindings(), demo.fixture_loader())
    try:
        parse_model(bare, text, str(demo.CD_MODEL))
        problems.append("parsed without the embedding")
    except LanguageError as exc:
        f = exc.finding
        if f.code != "UnboundExternalReached" or f.data.get("external") != "Body":
            problems.append(f"wrong failure {f.render()}")
    elapsed = time.perf_counter() - t0
    if elapsed >= EMBEDDING_SECONDS:
        problems.append(f"too slow: {elapsed:.3f}s")
    verdict(3, "embedding", not problems,
            "; ".join(problems) or f"{elapsed:.3f}s < {EMBEDDING_SECONDS}s")


def test_criterion_04_aggregation(verdict, capsys, workspace):
    family, cd, arc = fixture_paths(workspace)
    problems = []
    t0 = time.perf_counter()
    code, err = lw_check(capsys, family, cd, arc)
    clean = time.perf_counter() - t0
    if code != 0 or "Error" in err:
        problems.append(f"clean run: exit {code}, {err.strip()!r}")
    source = arc.read_text(encoding="utf-8")
    typo_line = source.splitlines().index("    port in SensorValue values;") + 1
    arc.write_text(source.replace("port in SensorValue values;",
                                  "port in SensorValu values;"), encoding="utf-8")
    t0 = time.perf_counter()
    code, err = lw_check(capsys, family, cd, arc)
    broken = time.perf_counter() - t0
    lines = err.splitlines()
    expected_prefix = f"{arc}:{typo_line}:13: Error [CC-FAM-001] "
    if code != 1 or len(lines) != 1 or not lines[0].startswith(expected_prefix) \
            or "SensorValue" not in lines[0].removeprefix(expected_prefix):
        problems.append(f"typo run: exit {code}, {lines!r}")
    if max(clean, broken) >= AGGREGATION_SECONDS:
        problems.append(f"too slow: {clean:.3f}s / {broken:.3f}s")
    verdict(4, "aggregation", not problems,
            "; ".join(problems) or f"{clean:.3f}s and {broken:.3f}s < {AGGREGATION_SECONDS}s")


def test_criterion_05_adapter_delegation(verdict):
    fam = load_family(demo.FAMILY_FILE, demo.fixture_loader())
    spec = fam.all_adapters().get(CD_TYPE, HQL_TYPE)
    rng = random.Random(SEED)
    mismatches = 0
    for i in range(ADAPTER_ENTRIES):
        attrs = {f"a{j}": rng.choice([rng.randint(-9, 9), rng.random() < 0.5,
                                      f"s{rng.randint(0, 99)}", None,
                                      symtab.NameRef(f"T{rng.randint(0, 9)}")])
                 for j in range(rng.randint(0, 6))}
        name = f"T{i}"
        entry = SymbolEntry(CD_TYPE, name, qualified_name=f"p{rng.randint(0, 3)}.{name}",
                            state=EntryState.QUALIFIED, attributes=attrs)
        adapted = adapt_entry(entry, HQL_TYPE, spec)

        def same() -> bool:
            reads = {k: adapted.attributes[k] for k in adapted.attributes}
            return (reads == dict(entry.attributes)
                    and adapted.qualified_name == entry.qualified_name)

        mismatches += not same()
        for _ in range(rng.randint(1, 4)):
            entry.set_attribute(f"a{rng.randint(0, 8)}", rng.randint(0, 99))
        mismatches += not same()
        entry.freeze()
        mismatches += not same()
    verdict(5, "adapter delegation", mismatches == 0,
            f"{mismatches} mismatches over {ADAPTER_ENTRIES} entries")


def _state_ops():
    def advance(target):
        return lambda e, ns: e.advance(target)
    return {
        "qualify": lambda e, ns: qualify(e),
        "resolve": lambda e, ns: resolve(e.simple_name, e.kind, e.scope or ns),
        "toUnqualified": advance(EntryState.UNQUALIFIED),
        "toQualified": advance(EntryState.QUALIFIED),
        "toFull": advance(EntryState.FULL),
        "serialize": lambda e, ns: serialize_symbols(ns.root, "m", "l"),
        "shadow": lambda e, ns: compute_shadowing(ns.root),
    }


def test_criterion_06_state_machine(verdict):
    asts = [
        (parse_model(language("cdhql"), demo.CD_MODEL.read_text(encoding="utf-8")),
         demo.cd_component().all_rules()),
        (parse_model(language("clarc"), demo.ARC_MODEL.read_text(encoding="utf-8")),
         demo.clarc_component().all_rules()),
        (parse_model(language("montiarc"), "component A { port in T p; }"),
         demo.arc_component().all_rules()),
    ]
    ops = _state_ops()
    backward = idempotence = checked = 0
    for ast, rules in asts:
        for seq in itertools.product(ops, repeat=3):
            root = build_namespaces(ast, rules, "m")
            entries = list(root.all_entries())
            for op in seq:
                for e in entries:
                    before = e.state
                    try:
                        ops[op](e, root)
                    except LanguageError:
                        pass
                    checked += 1
                    backward += e.state < before
            for e in entries:
                if e.state >= EntryState.QUALIFIED:
                    snapshot = (e.state, e.qualified_name)
                    qualify(e)
                    idempotence += (e.state, e.qualified_name) != snapshot
    ok = backward == 0 and idempotence == 0
    verdict(6, "symbol-state machine", ok,
            f"{backward} backward transitions, {idempotence} idempotence breaks, "
            f"{checked} transitions checked")


def test_criterion_07_shadowing_oracle(verdict):
    rng = random.Random(SEED)
    mismatches = out_of_bounds = 0
    for _ in range(SHADOWING_TREES):
        root = random_tree(rng)
        sizes = (tree_depth(root), sum(len(v) for ns in root.walk() for v in ns.table.values()),
                 sum(len(ns.imports) for ns in root.walk()))
        out_of_bounds += not (sizes[0] <= SHADOWING_MAX_LEVELS
                              and sizes[1] <= SHADOWING_MAX_ENTRIES
                              and sizes[2] <= SHADOWING_MAX_IMPORTS)
        compute_shadowing(root)
        mismatches += {ns.path: ns.hidden_imports for ns in root.walk()} != \
            shadowing_oracle(root)
    verdict(7, "shadowing oracle", mismatches == 0 and out_of_bounds == 0,
            f"{mismatches} mismatches, {out_of_bounds} trees out of bounds, "
            f"{SHADOWING_TREES} trees")


def _strip_spans(doc):
    if isinstance(doc, dict):
        return {k: _strip_spans(v) for k, v in doc.items() if k not in {"span", "line", "column"}}
    if isinstance(doc, list):
        return [_strip_spans(v) for v in doc]
    return doc


def test_criterion_08_round_trips(verdict):
    failures = []
    grammars = sorted(demo.GRAMMARS.glob("*/*.mcg"))
    for path in grammars:
        g = parse_grammar(path.read_text(encoding="utf-8"), str(path))
        if parse_grammar(print_grammar(g), str(path)) != g:
            failures.append(f"grammar {path.name}")
    models = [("cdhql", demo.CD_MODEL, demo.cd_component()),
              ("clarc", demo.ARC_MODEL, demo.clarc_component())]
    for lang_name, path, component in models:
        lang = language(lang_name)
        ast = parse_model(lang, path.read_text(encoding="utf-8"), str(path))
        again = parse_model(lang, pretty_print(ast, lang))
        if _strip_spans(again.to_json()) != _strip_spans(ast.to_json()):
            failures.append(f"model {path.name}")
        root = build_namespaces(ast, component.all_rules(), path.name)
        qualify_all(root)
        data = serialize_symbols(root, path.name, lang_name, component.all_exported())
        if serialize_symbol_file(deserialize_symbols(data)) != data:
            failures.append(f"symbols {path.name}")
    verdict(8, "round-trips", not failures,
            ", ".join(failures) or f"{len(grammars)} grammars, {len(models)} models, "
            f"{len(models)} symbol files")


def test_criterion_09_idempotence_and_order(verdict, capsys, workspace):
    family, cd, arc = fixture_paths(workspace)
    arc.write_text(arc.read_text(encoding="utf-8").replace(
        "port in SensorValue values;", "port in SensorValu values;"), encoding="utf-8")
    generated = [cd.with_name(cd.name + ".sym"), arc.with_name(arc.name + ".sym"),
                 workspace / "family.symindex"]
    _, first_err = lw_check(capsys, family, cd, arc)
    first = [p.read_bytes() for p in generated]
    _, second_err = lw_check(capsys, family, cd, arc)
    second = [p.read_bytes() for p in generated]
    _, permuted_err = lw_check(capsys, family, arc, cd)
    problems = []
    if first != second:
        problems.append("symbol files differ between runs")
    if set(first_err.splitlines()) != set(second_err.splitlines()):
        problems.append("findings differ between runs")
    if set(first_err.splitlines()) != set(permuted_err.splitlines()):
        problems.append("findings depend on argument order")
    if not first_err:
        problems.append("expected the injected finding")
    verdict(9, "idempotence and order independence", not problems,
            "; ".join(problems) or f"{len(generated)} files identical, "
            f"{len(first_err.splitlines())} finding(s) stable")


def test_criterion_10_level_isolation(verdict, workspace, monkeypatch):
    family, cd, arc = fixture_paths(workspace)
    current: dict = {"level": None, "model": None}
    touches: list[tuple] = []
    real_load = symtab.ModelRepository.load
    real_index = symtab.ModelRepository.index.fget

    def load(self, rel):
        touches.append((current["level"], current["model"], "load", rel))
        return real_load(self, rel)

    def index(self):
        touches.append((current["level"], current["model"], "index", ""))
        return real_index(self)

    monkeypatch.setattr(symtab.ModelRepository, "load", load)
    monkeypatch.setattr(symtab.ModelRepository, "index", property(index))
    registry = demo.default_registry()
    for pred_id, (fn, lang) in list(registry.predicates.items()):
        def spy(ctx, fn=fn):
            current["level"] = ctx.level
            current["model"] = ctx.models[0].model_id if len(ctx.models) == 1 else None
            try:
                yield from fn(ctx)
            finally:
                current["level"] = current["model"] = None
        registry.add_predicate(pred_id, spy, lang)
    report = process_family(load_family(family, demo.fixture_loader(), registry), [cd, arc])
    component_loads = [t for t in touches if t[0] is Level.COMPONENT and t[2] == "load"]
    composite_foreign = [t for t in touches if t[0] is Level.COMPOSITE and t[2] == "load"
                         and not t[3].endswith(f"{t[1]}.sym")]
    index_outside_family = [t for t in touches if t[2] == "index" and t[0] is not Level.FAMILY]
    family_touches = [t for t in touches if t[0] is Level.FAMILY]
    ok = (not component_loads and not composite_foreign and not index_outside_family
          and bool(family_touches) and report.all_findings() == [])
    verdict(10, "level isolation", ok,
            f"component loads {len(component_loads)}, composite foreign loads "
            f"{len(composite_foreign)}, index reads outside family "
            f"{len(index_outside_family)}, family accesses {len(family_touches)}")
