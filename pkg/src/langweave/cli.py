"""``lw``: command-line driver for grammars, models and language families.

Diagnostics go to standard error as finding lines; standard output carries
only the data a command was asked for. Exit status is 0 when no Error was
reported, 1 otherwise (2 for usage errors).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Iterable, Sequence

from .composition import GrammarLoader, parse_language_config, resolve_chain
from .family import ModelingLanguageDef, load_family, modeling_language, process_family
from .findings import Finding, LanguageError, Severity, SourcePos, error, has_errors
from .grammar import parse_grammar, validate_grammar
from .parser import AstNode, Token, ast_to_json, parse_model
from .symtab import (NamespaceNode, SymbolEntry, build_namespaces, compute_shadowing,
                     qualify_all, serialize_symbols)

ENV_GRAMMAR_PATH = "LANGWEAVE_GRAMMAR_PATH"


def _emit(findings: Iterable[Finding]) -> None:
    for f in sorted(findings, key=Finding.sort_key):
        print(f.render(), file=sys.stderr)


def _status(findings: Sequence[Finding], fail_on_warning: bool = False) -> int:
    if has_errors(findings):
        return 1
    if fail_on_warning and any(f.severity is Severity.WARNING for f in findings):
        return 1
    return 0


def _loader(args, *near: Path) -> GrammarLoader:
    """Search order: directories next to the artifact, --grammar-path, the environment."""
    dirs: list[Path] = []
    for d in near:
        dirs.extend([d, d / "grammars"])
    dirs.extend(Path(p) for p in args.grammar_path or ())
    env = os.environ.get(ENV_GRAMMAR_PATH, "")
    dirs.extend(Path(p) for p in env.split(os.pathsep) if p)
    return GrammarLoader(dirs)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise LanguageError(error("ModelUnreadable", f"cannot read {path}: {exc}",
                                  SourcePos(path))) from None


def _language(args) -> ModelingLanguageDef:
    from .demo import default_registry
    cfg_path = Path(args.language)
    lcfg = parse_language_config(_read(str(cfg_path)), str(cfg_path))
    return modeling_language(lcfg, _loader(args, cfg_path.parent), default_registry())


# --- commands ---------------------------------------------------------------


def cmd_grammar_check(args) -> int:
    findings: list[Finding] = []
    for path in args.paths:
        try:
            g = parse_grammar(_read(path), path)
        except LanguageError as exc:
            findings.extend(exc.findings)
            continue
        root = Path(path).resolve().parent
        for _ in g.name.package:
            root = root.parent
        try:
            parents = resolve_chain(g, _loader(args, root))
        except LanguageError as exc:
            findings.extend(exc.findings)
            continue
        findings.extend(validate_grammar(g, parents))
    _emit(findings)
    return _status(findings)


def cmd_parse(args) -> int:
    lang = _language(args)
    ast = parse_model(lang.bound, _read(args.model), args.model)
    if args.json:
        sys.stdout.write(ast_to_json(ast))
    return 0


def cmd_print_ast(args) -> int:
    lang = _language(args)
    ast = parse_model(lang.bound, _read(args.model), args.model)
    sys.stdout.write(format_ast(ast))
    return 0


def format_ast(node: AstNode, indent: int = 0) -> str:
    pad = "  " * indent
    lines = [f"{pad}{node.production} ({node.grammar.qualified})"]
    for label, value in node.attributes:
        items = value if isinstance(value, tuple) else (value,)
        for v in items:
            if isinstance(v, Token):
                lines.append(f"{pad}  {label} = {v.text!r}")
            elif isinstance(v, AstNode):
                lines.append(f"{pad}  {label}:")
                lines.append(format_ast(v, indent + 2).rstrip("\n"))
    return "\n".join(lines) + "\n"


def cmd_symbols(args) -> int:
    lang = _language(args)
    ast = parse_model(lang.bound, _read(args.model), args.model)
    model_id = os.path.basename(args.model)
    root = build_namespaces(ast, lang.entry_rules(), model_id)
    compute_shadowing(root)
    findings = qualify_all(root)
    if args.emit_sym:
        data = serialize_symbols(root, model_id, lang.name, lang.exported_kinds(), findings)
        Path(args.model + ".sym").write_bytes(data)
    sys.stdout.write(format_namespaces(root))
    _emit(findings)
    return _status(findings)


def format_namespaces(root: NamespaceNode) -> str:
    lines: list[str] = []

    def entry(e: SymbolEntry, depth: int) -> None:
        qname = e.qualified_name or "?"
        lines.append(f"{'  ' * depth}{e.kind} {e.simple_name} [{qname}, {e.state.name}]")
        for c in e.children:
            entry(c, depth + 1)

    def visit(ns: NamespaceNode, depth: int) -> None:
        if not ns.table and not ns.children and ns.parent is None:
            return
        label = ns.path or "<root>"
        imports = f" imports {', '.join(ns.imports)}" if ns.imports else ""
        lines.append(f"{'  ' * depth}namespace {label}{imports}")
        for e in ns.entries():
            if e.owner is None:
                entry(e, depth + 1)
        for c in ns.children:
            visit(c, depth + 1)

    visit(root, 0)
    return "\n".join(lines) + ("\n" if lines else "")


def cmd_check(args) -> int:
    family_path = Path(args.family)
    family = load_family(family_path, _loader(args, family_path.parent))
    report = process_family(family, args.models)
    findings = report.all_findings()
    if args.json:
        sys.stdout.write(report.dumps())
    _emit(findings)
    return _status(findings, args.fail_on_warning)


# --- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lw", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def with_grammar_path(p):
        p.add_argument("--grammar-path", action="append", metavar="DIR",
                       help=f"grammar search directory (repeatable; also ${ENV_GRAMMAR_PATH})")
        return p

    p = with_grammar_path(sub.add_parser("grammar-check", help="parse and validate grammars"))
    p.add_argument("paths", nargs="+", metavar="GRAMMAR")
    p.set_defaults(func=cmd_grammar_check)

    for name, func, help_text in (("parse", cmd_parse, "parse one model"),
                                  ("print-ast", cmd_print_ast, "print a model's AST"),
                                  ("symbols", cmd_symbols, "list a model's symbol table")):
        p = with_grammar_path(sub.add_parser(name, help=help_text))
        p.add_argument("model")
        p.add_argument("--language", required=True, metavar="LCFG",
                       help="language configuration (.lcfg)")
        if name == "parse":
            p.add_argument("--json", action="store_true", help="print the AST as JSON")
        if name == "symbols":
            p.add_argument("--emit-sym", action="store_true", help="write <model>.sym")
        p.set_defaults(func=func)

    p = with_grammar_path(sub.add_parser("check", help="process models of a language family"))
    p.add_argument("family")
    p.add_argument("models", nargs="*")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.add_argument("--fail-on-warning", action="store_true",
                   help="exit 1 when warnings are reported")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LanguageError as exc:
        _emit(exc.findings)
        return 1


if __name__ == "__main__":
    sys.exit(main())
