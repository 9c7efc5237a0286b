"""Composable textual languages: grammar inheritance, embedding and
aggregation through linked symbol tables."""

from .composition import (BoundLanguage, ComposedGrammar, GrammarLoader, LanguageConfiguration,
                          bind_embeddings, compose, flatten_inheritance, load_language,
                          parse_language_config)
from .family import (LanguageFamilyDef, assemble_family, load_family, process_family,
                     run_context_condition)
from .findings import Finding, LanguageError, Severity, SourcePos
from .grammar import GrammarModel, GrammarName, parse_grammar, print_grammar, validate_grammar
from .parser import AstNode, Token, parse_model, pretty_print, walk
from .symtab import (AdapterSpec, EntryState, Kind, NamespaceNode, SymbolEntry, adapt_entry,
                     build_namespaces, compute_shadowing, deserialize_symbols, qualify, resolve,
                     serialize_symbols)

__version__ = "0.1.0"
