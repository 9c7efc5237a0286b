"""Diagnostics shared by every stage of the workbench."""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field
from typing import Iterable


class Severity(str, enum.Enum):
    ERROR = "Error"
    WARNING = "Warning"


# code -> one-line description; every Finding code must appear here
# (context-condition ids such as CC-FAM-001 are registered dynamically).
CATALOG: dict[str, str] = {
    # grammar-core
    "SyntaxError": "input text does not conform to the expected syntax",
    "DuplicateProduction": "two productions share a name within one grammar",
    "DuplicateStart": "more than one start declaration",
    "DuplicateToken": "two token rules share a name",
    "BuiltinTokenRedefined": "grammar redefines ID, INT or STRING",
    "InvalidTokenPattern": "token pattern does not compile or matches the empty string",
    "NameClash": "production and token share a name",
    "InvalidFlavor": "production body or clauses contradict its flavor",
    "PackageMismatch": "package header disagrees with the grammar name",
    "SelfInheritance": "grammar extends itself",
    "UndefinedNonterminal": "reference to a production that is not defined",
    "UndefinedToken": "reference to a token that is not defined",
    "UndefinedStart": "start declaration names an unknown production",
    "AbstractWithoutExtender": "abstract production has no normal extender",
    "InvalidExtends": "extends target missing or of the wrong flavor",
    "InvalidImplements": "implements target missing or not an interface",
    "CyclicExtends": "production extends chain is cyclic",
    "LeftRecursion": "left-recursive cycle reachable from the start production",
    # composition
    "CyclicInheritance": "grammar extends chain is cyclic",
    "MissingParentGrammar": "extended grammar cannot be found",
    "IncompatibleOverride": "child grammar overrides a parent token rule",
    "UnknownExternal": "binding names a production that is not external",
    "UnknownGuestProduction": "binding names a guest production that does not exist",
    "MissingGrammar": "grammar cannot be found on the grammar path",
    "MalformedConfig": "configuration artifact is not well formed",
    # parser-engine
    "UnboundExternalReached": "parsing reached an external production with no binding",
    "InputNotConsumed": "start production matched but input remains",
    "InconsistentNode": "AST node attributes do not match its production",
    # symtab
    "MissingNameAttribute": "entry rule names an attribute absent on the node",
    "UnresolvableName": "no qualification candidate for a name",
    "AmbiguousName": "several qualification candidates for a name",
    "NotFound": "name does not resolve to an entry of the requested kind",
    "Ambiguous": "name resolves to several entries",
    "SymbolFileMissing": "family index points to a missing symbol file",
    "NoChildKindMapping": "adapted child has no kind mapping",
    "MalformedSymbolFile": "symbol file cannot be read",
    "UnqualifiedEntrySkipped": "entry left unqualified and not exported",
    "FrozenEntry": "attempt to modify a frozen entry or namespace",
    "StateRegression": "attempt to move an entry to an earlier state",
    "DuplicateExport": "two models export the same qualified name and kind",
    # langfamily
    "UnknownPredicate": "condition names an unregistered predicate",
    "UnknownComponent": "no language component registered for a grammar",
    "DuplicateAdapter": "two adapters share the same kind pair",
    "DuplicateExtension": "two members share a file extension",
    "UnknownKindVocabulary": "adapter kind belongs to no member language",
    "UnknownExtension": "model file extension matches no family member",
    "ModelUnreadable": "model file cannot be read",
    "CC-INTERNAL": "context-condition predicate raised an exception",
}


@dataclass(frozen=True, order=True)
class SourcePos:
    path: str
    line: int = 1
    column: int = 1

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1:
            raise ValueError(f"positions are 1-based, got {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.path}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Finding:
    severity: Severity
    code: str
    message: str
    pos: SourcePos
    data: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("finding message must not be empty")

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def render(self) -> str:
        return f"{self.pos}: {self.severity.value} [{self.code}] {self.message}"

    def to_json(self) -> dict:
        return {
            "severity": self.severity.value,
            "code": self.code,
            "message": self.message,
            "path": self.pos.path,
            "line": self.pos.line,
            "column": self.pos.column,
        }

    def sort_key(self) -> tuple:
        return (self.pos.path, self.pos.line, self.pos.column, self.code, self.message)


def error(code: str, message: str, pos: SourcePos, **data) -> Finding:
    return Finding(Severity.ERROR, code, message, pos, data)


def warning(code: str, message: str, pos: SourcePos, **data) -> Finding:
    return Finding(Severity.WARNING, code, message, pos, data)


def has_errors(findings: Iterable[Finding]) -> bool:
    return any(f.is_error for f in findings)


class LanguageError(Exception):
    """Raised when an operation cannot produce its value; carries the findings."""

    def __init__(self, findings: list[Finding] | Finding):
        if isinstance(findings, Finding):
            findings = [findings]
        self.findings = list(findings)
        super().__init__("\n".join(f.render() for f in self.findings))

    @property
    def finding(self) -> Finding:
        return self.findings[0]

    @property
    def codes(self) -> list[str]:
        return [f.code for f in self.findings]


class LineIndex:
    """Maps character offsets of one text to 1-based line/column positions."""

    def __init__(self, text: str, path: str):
        self.path = path
        self._starts = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                self._starts.append(i + 1)

    def pos(self, offset: int) -> SourcePos:
        line = bisect.bisect_right(self._starts, offset) - 1
        return SourcePos(self.path, line + 1, offset - self._starts[line] + 1)
