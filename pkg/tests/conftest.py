from __future__ import annotations

import pytest

from langweave import demo
from langweave.composition import GrammarLoader, load_language, parse_language_config


def language(name: str, loader: GrammarLoader | None = None):
    path = demo.FIXTURES / f"{name}.lcfg"
    cfg = parse_language_config(path.read_text(encoding="utf-8"), str(path))
    return load_language(cfg, loader or demo.fixture_loader())


@pytest.fixture(scope="session")
def loader():
    return demo.fixture_loader()


@pytest.fixture(scope="session")
def montiarc():
    return language("montiarc")


@pytest.fixture(scope="session")
def clarc():
    return language("clarc")


@pytest.fixture(scope="session")
def cdhql():
    return language("cdhql")


@pytest.fixture
def workspace(tmp_path):
    """A private copy of the fixture tree, safe to edit and to write symbols into."""
    return demo.copy_fixtures(tmp_path / "fx")


def grammar_loader_from(tmp_path, files: dict[str, str]) -> GrammarLoader:
    """Write ``{"pkg/Name.mcg": text}`` under tmp_path and return a loader for it."""
    for rel, text in files.items():
        p = tmp_path / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
    return GrammarLoader([tmp_path])
