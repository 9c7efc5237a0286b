"""Random sentences of a composed grammar, for property tests.

Derivation trees are bounded in height (the root production counts as one
level). Identifiers come from a fixed pool minus reserved words, so a
sentence never uses a keyword of the languages it will be fed to.
"""

from __future__ import annotations

import math
import random
import re
from typing import Iterable

from .composition import ComposedGrammar
from .grammar import (Choice, Flavor, NonterminalRef, Optional, Repetition, Sequence,
                      Terminal, TokenRef)

IDENTIFIERS = ("a", "b", "x1", "value", "Sensor", "Temp", "reading", "Port2", "ctrl", "Q")
_CANNED = ("0", "42", '"s"', "?1", "x", "a1", "_")


class SentenceGenerator:
    def __init__(self, grammar: ComposedGrammar, *, max_depth: int = 6,
                 reserved: Iterable[str] = (), max_repeat: int = 3,
                 rng: random.Random | None = None):
        self.g = grammar
        self.max_depth = max_depth
        self.max_repeat = max_repeat
        self.rng = rng or random.Random(0)
        banned = set(reserved) | set(grammar.keywords)
        self.identifiers = [i for i in IDENTIFIERS if i not in banned]
        if not self.identifiers:
            raise ValueError("every pooled identifier is reserved")
        self._height = self._min_heights()

    def _min_heights(self) -> dict[str, float]:
        """Least derivation height of each production; inf when underivable."""
        h = {name: math.inf for name in self.g.by_name}
        changed = True
        while changed:
            changed = False
            for name in self.g.by_name:
                rule = self.g.rule(name)
                if rule.flavor is not Flavor.NORMAL:
                    continue
                new = 1 + self._need(rule.rhs, h)
                if new < h[name]:
                    h[name] = new
                    changed = True
        return h

    def _ref_height(self, target: str, h) -> float:
        if self.g.is_token(target):
            return 0
        rule = self.g.rule(target)
        return min((h[a] for a in self.g.dispatch.get(rule.name, ())), default=math.inf)

    def _need(self, e, h) -> float:
        if e is None or isinstance(e, (Terminal, TokenRef)):
            return 0
        if isinstance(e, NonterminalRef):
            return self._ref_height(e.target, h)
        if isinstance(e, Sequence):
            return max((self._need(x, h) for x in e.elements), default=0)
        if isinstance(e, Choice):
            return min(self._need(x, h) for x in e.alternatives)
        if isinstance(e, Repetition):
            return self._need(e.inner, h) if e.min > 0 else 0
        if isinstance(e, Optional):
            return 0
        raise TypeError(f"unknown rhs element {e!r}")

    def sentence(self, start: str | None = None) -> str:
        start = start or self.g.start
        out: list[str] = []
        self._ref(start, self.max_depth, out)
        return " ".join(out)

    def _ref(self, target: str, budget: int, out: list[str]) -> None:
        if self.g.is_token(target):
            out.append(self._token(target))
            return
        rule = self.g.rule(target)
        options = [a for a in self.g.dispatch.get(rule.name, ()) if self._height[a] <= budget]
        if not options:
            raise ValueError(f"{target} cannot be derived within {budget} levels")
        choice = self.rng.choice(options)
        self._expr(self.g.rule(choice).rhs, budget - 1, out)

    def _expr(self, e, budget: int, out: list[str]) -> None:
        h = self._height
        if isinstance(e, Terminal):
            out.append(e.literal)
        elif isinstance(e, TokenRef):
            out.append(self._token(e.token))
        elif isinstance(e, NonterminalRef):
            self._ref(e.target, budget, out)
        elif isinstance(e, Sequence):
            for x in e.elements:
                self._expr(x, budget, out)
        elif isinstance(e, Choice):
            fits = [x for x in e.alternatives if self._need(x, h) <= budget]
            self._expr(self.rng.choice(fits), budget, out)
        elif isinstance(e, Repetition):
            fits = self._need(e.inner, h) <= budget
            top = (self.max_repeat if e.unbounded else 1) if fits else 0
            for _ in range(self.rng.randint(e.min, max(e.min, top))):
                self._expr(e.inner, budget, out)
        elif isinstance(e, Optional):
            if self._need(e.inner, h) <= budget and self.rng.random() < 0.5:
                self._expr(e.inner, budget, out)

    def _token(self, name: str) -> str:
        if name == "ID":
            return self.rng.choice(self.identifiers)
        if name == "INT":
            return str(self.rng.randint(0, 999))
        if name == "STRING":
            return '"' + self.rng.choice(self.identifiers) + '"'
        pattern = re.compile(self.g.tokens[name])
        for candidate in (*self.identifiers, *_CANNED):
            if pattern.fullmatch(candidate) and candidate not in self.g.keywords:
                return candidate
        raise ValueError(f"no sample text for token {name}")


def random_sentences(grammar: ComposedGrammar, count: int, *, seed: int = 0,
                     max_depth: int = 6, reserved: Iterable[str] = ()) -> list[str]:
    gen = SentenceGenerator(grammar, max_depth=max_depth, reserved=reserved,
                            rng=random.Random(seed))
    return [gen.sentence() for _ in range(count)]
