"""Loaders for the bundled text resources.

The human corpus is the system's entropy source: backrooms injection and
agent observations draw from it, and the default generator trains on it.
Lexicons back the sentiment gate.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources


def _read_lines(name: str) -> tuple[str, ...]:
    text = resources.files("zerebro.data").joinpath(name).read_text(encoding="utf-8")
    return tuple(line.strip() for line in text.splitlines() if line.strip())


@lru_cache(maxsize=None)
def human_corpus() -> tuple[str, ...]:
    """All bundled human-origin sentences, one per entry."""
    return _read_lines("human_corpus.txt")


@lru_cache(maxsize=None)
def positive_words() -> frozenset[str]:
    return frozenset(_read_lines("lexicon_positive.txt"))


@lru_cache(maxsize=None)
def negative_words() -> frozenset[str]:
    return frozenset(_read_lines("lexicon_negative.txt"))
