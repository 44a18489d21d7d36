"""Lexicon-based tweet sentiment with negation flipping.

The scoring follows the two-index convention: a positivity strength in
[1, 5], a negativity strength in [-5, -1], and their sum as the
per-tweet contribution. A lexicon file is a plain text asset so the
term strengths can be tuned for a domain without touching code.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from .text import porter_stem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SentimentLexicon:
    """Token strengths plus booster and negation word lists.

    Strengths live in [-5, -1] or [1, 5]; zero is not a valid strength.
    Entries are stored stemmed so they match the tokenizer output.
    Boosters are parsed for file compatibility but not applied.
    """

    strengths: dict[str, int]
    boosters: frozenset[str] = field(default_factory=frozenset)
    negations: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        for token, s in self.strengths.items():
            if not (-5 <= s <= -1 or 1 <= s <= 5):
                raise ValueError(f"strength for {token!r} out of range: {s}")


def _parse_lexicon(text: str) -> SentimentLexicon:
    strengths: dict[str, int] = {}
    boosters: set[str] = set()
    negations: set[str] = set()
    section = "strengths"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.lower() == "[boosters]":
            section = "boosters"
            continue
        if line.lower() == "[negations]":
            section = "negations"
            continue
        if section == "boosters":
            boosters.add(porter_stem(line.lower()))
            continue
        if section == "negations":
            # keep both forms so stemmed token streams still match
            negations.add(line.lower())
            negations.add(porter_stem(line.lower()))
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            parts = line.rsplit(None, 1)
        if len(parts) != 2:
            raise ValueError(f"lexicon line {lineno}: expected 'token<TAB>strength'")
        token, value = parts
        strengths[porter_stem(token.strip().lower())] = int(value)
    return SentimentLexicon(strengths, frozenset(boosters), frozenset(negations))


def load_lexicon(path: str | Path) -> SentimentLexicon:
    """Load a lexicon file; see the package data file for the format."""
    return _parse_lexicon(Path(path).read_text("utf-8"))


def default_lexicon() -> SentimentLexicon:
    text = resources.files("marketburst.data").joinpath("lexicon.txt").read_text("utf-8")
    return _parse_lexicon(text)


def score_tokens(
    tokens: Sequence[str], lexicon: SentimentLexicon
) -> tuple[int, int, int]:
    """Score a token sequence, returning (positivity, negativity, sum).

    Positivity is the maximum positive strength seen (floor 1),
    negativity the minimum negative strength (ceiling -1). A negation
    token immediately before a sentiment-bearing token flips its sign.
    The third element, positivity + negativity, is the tweet's
    contribution to event-level sentiment and lies in [-4, 4].
    """
    positivity = 1
    negativity = -1
    prev_negated = False
    for tok in tokens:
        if tok in lexicon.negations:
            prev_negated = True
            continue
        strength = lexicon.strengths.get(tok)
        if strength is not None:
            if prev_negated:
                strength = -strength
            if strength > 0:
                positivity = max(positivity, strength)
            else:
                negativity = min(negativity, strength)
        prev_negated = False
    return positivity, negativity, positivity + negativity
