"""Text normalization: tokenizing, stemming, stop-word handling, keyword extraction.

Tokens flow through one canonical path: lowercase, strip URLs and
@-mentions, split on non-alphanumerics, drop stop words, Porter-stem,
drop stems that are themselves stop words. Keyword extraction (RAKE)
works on the raw document text and uses the same stop-word list as
phrase delimiters.
"""

from __future__ import annotations

import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_MENTION_RE = re.compile(r"@\w+")
_TOKEN_RE = re.compile(r"[a-z0-9]+")

_VOWELS = "aeiou"


def _is_consonant(word: str, i: int) -> bool:
    c = word[i]
    if c in _VOWELS:
        return False
    if c == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Count VC sequences, the m value of the Porter algorithm."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        if _is_consonant(stem, i):
            if prev_vowel:
                m += 1
            prev_vowel = False
        else:
            prev_vowel = True
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    # consonant-vowel-consonant, final consonant not w, x or y
    if len(word) < 3:
        return False
    if not (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
    ):
        return False
    return word[-1] not in "wxy"


_STEP2_RULES = [
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
]

_STEP3_RULES = [
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
]

_STEP4_SUFFIXES = [
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
]


def porter_stem(word: str) -> str:
    """Stem a lowercase word with the classic Porter (1980) algorithm."""
    if len(word) <= 2:
        return word

    # step 1a
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif word.endswith("ss"):
        pass
    elif word.endswith("s"):
        word = word[:-1]

    # step 1b
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            word = word[:-1]
    else:
        flag = False
        if word.endswith("ed") and _has_vowel(word[:-2]):
            word = word[:-2]
            flag = True
        elif word.endswith("ing") and _has_vowel(word[:-3]):
            word = word[:-3]
            flag = True
        if flag:
            if word.endswith(("at", "bl", "iz")):
                word += "e"
            elif _ends_double_consonant(word) and word[-1] not in "lsz":
                word = word[:-1]
            elif _measure(word) == 1 and _ends_cvc(word):
                word += "e"

    # step 1c
    if word.endswith("y") and _has_vowel(word[:-1]):
        word = word[:-1] + "i"

    # step 2
    for suffix, repl in _STEP2_RULES:
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if _measure(stem) > 0:
                word = stem + repl
            break

    # step 3
    for suffix, repl in _STEP3_RULES:
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if _measure(stem) > 0:
                word = stem + repl
            break

    # step 4
    for suffix in _STEP4_SUFFIXES:
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if _measure(stem) > 1:
                if suffix == "ion" and not stem.endswith(("s", "t")):
                    break
                word = stem
            break

    # step 5a
    if word.endswith("e"):
        stem = word[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            word = stem

    # step 5b
    if word.endswith("ll") and _measure(word) > 1:
        word = word[:-1]

    return word


def default_stopwords() -> frozenset[str]:
    """Stop-word list shipped with the package."""
    text = resources.files("marketburst.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(_parse_stopwords(text))


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Load a stop-word file, one token per line; # starts a comment."""
    return frozenset(_parse_stopwords(Path(path).read_text("utf-8")))


def _parse_stopwords(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def surface_tokens(text: str) -> list[str]:
    """Lowercased raw tokens with URLs and @-mentions stripped, no stemming.

    Apostrophes are deleted rather than treated as separators, so
    contractions stay whole ("isn't" -> "isnt").
    """
    text = _MENTION_RE.sub(" ", _URL_RE.sub(" ", text.lower()))
    text = text.replace("'", "").replace("’", "")
    return [t for t in _TOKEN_RE.findall(text) if not t.isdigit()]


def tokenize_and_stem(text: str, stopwords: frozenset[str]) -> list[str]:
    """Normalize text to stemmed content tokens.

    Lowercases, strips URLs/mentions/punctuation, removes stop words,
    Porter-stems, and removes stems that collide with stop words, so
    the output never contains a stop word in either surface or stemmed
    form.
    """
    stems = [porter_stem(t) for t in surface_tokens(text) if t not in stopwords]
    return [s for s in stems if s and s not in stopwords]


@dataclass(frozen=True)
class ScoredKeyword:
    phrase: str
    score: float
    occurrences: int


def rake_keywords(
    document: str,
    max_words_per_keyword: int = 2,
    min_occurrences: int = 4,
    min_score: float = 1.2,
    stopwords: frozenset[str] | None = None,
) -> list[ScoredKeyword]:
    """Extract keywords with RAKE (degree/frequency co-occurrence scoring).

    Candidate phrases are maximal runs of content words between stop
    words / punctuation. Candidates longer than ``max_words_per_keyword``
    are discarded. Each word w gets score deg(w)/freq(w) where deg counts
    co-occurring words (including w itself) within candidates and freq
    counts occurrences; a phrase scores the sum over its member words.
    Phrases occurring fewer than ``min_occurrences`` times or scoring
    below ``min_score`` are dropped. Result is sorted by descending
    score, ties alphabetically.
    """
    if max_words_per_keyword < 1:
        raise ValueError("max_words_per_keyword must be >= 1")
    if min_occurrences < 1:
        raise ValueError("min_occurrences must be >= 1")
    if stopwords is None:
        stopwords = default_stopwords()

    candidates = _candidate_phrases(document, stopwords, max_words_per_keyword)
    if not candidates:
        return []

    freq: Counter[str] = Counter()
    degree: defaultdict[str, int] = defaultdict(int)
    for phrase in candidates:
        for w in phrase:
            freq[w] += 1
            degree[w] += len(phrase)

    phrase_counts = Counter(candidates)
    out = []
    for phrase, count in phrase_counts.items():
        if count < min_occurrences:
            continue
        score = sum(degree[w] / freq[w] for w in phrase)
        if score < min_score:
            continue
        out.append(ScoredKeyword(" ".join(phrase), score, count))
    out.sort(key=lambda k: (-k.score, k.phrase))
    return out


def _candidate_phrases(
    document: str, stopwords: frozenset[str], max_words: int
) -> list[tuple[str, ...]]:
    phrases: list[tuple[str, ...]] = []
    run: list[str] = []

    def flush() -> None:
        if run and len(run) <= max_words:
            phrases.append(tuple(run))
        run.clear()

    for tok in re.findall(r"[a-z0-9]+|[^a-z0-9\s]+", document.lower()):
        if not tok[0].isalnum():
            flush()
        elif tok in stopwords or tok.isdigit():
            flush()
        else:
            run.append(tok)
    flush()
    return phrases
