"""Deterministic text primitives: sentence splitting, word tokenization,
identifier extraction, and word-overlap scoring.

Everything here is pure and documented down to the token level (see
docs/schemas.md) so results can be replicated bit-exactly by other tools.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .records import MethodRecord
from .srcparse import JAVA_KEYWORDS, _IDENT_RE, mask_code

_WORD_SPLIT_RE = re.compile(r"[^0-9A-Za-z]+")

# Dotted tokens that never end a sentence, lowercase, without the final dot.
PROTECTED_ABBREVIATIONS = frozenset(
    "e.g i.e etc vs cf al resp approx no fig eq sec ca incl max min".split()
)

_BULLET_RE = re.compile(r"^\s*(?:[-*+•]|\d+[.)])\s+")
_SENT_BOUNDARY_RE = re.compile(r"[.!?;]+")
_TRAILING_WORD_RE = re.compile(r"([A-Za-z][A-Za-z.]*)$")


@dataclass
class Sentence:
    """One split sentence with its lowercased word tokens and origin."""

    text: str
    tokens: list[str]
    origin: tuple[Optional[str], int] = (None, 0)


@dataclass
class IdentifierSet:
    """Identifiers of a method: exact spellings plus lowercased camelCase /
    snake_case fragments. degraded marks the raw-token fallback path."""

    exact: set[str] = field(default_factory=set)
    subtokens: set[str] = field(default_factory=set)
    degraded: bool = False


def tokenize_words(text: str) -> list[str]:
    """Split on any non-alphanumeric run, lowercase, drop empties.
    No stemming, no stopword removal."""
    return [t.lower() for t in _WORD_SPLIT_RE.split(text) if t]


def _split_unit(unit: str) -> list[str]:
    """Split one text unit into sentences at ./!/?/; followed by whitespace
    and an uppercase letter (or end of text), protecting abbreviations and
    anything not followed by whitespace (versions, URLs, a.b.c())."""
    pieces: list[str] = []
    start = 0
    for m in _SENT_BOUNDARY_RE.finditer(unit):
        end = m.end()
        if end >= len(unit):
            break  # end-of-text boundary handled after the loop
        follow = unit[end]
        if not follow.isspace():
            continue
        rest = unit[end:].lstrip()
        if not rest:
            break
        if not rest[0].isupper():
            continue
        if "." in m.group(0):
            trail = _TRAILING_WORD_RE.search(unit[: m.start() + 1])
            if trail and trail.group(1).rstrip(".").lower() in PROTECTED_ABBREVIATIONS:
                continue
        piece = unit[start:end].strip()
        if piece:
            pieces.append(piece)
        start = end
    tail = unit[start:].strip()
    if tail:
        pieces.append(tail)
    return pieces


def split_sentences(text: str, doc_id: Optional[str] = None) -> list[Sentence]:
    """Sentence segmentation. Blank lines separate paragraphs, bullet items
    are their own sentences, and wrapped lines within a paragraph are joined.
    Non-whitespace characters are preserved in order across the output."""
    units: list[str] = []
    current: list[str] = []

    def flush() -> None:
        if current:
            units.append(" ".join(current))
            current.clear()

    for line in text.splitlines():
        if not line.strip():
            flush()
        elif _BULLET_RE.match(line):
            flush()
            units.append(line.strip())
            flush()
        else:
            current.append(line.strip())
    flush()

    sentences: list[Sentence] = []
    for unit in units:
        for piece in _split_unit(unit):
            sentences.append(
                Sentence(text=piece, tokens=tokenize_words(piece), origin=(doc_id, len(sentences)))
            )
    return sentences


def _tokens_of(s: Union[str, Sentence, Sequence[str]]) -> list[str]:
    if isinstance(s, Sentence):
        return s.tokens
    if isinstance(s, str):
        return tokenize_words(s)
    return list(s)


def word_overlap_ratio(
    comment_sentence: Union[str, Sentence],
    issue_sentence: Union[str, Sentence],
    counting: str = "set",
) -> float:
    """Fraction of the comment sentence's tokens found in the issue sentence.

    Asymmetric by design: the comment owns the denominator. "set" counts
    distinct tokens (default); "multiset" counts occurrences.
    """
    c_tokens = _tokens_of(comment_sentence)
    i_tokens = _tokens_of(issue_sentence)
    if not c_tokens:
        return 0.0
    if counting == "multiset":
        from collections import Counter

        cc, ic = Counter(c_tokens), Counter(i_tokens)
        hit = sum(min(n, ic[t]) for t, n in cc.items())
        return hit / len(c_tokens)
    c_set, i_set = set(c_tokens), set(i_tokens)
    return len(c_set & i_set) / len(c_set)


def overlap_candidates(
    comment_sentences: Iterable[Union[str, Sentence]],
    issue_sentences: Sequence[Union[str, Sentence]],
    threshold: float = 0.7,
    counting: str = "set",
) -> list[tuple[Union[str, Sentence], Union[str, Sentence], float]]:
    """Keep comment sentences whose best word overlap against any issue
    sentence is strictly greater than the threshold. Returns
    (comment_sentence, best_issue_sentence, ratio) triples; on ties, the
    earliest issue sentence wins."""
    kept = []
    for cs in comment_sentences:
        best_ratio = -1.0
        best_is = None
        for isent in issue_sentences:
            r = word_overlap_ratio(cs, isent, counting=counting)
            if r > best_ratio:
                best_ratio = r
                best_is = isent
        if best_is is not None and best_ratio > threshold:
            kept.append((cs, best_is, best_ratio))
    return kept


_SUBTOKEN_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|[0-9]+")


def split_identifier(name: str) -> set[str]:
    """camelCase/snake_case fragments, lowercased, length >= 2."""
    parts: set[str] = set()
    for chunk in re.split(r"[_$]+", name):
        for frag in _SUBTOKEN_RE.findall(chunk):
            frag = frag.lower()
            if len(frag) >= 2:
                parts.add(frag)
    return parts


def extract_identifiers(method: MethodRecord) -> IdentifierSet:
    """Identifier spellings lexed from the signature and body with string
    literals and comments masked out, keywords removed.

    Degraded path: an empty or unlexable body falls back to identifier-shaped
    tokens over the raw text (which then includes words from strings and
    comments) and flags the result.
    """
    source = method.body if method.body else ""
    if not source.strip():
        return IdentifierSet(degraded=True)
    try:
        masked, _ = mask_code(source)
        names = [t for t in _IDENT_RE.findall(masked) if t not in JAVA_KEYWORDS]
        degraded = False
        if not names:
            raise ValueError("no identifiers survived masking")
    except ValueError:
        names = [t for t in _IDENT_RE.findall(source) if t not in JAVA_KEYWORDS]
        degraded = True
    exact = set(names)
    subtokens: set[str] = set()
    for name in exact:
        subtokens |= split_identifier(name)
    return IdentifierSet(exact=exact, subtokens=subtokens, degraded=degraded)


def mentions_code_element(sentence: Union[str, Sentence], ids: IdentifierSet) -> bool:
    """True iff the sentence names an exact identifier (case-sensitive,
    word-bounded, length >= 2) or contains two distinct fragments of one
    identifier as words (so prose like "pause the consumers" still counts)."""
    text = sentence.text if isinstance(sentence, Sentence) else sentence
    for ident in ids.exact:
        if len(ident) < 2:
            continue
        if re.search(rf"(?<![0-9A-Za-z_$]){re.escape(ident)}(?![0-9A-Za-z_$])", text):
            return True
    words = set(_tokens_of(sentence))
    for ident in ids.exact:
        frags = split_identifier(ident)
        if len(frags) >= 2 and len(frags & words) >= 2:
            return True
    return False
