"""Supplementarity scoring: average self-information of comment tokens that
do not appear in the method's code, under an add-one-smoothed unigram model
built from the mined comment corpus.

This is a documented surrogate metric (labeled mesia_surrogate in all
outputs): it is zero for comments that only repeat the code, grows with the
rarity of code-novel terms, and averages over novel tokens so long comments
are not rewarded for length alone. The filter threshold of 3.0 bits is
applied as keep-if >= 3.0.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from .jsonl import read_json, write_json
from .records import CommentBlock, MethodRecord
from .textproc import IdentifierSet, extract_identifiers, tokenize_words

METRIC_ID = "mesia_surrogate"
DEFAULT_THRESHOLD = 3.0


@dataclass
class BackgroundModel:
    """Unigram counts with add-one smoothing; unseen tokens always get a
    strictly positive probability (count+1)/(total+vocab+1)."""

    token_counts: dict[str, int] = field(default_factory=dict)
    total: int = 0
    vocab_size: int = 0

    def probability(self, token: str) -> float:
        return (self.token_counts.get(token, 0) + 1) / (self.total + self.vocab_size + 1)

    def self_information(self, token: str) -> float:
        return -math.log2(self.probability(token))

    def save(self, path) -> None:
        write_json(
            path,
            {
                "metric": METRIC_ID,
                "token_counts": self.token_counts,
                "total": self.total,
                "vocab_size": self.vocab_size,
            },
        )

    @classmethod
    def load(cls, path) -> "BackgroundModel":
        d = read_json(path)
        return cls(
            token_counts={k: int(v) for k, v in d["token_counts"].items()},
            total=int(d["total"]),
            vocab_size=int(d["vocab_size"]),
        )


@dataclass
class MesiaScore:
    value: float
    novel_token_count: int
    total_token_count: int

    def to_dict(self) -> dict:
        return {
            "metric": METRIC_ID,
            "value": self.value,
            "novel_token_count": self.novel_token_count,
            "total_token_count": self.total_token_count,
        }


def build_background_model(corpus: Iterable[str]) -> BackgroundModel:
    """Count word tokens over an iterable of comment texts. Counts are
    order-free, so any corpus ordering yields the same model."""
    counts: Counter = Counter()
    n_texts = 0
    for text in corpus:
        n_texts += 1
        counts.update(tokenize_words(text))
    if n_texts == 0:
        raise ValueError("background model needs a nonempty corpus")
    return BackgroundModel(
        token_counts=dict(sorted(counts.items())),
        total=sum(counts.values()),
        vocab_size=len(counts),
    )


def code_token_set(method: MethodRecord, ids: IdentifierSet | None = None) -> set[str]:
    """Lowercased tokens derivable from the code: identifier subtokens,
    exact identifier spellings, and plain word tokens of the body."""
    ids = ids if ids is not None else extract_identifiers(method)
    known = set(ids.subtokens)
    known |= {e.lower() for e in ids.exact}
    known |= set(tokenize_words(method.body))
    return known


def score_text(text: str, known_code_tokens: set[str], model: BackgroundModel) -> MesiaScore:
    """Score any comment text against a precomputed code-token set."""
    tokens = set(tokenize_words(text))
    novel = sorted(tokens - known_code_tokens)
    if not novel:
        return MesiaScore(value=0.0, novel_token_count=0, total_token_count=len(tokens))
    value = sum(model.self_information(t) for t in novel) / len(novel)
    return MesiaScore(value=value, novel_token_count=len(novel), total_token_count=len(tokens))


def mesia_score(
    comment: CommentBlock, method: MethodRecord, model: BackgroundModel
) -> MesiaScore:
    """Average self-information of the comment's code-novel tokens.

    Novel tokens are the distinct comment word tokens absent from the
    method's identifier subtokens, exact identifiers, and body word tokens.
    A comment whose every token appears in the code scores exactly 0.
    """
    return score_text(comment.raw_text, code_token_set(method), model)


def filter_supplementary(
    comments: Iterable[CommentBlock], threshold: float = DEFAULT_THRESHOLD
) -> tuple[list[CommentBlock], list[CommentBlock]]:
    """Partition comments into (retained, rejected) at value >= threshold.
    Comments must already carry their mesia value. Exhaustive and disjoint."""
    retained: list[CommentBlock] = []
    rejected: list[CommentBlock] = []
    for c in comments:
        if c.mesia is None:
            raise ValueError(f"comment {c.method_id} has no mesia value")
        (retained if c.mesia >= threshold else rejected).append(c)
    return retained, rejected
