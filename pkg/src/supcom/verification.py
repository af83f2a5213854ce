"""Hallucination filtering: code-relevance and issue-verifiability checks
per generated sentence, plus the four-quadrant aggregation.

A sentence is retained only when it is both code-relevant (names a code
element, or gets a strictly positive alignment score) and issue-verifiable
(embedding similarity strictly above the threshold to at least one issue
sentence)."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol, Sequence

import requests

from .embedding import (
    EmbeddingCache,
    EmbeddingProvider,
    OfflineHashingProvider,
    embed,
    cosine_similarity,
    post_with_retries,
)
from .errors import EmbeddingError
from .generation import GeneratedComment
from .issues import IssueReport, IssueSentence
from .records import MethodRecord, RelevanceCheck, VerifiabilityCheck
from .srcparse import JAVA_KEYWORDS, _IDENT_RE, mask_code
from .textproc import IdentifierSet, extract_identifiers, mentions_code_element, split_identifier

log = logging.getLogger(__name__)

DEFAULT_SIMILARITY_THRESHOLD = 0.6


class SideScorer(Protocol):
    id: str

    def score(self, code: str, sentence: str) -> float: ...


class OfflineSideScorer:
    """Sign-preserving offline stand-in for a learned code-comment alignment
    scorer: cosine between the sentence and the method's identifier
    subtokens joined as text."""

    def __init__(
        self,
        provider: Optional[EmbeddingProvider] = None,
        cache: Optional[EmbeddingCache] = None,
    ):
        self.provider = provider or OfflineHashingProvider()
        self.cache = cache
        self.id = f"offline-side:{self.provider.id}"

    def score(self, code: str, sentence: str) -> float:
        masked, _ = mask_code(code)
        subtokens: set[str] = set()
        for name in _IDENT_RE.findall(masked):
            if name not in JAVA_KEYWORDS:
                subtokens |= split_identifier(name)
        if not subtokens or not sentence.strip():
            return 0.0
        ident_text = " ".join(sorted(subtokens))
        try:
            return cosine_similarity(
                embed(sentence, self.provider, self.cache),
                embed(ident_text, self.provider, self.cache),
            )
        except EmbeddingError:
            return 0.0


class HttpSideScorer:
    """Client for the scoring-service /side endpoint."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 30.0,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        session: Optional[requests.Session] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.id = f"http-side:{self.base_url}"
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.session = session or requests.Session()

    def score(self, code: str, sentence: str) -> float:
        payload = post_with_retries(
            self.session,
            f"{self.base_url}/side",
            {"code": code, "sentences": [sentence]},
            timeout=self.timeout,
            max_attempts=self.max_attempts,
            backoff_base=self.backoff_base,
        )
        return float(payload["scores"][0])


def is_code_relevant(
    sentence: str,
    method: MethodRecord,
    side_scorer: Optional[SideScorer] = None,
    ids: Optional[IdentifierSet] = None,
) -> RelevanceCheck:
    """Relevant iff the sentence mentions a code element, or else the
    alignment score is strictly positive. A scorer failure leaves relevance
    to the identifier criterion alone and flags the degradation."""
    ids = ids if ids is not None else extract_identifiers(method)
    if mentions_code_element(sentence, ids):
        return RelevanceCheck(value=True, criterion="identifier")
    if side_scorer is None:
        return RelevanceCheck(value=False, criterion=None, side_unavailable=True)
    try:
        score = side_scorer.score(method.body, sentence)
    except Exception as exc:
        log.warning("side scorer %s failed: %s", side_scorer.id, exc)
        return RelevanceCheck(value=False, criterion=None, side_unavailable=True)
    if score > 0.0:
        return RelevanceCheck(value=True, criterion="side", side_score=score)
    return RelevanceCheck(value=False, criterion=None, side_score=score)


def is_issue_verifiable(
    sentence: str,
    issue_sentences: Sequence[IssueSentence],
    provider: EmbeddingProvider,
    theta: float = DEFAULT_SIMILARITY_THRESHOLD,
    include_code_blocks: bool = False,
    cache: Optional[EmbeddingCache] = None,
) -> VerifiabilityCheck:
    """Best embedding similarity against the issue sentences; verifiable iff
    strictly above theta. The best reference is recorded even when the check
    fails. Code-block sentences are skipped by default (similarity against
    stack traces verifies nothing)."""
    targets = [
        s for s in issue_sentences if include_code_blocks or not s.is_code_block
    ]
    if not targets:
        return VerifiabilityCheck(value=False, best_issue_key=None, best_index=None, score=0.0)
    s_vec = embed(sentence, provider, cache)
    best: Optional[IssueSentence] = None
    best_score = -2.0
    for target in targets:
        score = cosine_similarity(s_vec, embed(target.text, provider, cache))
        if score > best_score:
            best_score = score
            best = target
    return VerifiabilityCheck(
        value=best_score > theta,
        best_issue_key=best.issue_key if best else None,
        best_index=best.index if best else None,
        score=best_score,
    )


def verify_comment(
    gc: GeneratedComment,
    method: MethodRecord,
    issue: IssueReport,
    embedding_provider: EmbeddingProvider,
    side_scorer: Optional[SideScorer] = None,
    theta: float = DEFAULT_SIMILARITY_THRESHOLD,
    include_code_blocks: bool = False,
    cache: Optional[EmbeddingCache] = None,
) -> GeneratedComment:
    """Annotate every sentence with both checks and retained = relevant AND
    verifiable. Order is preserved, nothing is added or dropped, and
    reapplying the verification yields identical annotations."""
    ids = extract_identifiers(method)
    for sentence in gc.sentences:
        sentence.code_relevant = is_code_relevant(
            sentence.text, method, side_scorer=side_scorer, ids=ids
        )
        sentence.verifiable = is_issue_verifiable(
            sentence.text,
            issue.sentences,
            embedding_provider,
            theta=theta,
            include_code_blocks=include_code_blocks,
            cache=cache,
        )
        sentence.retained = bool(sentence.code_relevant.value and sentence.verifiable.value)
    return gc


@dataclass
class QuadrantStats:
    relevant_verifiable: int = 0
    relevant_unverifiable: int = 0
    irrelevant_verifiable: int = 0
    irrelevant_unverifiable: int = 0

    @property
    def total(self) -> int:
        return (
            self.relevant_verifiable
            + self.relevant_unverifiable
            + self.irrelevant_verifiable
            + self.irrelevant_unverifiable
        )

    @property
    def retained(self) -> int:
        return self.relevant_verifiable

    def proportions(self) -> dict[str, float]:
        total = self.total
        if total == 0:
            return {
                "relevant_verifiable": 0.0,
                "relevant_unverifiable": 0.0,
                "irrelevant_verifiable": 0.0,
                "irrelevant_unverifiable": 0.0,
            }
        return {
            "relevant_verifiable": round(self.relevant_verifiable / total, 4),
            "relevant_unverifiable": round(self.relevant_unverifiable / total, 4),
            "irrelevant_verifiable": round(self.irrelevant_verifiable / total, 4),
            "irrelevant_unverifiable": round(self.irrelevant_unverifiable / total, 4),
        }

    def to_dict(self) -> dict:
        return {
            "counts": {
                "relevant_verifiable": self.relevant_verifiable,
                "relevant_unverifiable": self.relevant_unverifiable,
                "irrelevant_verifiable": self.irrelevant_verifiable,
                "irrelevant_unverifiable": self.irrelevant_unverifiable,
            },
            "total": self.total,
            "proportions": self.proportions(),
        }


def quadrant_stats(comments: Iterable[GeneratedComment]) -> QuadrantStats:
    """Exhaustive, disjoint counts over all annotated sentences."""
    stats = QuadrantStats()
    for gc in comments:
        for s in gc.sentences:
            if s.code_relevant is None or s.verifiable is None:
                raise ValueError(f"sentence of {gc.method_id} is not annotated")
            r, v = s.code_relevant.value, s.verifiable.value
            if r and v:
                stats.relevant_verifiable += 1
            elif r:
                stats.relevant_unverifiable += 1
            elif v:
                stats.irrelevant_verifiable += 1
            else:
                stats.irrelevant_unverifiable += 1
    return stats
