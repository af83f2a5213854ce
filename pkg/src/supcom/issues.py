"""Issue ingestion, segmentation, tracker fetching with an on-disk cache,
and method-to-issue linking."""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional
from urllib.parse import urlparse

import requests

from .errors import IssueNotFoundError, IssueValidationError, TransientServiceError
from .jsonl import read_json, write_json
from .records import MethodRecord
from .textproc import split_sentences, tokenize_words

log = logging.getLogger(__name__)

# Uppercase project key, dash, digits; e.g. CAMEL-17551. Word-bounded.
DEFAULT_ISSUE_KEY_PATTERN = r"\b[A-Z][A-Z0-9]*-[0-9]+\b"

_FENCE_RE = re.compile(r"^\s*(```|\{code[^}]*\}|\{noformat\})\s*$")
_STACK_LINE_RE = re.compile(r"^\s*(at\s+[\w.$<>/]+\(.*\)|Caused by:.*|\.\.\.\s*\d+\s+more)\s*$")


@dataclass
class IssueSentence:
    issue_key: str
    index: int
    text: str
    source_field: str  # "title" | "body" | "discussion"
    is_code_block: bool = False

    def to_dict(self) -> dict:
        return {
            "issue_key": self.issue_key,
            "index": self.index,
            "text": self.text,
            "source_field": self.source_field,
            "is_code_block": self.is_code_block,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IssueSentence":
        return cls(
            issue_key=d["issue_key"],
            index=int(d["index"]),
            text=d["text"],
            source_field=d["source_field"],
            is_code_block=bool(d.get("is_code_block", False)),
        )


@dataclass
class IssueReport:
    key: str
    title: str
    body: str
    discussion: list[dict] = field(default_factory=list)  # {author, timestamp, text}
    sentences: list[IssueSentence] = field(default_factory=list)
    word_length: int = 0

    def prose_sentences(self) -> list[IssueSentence]:
        return [s for s in self.sentences if not s.is_code_block]

    def to_dict(self) -> dict:
        return {
            "key": self.key,
            "title": self.title,
            "body": self.body,
            "discussion": list(self.discussion),
            "sentences": [s.to_dict() for s in self.sentences],
            "word_length": self.word_length,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IssueReport":
        return cls(
            key=d["key"],
            title=d.get("title", ""),
            body=d.get("body", ""),
            discussion=list(d.get("discussion", [])),
            sentences=[IssueSentence.from_dict(s) for s in d.get("sentences", [])],
            word_length=int(d.get("word_length", 0)),
        )


@dataclass
class IssueLink:
    method_id: str
    issue_key: str
    commit_hash: str
    span: tuple[int, int]  # character span of the key match in the message
    resolved: bool = True

    def to_dict(self) -> dict:
        return {
            "method_id": self.method_id,
            "issue_key": self.issue_key,
            "commit_hash": self.commit_hash,
            "span": list(self.span),
            "resolved": self.resolved,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IssueLink":
        return cls(
            method_id=d["method_id"],
            issue_key=d["issue_key"],
            commit_hash=d["commit_hash"],
            span=tuple(d["span"]),
            resolved=bool(d.get("resolved", True)),
        )


def _segment_text(text: str) -> list[tuple[str, bool]]:
    """Split text into (line-or-paragraph, is_code) segments. Fenced regions
    (``` / {code} / {noformat}) and stack-trace lines come back line by line
    flagged as code; everything else as prose paragraphs."""
    segments: list[tuple[str, bool]] = []
    prose: list[str] = []

    def flush_prose() -> None:
        if prose:
            segments.append(("\n".join(prose), False))
            prose.clear()

    in_fence = False
    for line in text.splitlines():
        if _FENCE_RE.match(line):
            flush_prose()
            in_fence = not in_fence
            continue
        if in_fence or _STACK_LINE_RE.match(line):
            flush_prose()
            if line.strip():
                segments.append((line.strip(), True))
        else:
            prose.append(line)
    flush_prose()
    return segments


def _append_sentences(
    out: list[IssueSentence], key: str, text: str, source_field: str
) -> None:
    for segment, is_code in _segment_text(text):
        if is_code:
            out.append(
                IssueSentence(
                    issue_key=key,
                    index=len(out),
                    text=segment,
                    source_field=source_field,
                    is_code_block=True,
                )
            )
        else:
            for sent in split_sentences(segment, doc_id=key):
                if not sent.tokens:
                    continue  # punctuation-only fragments carry no signal
                out.append(
                    IssueSentence(
                        issue_key=key,
                        index=len(out),
                        text=sent.text,
                        source_field=source_field,
                    )
                )


def ingest_issue(source: Mapping) -> IssueReport:
    """Build an IssueReport from a local record or normalized tracker payload.

    Sentences are segmented from title, body, then discussion in order, with
    dense indices; code blocks are kept but flagged. Re-ingesting the same
    source yields an identical record.
    """
    key = str(source.get("key") or "").strip()
    if not key:
        raise IssueValidationError("issue source is missing 'key'")
    title = str(source.get("title") or "")
    body = str(source.get("body") or "")
    discussion = []
    for entry in source.get("discussion") or []:
        discussion.append(
            {
                "author": str(entry.get("author") or ""),
                "timestamp": str(entry.get("timestamp") or ""),
                "text": str(entry.get("text") or ""),
            }
        )
    sentences: list[IssueSentence] = []
    _append_sentences(sentences, key, title, "title")
    _append_sentences(sentences, key, body, "body")
    for entry in discussion:
        _append_sentences(sentences, key, entry["text"], "discussion")
    word_length = (
        len(tokenize_words(title))
        + len(tokenize_words(body))
        + sum(len(tokenize_words(e["text"])) for e in discussion)
    )
    return IssueReport(
        key=key,
        title=title,
        body=body,
        discussion=discussion,
        sentences=sentences,
        word_length=word_length,
    )


def _normalize_payload(payload: Mapping) -> dict:
    """Accept either the canonical {key,title,body,discussion} shape or a
    JIRA-style {key, fields: {summary, description, comment}} resource."""
    if "fields" in payload:
        fields = payload["fields"] or {}
        comments = ((fields.get("comment") or {}).get("comments")) or []
        discussion = []
        for c in comments:
            author = c.get("author")
            if isinstance(author, Mapping):
                author = author.get("displayName") or author.get("name") or ""
            discussion.append(
                {
                    "author": author or "",
                    "timestamp": c.get("created") or "",
                    "text": c.get("body") or "",
                }
            )
        return {
            "key": payload.get("key"),
            "title": fields.get("summary") or "",
            "body": fields.get("description") or "",
            "discussion": discussion,
        }
    return {
        "key": payload.get("key"),
        "title": payload.get("title") or "",
        "body": payload.get("body") or "",
        "discussion": payload.get("discussion") or [],
    }


class TrackerClient:
    """Minimal REST client for a JSON issue resource with disk caching and
    exponential backoff. Cached keys are served with zero network calls, so
    reruns are offline."""

    def __init__(
        self,
        base_url: str,
        token: Optional[str] = None,
        cache_dir: Optional[str | Path] = None,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        timeout: float = 10.0,
        session: Optional[requests.Session] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.timeout = timeout
        self.session = session or requests.Session()
        self._host = urlparse(self.base_url).netloc or "local"

    def _cache_path(self, key: str) -> Optional[Path]:
        if self.cache_dir is None:
            return None
        return self.cache_dir / self._host / f"{key}.json"

    def fetch_issue(self, key: str) -> IssueReport:
        cache_path = self._cache_path(key)
        if cache_path is not None and cache_path.exists():
            return ingest_issue(read_json(cache_path))
        payload = self._get(key)
        normalized = _normalize_payload(payload)
        if cache_path is not None:
            write_json(cache_path, normalized)
        return ingest_issue(normalized)

    def _get(self, key: str) -> dict:
        url = f"{self.base_url}/{key}"
        headers = {"Accept": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last_error: Optional[str] = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                resp = self.session.get(url, headers=headers, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
                log.warning("tracker GET %s failed (%s), attempt %d", url, exc, attempt + 1)
                continue
            if resp.status_code == 404:
                raise IssueNotFoundError(f"issue {key} not found at {self.base_url}")
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                log.warning("tracker GET %s -> %s, attempt %d", url, resp.status_code, attempt + 1)
                continue
            resp.raise_for_status()
            return resp.json()
        raise TransientServiceError(
            f"tracker GET {url} failed after {self.max_attempts} attempts: {last_error}",
            retries_exhausted=True,
        )


def extract_issue_key_matches(
    message: str, pattern: str | re.Pattern = DEFAULT_ISSUE_KEY_PATTERN
) -> list[tuple[str, int, int]]:
    """All non-overlapping key matches in message order with char spans,
    deduplicated on the key preserving first occurrence."""
    rx = re.compile(pattern) if isinstance(pattern, str) else pattern
    seen: set[str] = set()
    out: list[tuple[str, int, int]] = []
    for m in rx.finditer(message):
        key = m.group(0)
        if key not in seen:
            seen.add(key)
            out.append((key, m.start(), m.end()))
    return out


def link_issues(
    methods: list[MethodRecord],
    issues: Optional[Mapping[str, IssueReport]] = None,
    pattern: str | re.Pattern = DEFAULT_ISSUE_KEY_PATTERN,
) -> list[IssueLink]:
    """One link per (method, key in its originating commit message). Links
    whose issue is not ingested are kept but flagged unresolved so downstream
    stages can count the skip reason."""
    known = set(issues.keys()) if issues is not None else None
    links: list[IssueLink] = []
    seen: set[tuple[str, str]] = set()
    for method in methods:
        for key, start, end in extract_issue_key_matches(method.commit.message, pattern):
            pair = (method.id, key)
            if pair in seen:
                continue
            seen.add(pair)
            links.append(
                IssueLink(
                    method_id=method.id,
                    issue_key=key,
                    commit_hash=method.commit.hash,
                    span=(start, end),
                    resolved=(known is None or key in known),
                )
            )
    return links
