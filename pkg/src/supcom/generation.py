"""Retrieval and generation phases: prompt assembly, chat providers, and
structured response parsing.

Both prompts are versioned template files with named slots; their hashes are
stamped into telemetry so any result is attributable to a prompt version.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import os
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Protocol

import requests

from .errors import ProviderError, TransientServiceError
from .issues import IssueReport, IssueSentence
from .records import CommentSentence, MethodRecord
from .textproc import split_sentences, tokenize_words, word_overlap_ratio

log = logging.getLogger(__name__)


class InfoType(enum.Enum):
    """The five categories of code-supplementary information an issue can
    provide for a method's comments."""

    FUNCTIONALITY = "Functionality"
    CONCEPT = "Concept"
    DIRECTIVE = "Directive"
    RATIONALE = "Rationale"
    IMPLICATION = "Implication"

    @property
    def definition(self) -> str:
        return _DEFINITIONS[self]


_DEFINITIONS = {
    InfoType.FUNCTIONALITY: "What the method does: its behavior, feature, or effect.",
    InfoType.CONCEPT: "The meaning of a term or domain concept the method deals with.",
    InfoType.DIRECTIVE: "What callers must notice or obey: contracts, ordering, allowed and disallowed usage.",
    InfoType.RATIONALE: "Why the method exists or why it is designed or used this way.",
    InfoType.IMPLICATION: "A quality consequence of using the method, such as its performance or resource impact.",
}

INFO_TYPE_NAMES = [t.value for t in InfoType]


@dataclass
class EvidenceRef:
    issue_key: str
    index: int
    text: str

    def to_dict(self) -> dict:
        return {"issue_key": self.issue_key, "index": self.index, "text": self.text}

    @classmethod
    def from_dict(cls, d: dict) -> "EvidenceRef":
        return cls(issue_key=d["issue_key"], index=int(d["index"]), text=d["text"])


@dataclass
class RetrievedEvidence:
    method_id: str
    entries: dict[str, list[EvidenceRef]] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not any(self.entries.values())

    def to_dict(self) -> dict:
        return {
            "method_id": self.method_id,
            "entries": {
                name: [ref.to_dict() for ref in self.entries[name]]
                for name in INFO_TYPE_NAMES
                if name in self.entries and self.entries[name]
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RetrievedEvidence":
        return cls(
            method_id=d["method_id"],
            entries={
                name: [EvidenceRef.from_dict(r) for r in refs]
                for name, refs in d.get("entries", {}).items()
            },
        )


@dataclass
class GeneratedComment:
    method_id: str
    sentences: list[CommentSentence] = field(default_factory=list)
    parse_failed: bool = False

    def to_dict(self) -> dict:
        return {
            "method_id": self.method_id,
            "sentences": [s.to_dict() for s in self.sentences],
            "parse_failed": self.parse_failed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratedComment":
        return cls(
            method_id=d["method_id"],
            sentences=[CommentSentence.from_dict(s) for s in d.get("sentences", [])],
            parse_failed=bool(d.get("parse_failed", False)),
        )


@dataclass
class ChatParams:
    temperature: float = 0.0  # zero by default to suppress sampling noise
    model: Optional[str] = None
    max_tokens: Optional[int] = None


class ChatProvider(Protocol):
    id: str

    def complete(self, system: str, user: str, params: ChatParams) -> str: ...


def request_fingerprint(system: str, user: str) -> str:
    return hashlib.sha256((system + "\x00" + user).encode("utf-8")).hexdigest()[:16]


class MockChatProvider:
    """Maps a request fingerprint to a scripted response file. Fully
    deterministic; a missing fixture is a provider failure for that method."""

    id = "mock-chat"

    def __init__(self, fixtures_dir: str | Path):
        self.fixtures_dir = Path(fixtures_dir)

    def complete(self, system: str, user: str, params: ChatParams) -> str:
        path = self.fixtures_dir / f"{request_fingerprint(system, user)}.txt"
        if not path.exists():
            raise ProviderError(f"no scripted response for request {path.stem}")
        return path.read_text(encoding="utf-8")

    def script(self, system: str, user: str, response: str) -> Path:
        """Write the scripted response for a prompt (test/fixture helper)."""
        self.fixtures_dir.mkdir(parents=True, exist_ok=True)
        path = self.fixtures_dir / f"{request_fingerprint(system, user)}.txt"
        path.write_text(response, encoding="utf-8")
        return path


class HttpChatProvider:
    """Chat-completions style endpoint: system/user roles, temperature, and
    a bearer token read from the named environment variable."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: Optional[str] = None,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        session: Optional[requests.Session] = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.session = session or requests.Session()
        self.id = f"http-chat:{model}"

    def complete(self, system: str, user: str, params: ChatParams) -> str:
        headers = {}
        if self.api_key_env:
            token = os.environ.get(self.api_key_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        body = {
            "model": params.model or self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": params.temperature,
        }
        if params.max_tokens:
            body["max_tokens"] = params.max_tokens
        last_error: Optional[str] = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                resp = self.session.post(
                    self.endpoint, json=body, timeout=self.timeout, headers=headers
                )
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise ProviderError(f"chat endpoint rejected request: HTTP {resp.status_code}")
            data = resp.json()
            try:
                return data["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise ProviderError(f"malformed chat response: {exc}") from None
        raise TransientServiceError(
            f"chat endpoint failed after {self.max_attempts} attempts: {last_error}",
            retries_exhausted=True,
        )


# ---------------------------------------------------------------------------
# Prompt assembly
# ---------------------------------------------------------------------------

SYSTEM_PROMPT = (
    "You are a precise software documentation assistant. Follow the output "
    "format exactly and never invent information."
)


def _load_template(name: str, override: Optional[str | Path] = None) -> str:
    if override:
        return Path(override).read_text(encoding="utf-8")
    return resources.files("supcom.prompts").joinpath(name).read_text(encoding="utf-8")


def template_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _fill(template: str, slots: dict[str, str]) -> str:
    out = template
    for name, value in slots.items():
        out = out.replace("{" + name + "}", value)
    return out


def _type_catalog() -> str:
    return "\n".join(f"- {t.value}: {t.definition}" for t in InfoType)


@dataclass
class BuiltPrompt:
    system: str
    user: str
    truncated: bool = False
    template_hash: str = ""


def _truncate_issue_sentences(
    sentences: list[IssueSentence], word_budget: Optional[int]
) -> tuple[list[IssueSentence], bool]:
    """Drop whole sentences from the end of the discussion first, then from
    the end of the body, until within budget. Title sentences always stay."""
    if word_budget is None:
        return sentences, False
    total = sum(len(tokenize_words(s.text)) for s in sentences)
    if total <= word_budget:
        return sentences, False
    drop: set[int] = set()
    for source in ("discussion", "body"):
        for s in reversed(sentences):
            if total <= word_budget:
                break
            if s.source_field == source and s.index not in drop:
                drop.add(s.index)
                total -= len(tokenize_words(s.text))
        if total <= word_budget:
            break
    kept = [s for s in sentences if s.index not in drop]
    return kept, True


def build_retrieval_prompt(
    method: MethodRecord,
    issue: IssueReport,
    template: Optional[str] = None,
    word_budget: Optional[int] = None,
) -> BuiltPrompt:
    """Three parts in order: task description, the five categories with
    definitions, then the method source and the numbered issue sentences."""
    tpl = template if template is not None else _load_template("retrieval.txt")
    sentences, truncated = _truncate_issue_sentences(issue.sentences, word_budget)
    numbered = "\n".join(f"[{s.index}] {s.text}" for s in sentences)
    note = (
        "(Note: the issue was shortened to fit; trailing discussion sentences were omitted.)"
        if truncated
        else ""
    )
    user = _fill(
        tpl,
        {
            "type_catalog": _type_catalog(),
            "method_source": method.body,
            "issue_key": issue.key,
            "issue_title": issue.title,
            "issue_sentences": numbered,
            "truncation_note": note,
        },
    )
    return BuiltPrompt(
        system=SYSTEM_PROMPT, user=user, truncated=truncated, template_hash=template_hash(tpl)
    )


_HEADER_RE = re.compile(r"^\s*(?:#+\s*)?(\*\*)?(%s)(\*\*)?\s*:?\s*$" % "|".join(INFO_TYPE_NAMES), re.IGNORECASE)
_QUOTE_LINE_RE = re.compile(r"^\s*(?:[-*+]\s*)?(?:\[?(\d+)\]?\s*[:.)-]?\s*)?(.*\S)\s*$")


def _match_header(line: str) -> Optional[str]:
    m = _HEADER_RE.match(line)
    if not m:
        return None
    name = m.group(2).capitalize()
    for t in InfoType:
        if t.value.lower() == name.lower():
            return t.value
    return None


def _align_quote(
    quote: str, issue: IssueReport, overlap_threshold: float
) -> Optional[IssueSentence]:
    """Map a quoted sentence back to the real issue sentence: exact text or
    substring first, then best word overlap strictly above the threshold."""
    q = quote.strip()
    if not q:
        return None
    for s in issue.sentences:
        if q == s.text.strip():
            return s
    for s in issue.sentences:
        if q in s.text:
            return s
    best: Optional[IssueSentence] = None
    best_ratio = -1.0
    for s in issue.sentences:
        r = word_overlap_ratio(q, s.text)
        if r > best_ratio:
            best_ratio = r
            best = s
    if best is not None and best_ratio > overlap_threshold:
        return best
    return None


def parse_retrieval_response(
    response: str,
    issue: IssueReport,
    method_id: str,
    overlap_threshold: float = 0.7,
) -> tuple[RetrievedEvidence, dict]:
    """Parse per-type sections and align every quoted sentence back to a real
    issue sentence. Quotes that cannot be aligned are dropped and counted as
    fabrications; duplicates per (type, sentence) are removed."""
    stats = {"fabrications": 0, "quotes": 0, "parse_failed": False}
    entries: dict[str, list[EvidenceRef]] = {}
    seen: set[tuple[str, int]] = set()
    current: Optional[str] = None
    saw_header = False
    for line in response.splitlines():
        header = _match_header(line)
        if header is not None:
            current = header
            saw_header = True
            continue
        if current is None or not line.strip():
            continue
        m = _QUOTE_LINE_RE.match(line)
        if not m:
            continue
        quote = m.group(2)
        stats["quotes"] += 1
        aligned = _align_quote(quote, issue, overlap_threshold)
        if aligned is None:
            stats["fabrications"] += 1
            continue
        dedup_key = (current, aligned.index)
        if dedup_key in seen:
            continue
        seen.add(dedup_key)
        entries.setdefault(current, []).append(
            EvidenceRef(issue_key=aligned.issue_key, index=aligned.index, text=aligned.text)
        )
    if not saw_header:
        stats["parse_failed"] = True
        return RetrievedEvidence(method_id=method_id), stats
    ordered = {
        name: entries[name] for name in INFO_TYPE_NAMES if name in entries and entries[name]
    }
    return RetrievedEvidence(method_id=method_id, entries=ordered), stats


def build_generation_prompt(
    method: MethodRecord,
    evidence: RetrievedEvidence,
    template: Optional[str] = None,
) -> BuiltPrompt:
    """Three parts in order: task description, the per-type retrieved
    sentences, then the method source."""
    if evidence.empty:
        raise ValueError("generation prompt requires nonempty evidence")
    tpl = template if template is not None else _load_template("generation.txt")
    sections = []
    for name in INFO_TYPE_NAMES:
        refs = evidence.entries.get(name)
        if not refs:
            continue
        lines = "\n".join(f"- [{r.index}] {r.text}" for r in refs)
        sections.append(f"## {name}\n{lines}")
    user = _fill(
        tpl,
        {
            "evidence_sections": "\n\n".join(sections),
            "method_source": method.body,
        },
    )
    return BuiltPrompt(system=SYSTEM_PROMPT, user=user, template_hash=template_hash(tpl))


def parse_generation_response(response: str, method_id: str) -> tuple[GeneratedComment, dict]:
    """Split each type-labeled block into sentences, tagging every sentence
    with its block's category. Prose outside any block is ignored and
    counted; no recognizable blocks means a parse failure."""
    stats = {"stray_lines": 0, "parse_failed": False}
    blocks: list[tuple[str, list[str]]] = []
    current: Optional[list[str]] = None
    for line in response.splitlines():
        header = _match_header(line)
        if header is not None:
            current = []
            blocks.append((header, current))
            continue
        if current is None:
            if line.strip():
                stats["stray_lines"] += 1
            continue
        current.append(line)
    if not blocks:
        stats["parse_failed"] = True
        return GeneratedComment(method_id=method_id, parse_failed=True), stats
    sentences: list[CommentSentence] = []
    for type_name, lines in blocks:
        text = "\n".join(lines).strip()
        if not text:
            continue
        for sent in split_sentences(text, doc_id=method_id):
            if not sent.tokens:
                continue
            sentences.append(CommentSentence(text=sent.text, info_type=type_name))
    return GeneratedComment(method_id=method_id, sentences=sentences), stats


# ---------------------------------------------------------------------------
# Per-method pipeline (retrieval then generation)
# ---------------------------------------------------------------------------


@dataclass
class PipelineParams:
    temperature: float = 0.0
    issue_word_budget: Optional[int] = None
    overlap_threshold: float = 0.7
    retrieval_template: Optional[str] = None
    generation_template: Optional[str] = None
    model: Optional[str] = None


@dataclass
class Telemetry:
    retrieval_prompt_hash: str = ""
    generation_prompt_hash: str = ""
    request_words: int = 0
    response_words: int = 0
    truncated: bool = False
    fabrications: int = 0
    quotes: int = 0
    stray_lines: int = 0
    retrieval_parse_failed: bool = False
    generation_parse_failed: bool = False
    latency_s: float = 0.0  # wall clock; excluded from persisted records

    def to_dict(self) -> dict:
        # latency is wall-clock noise: it stays in memory / run manifest only
        return {
            "retrieval_prompt_hash": self.retrieval_prompt_hash,
            "generation_prompt_hash": self.generation_prompt_hash,
            "request_words": self.request_words,
            "response_words": self.response_words,
            "truncated": self.truncated,
            "fabrications": self.fabrications,
            "quotes": self.quotes,
            "stray_lines": self.stray_lines,
            "retrieval_parse_failed": self.retrieval_parse_failed,
            "generation_parse_failed": self.generation_parse_failed,
        }


@dataclass
class PipelineOutcome:
    method_id: str
    issue_key: str
    status: str  # "ok" | "failed" | "no_evidence"
    evidence: RetrievedEvidence
    comment: GeneratedComment
    telemetry: Telemetry
    failure_reason: Optional[str] = None


def run_pipeline(
    method: MethodRecord,
    issue: IssueReport,
    chat_provider: ChatProvider,
    params: PipelineParams | None = None,
) -> PipelineOutcome:
    """Retrieval then generation for one linked method. Provider failures
    mark the method failed without raising, so batch runs continue."""
    params = params or PipelineParams()
    chat_params = ChatParams(temperature=params.temperature, model=params.model)
    telemetry = Telemetry()
    evidence = RetrievedEvidence(method_id=method.id)
    comment = GeneratedComment(method_id=method.id)
    started = time.perf_counter()

    def finish(status: str, reason: Optional[str] = None) -> PipelineOutcome:
        telemetry.latency_s = time.perf_counter() - started
        return PipelineOutcome(
            method_id=method.id,
            issue_key=issue.key,
            status=status,
            evidence=evidence,
            comment=comment,
            telemetry=telemetry,
            failure_reason=reason,
        )

    retrieval = build_retrieval_prompt(
        method,
        issue,
        template=params.retrieval_template,
        word_budget=params.issue_word_budget,
    )
    telemetry.retrieval_prompt_hash = retrieval.template_hash
    telemetry.truncated = retrieval.truncated
    telemetry.request_words += len(tokenize_words(retrieval.user))
    try:
        retrieval_response = chat_provider.complete(retrieval.system, retrieval.user, chat_params)
    except (ProviderError, TransientServiceError) as exc:
        log.warning("retrieval failed for %s: %s", method.id, exc)
        return finish("failed", f"retrieval: {exc}")
    telemetry.response_words += len(tokenize_words(retrieval_response))
    evidence, r_stats = parse_retrieval_response(
        retrieval_response, issue, method.id, params.overlap_threshold
    )
    telemetry.fabrications = r_stats["fabrications"]
    telemetry.quotes = r_stats["quotes"]
    telemetry.retrieval_parse_failed = r_stats["parse_failed"]
    if telemetry.retrieval_parse_failed:
        return finish("failed", "retrieval: unparseable response")
    if evidence.empty:
        return finish("no_evidence")

    generation = build_generation_prompt(method, evidence, template=params.generation_template)
    telemetry.generation_prompt_hash = generation.template_hash
    telemetry.request_words += len(tokenize_words(generation.user))
    try:
        generation_response = chat_provider.complete(generation.system, generation.user, chat_params)
    except (ProviderError, TransientServiceError) as exc:
        log.warning("generation failed for %s: %s", method.id, exc)
        return finish("failed", f"generation: {exc}")
    telemetry.response_words += len(tokenize_words(generation_response))
    comment, g_stats = parse_generation_response(generation_response, method.id)
    telemetry.stray_lines = g_stats["stray_lines"]
    telemetry.generation_parse_failed = g_stats["parse_failed"]
    if telemetry.generation_parse_failed:
        return finish("failed", "generation: unparseable response")
    return finish("ok")
