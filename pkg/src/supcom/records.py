"""Core domain records shared across pipeline stages.

Field names here are the stable JSONL schema; see docs/schemas.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass
class CommitInfo:
    """One commit: identity, message, author time (UTC epoch seconds),
    and the repo-relative paths it touched."""

    hash: str
    message: str
    author_time: int
    changed_paths: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "hash": self.hash,
            "message": self.message,
            "author_time": self.author_time,
            "changed_paths": list(self.changed_paths),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CommitInfo":
        return cls(
            hash=d["hash"],
            message=d["message"],
            author_time=int(d["author_time"]),
            changed_paths=list(d.get("changed_paths", [])),
        )


@dataclass
class MethodRecord:
    """A mined method body plus provenance.

    start_line is the 1-based line of the signature in the commit snapshot;
    end_line is the closing brace line. line_count = end - start + 1.
    """

    id: str
    repo: str
    file_path: str
    qualified_name: str
    signature: str
    body: str
    start_line: int
    end_line: int
    line_count: int
    commit: CommitInfo
    language_tag: str = "java"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "repo": self.repo,
            "file_path": self.file_path,
            "qualified_name": self.qualified_name,
            "signature": self.signature,
            "body": self.body,
            "start_line": self.start_line,
            "end_line": self.end_line,
            "line_count": self.line_count,
            "commit": self.commit.to_dict(),
            "language_tag": self.language_tag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MethodRecord":
        return cls(
            id=d["id"],
            repo=d["repo"],
            file_path=d["file_path"],
            qualified_name=d["qualified_name"],
            signature=d["signature"],
            body=d["body"],
            start_line=int(d["start_line"]),
            end_line=int(d["end_line"]),
            line_count=int(d["line_count"]),
            commit=CommitInfo.from_dict(d["commit"]),
            language_tag=d.get("language_tag", "java"),
        )


@dataclass
class RelevanceCheck:
    value: bool
    criterion: Optional[str] = None  # "identifier" | "side" | None
    side_score: Optional[float] = None
    side_unavailable: bool = False

    def to_dict(self) -> dict:
        d: dict = {"value": self.value, "criterion": self.criterion}
        if self.side_score is not None:
            d["side_score"] = self.side_score
        if self.side_unavailable:
            d["side_unavailable"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RelevanceCheck":
        return cls(
            value=bool(d["value"]),
            criterion=d.get("criterion"),
            side_score=d.get("side_score"),
            side_unavailable=bool(d.get("side_unavailable", False)),
        )


@dataclass
class VerifiabilityCheck:
    value: bool
    best_issue_key: Optional[str] = None
    best_index: Optional[int] = None
    score: float = 0.0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "best_issue_key": self.best_issue_key,
            "best_index": self.best_index,
            "score": self.score,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VerifiabilityCheck":
        return cls(
            value=bool(d["value"]),
            best_issue_key=d.get("best_issue_key"),
            best_index=d.get("best_index"),
            score=float(d.get("score", 0.0)),
        )


@dataclass
class CommentSentence:
    """One sentence of a manual or generated comment.

    info_type is set for generated sentences only. The verification fields
    stay None until verification has run; retained is the conjunction of
    the two checks.
    """

    text: str
    info_type: Optional[str] = None
    code_relevant: Optional[RelevanceCheck] = None
    verifiable: Optional[VerifiabilityCheck] = None
    retained: Optional[bool] = None

    def to_dict(self) -> dict:
        d: dict = {"text": self.text}
        if self.info_type is not None:
            d["info_type"] = self.info_type
        if self.code_relevant is not None:
            d["code_relevant"] = self.code_relevant.to_dict()
        if self.verifiable is not None:
            d["verifiable"] = self.verifiable.to_dict()
        if self.retained is not None:
            d["retained"] = self.retained
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CommentSentence":
        return cls(
            text=d["text"],
            info_type=d.get("info_type"),
            code_relevant=(
                RelevanceCheck.from_dict(d["code_relevant"])
                if d.get("code_relevant") is not None
                else None
            ),
            verifiable=(
                VerifiabilityCheck.from_dict(d["verifiable"])
                if d.get("verifiable") is not None
                else None
            ),
            retained=d.get("retained"),
        )


@dataclass
class CommentBlock:
    """A method's doc comment: raw text with markup stripped, plus the
    sentence segmentation. mesia is filled by the dataset stage."""

    method_id: str
    raw_text: str
    sentences: list[CommentSentence] = field(default_factory=list)
    mesia: Optional[float] = None

    @property
    def empty(self) -> bool:
        return not self.raw_text.strip()

    def to_dict(self) -> dict:
        return {
            "method_id": self.method_id,
            "raw_text": self.raw_text,
            "sentences": [s.to_dict() for s in self.sentences],
            "mesia": self.mesia,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CommentBlock":
        return cls(
            method_id=d["method_id"],
            raw_text=d["raw_text"],
            sentences=[CommentSentence.from_dict(s) for s in d.get("sentences", [])],
            mesia=d.get("mesia"),
        )


def make_method_id(
    repo: str, file_path: str, qualified_name: str, start_line: int, commit_hash: str
) -> str:
    """Stable unique id. The start line disambiguates overloads that share
    a qualified name within one file and commit."""
    return f"{repo}:{file_path}:{qualified_name}:L{start_line}:{commit_hash[:12]}"
