"""Mine method-comment pairs committed together in a single commit, plus
issue keys from commit messages.

The single-commit rule: a commit's post-image diff ranges must intersect
both the doc comment's line span and the method body's line span (or
introduce both). Pairs whose method and comment arrived in different
commits never satisfy this for any one commit.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .gitrepo import GitRepo
from .issues import DEFAULT_ISSUE_KEY_PATTERN, extract_issue_key_matches
from .records import CommentBlock, CommentSentence, CommitInfo, MethodRecord, make_method_id
from .srcparse import extract_methods
from .textproc import split_sentences

log = logging.getLogger(__name__)


@dataclass
class MinerOptions:
    repo_name: str = "repo"
    extensions: tuple[str, ...] = (".java",)
    rev: str = "HEAD"
    include_uncommented: bool = False
    include_merges: bool = False
    min_lines: int = 3
    max_commits: int | None = None
    language_tag: str = "java"
    jobs: int = 1


@dataclass
class MiningResult:
    records: list[tuple[MethodRecord, CommentBlock, CommitInfo]] = field(default_factory=list)
    counters: dict = field(default_factory=dict)


def extract_issue_keys(
    commit_message: str, pattern: str | re.Pattern = DEFAULT_ISSUE_KEY_PATTERN
) -> list[str]:
    """Ordered, deduplicated issue keys found in a commit message."""
    return [key for key, _, _ in extract_issue_key_matches(commit_message, pattern)]


def _intersects(ranges: list[tuple[int, int]], start: int, end: int) -> bool:
    return any(a <= end and b >= start for a, b in ranges)


def _comment_block(method_id: str, raw_text: str) -> CommentBlock:
    sentences = [
        CommentSentence(text=s.text)
        for s in split_sentences(raw_text, doc_id=method_id)
        if s.tokens
    ]
    return CommentBlock(method_id=method_id, raw_text=raw_text, sentences=sentences)


def _mine_commit(
    repo: GitRepo, commit: CommitInfo, opts: MinerOptions, counters: dict
) -> list[tuple[MethodRecord, CommentBlock, CommitInfo]]:
    out: list[tuple[MethodRecord, CommentBlock, CommitInfo]] = []
    changed = repo.changed_files(commit.hash)
    commit.changed_paths = [p for _, p in changed]
    candidates = sorted(
        p
        for status, p in changed
        if not status.startswith("D") and any(p.endswith(ext) for ext in opts.extensions)
    )
    for path in candidates:
        try:
            source = repo.file_at(commit.hash, path)
        except Exception as exc:
            counters["unreadable_files"] = counters.get("unreadable_files", 0) + 1
            log.warning("cannot read %s at %s: %s", path, commit.hash[:12], exc)
            continue
        parsed = extract_methods(source, opts.language_tag)
        if parsed.parse_warning:
            counters["parse_warnings"] = counters.get("parse_warnings", 0) + 1
            log.warning("parse warning in %s at %s", path, commit.hash[:12])
        if not parsed.methods:
            continue
        ranges = repo.diff_post_ranges(commit.hash, path)
        if not ranges:
            continue
        for m in parsed.methods:
            if (m.end_line - m.start_line + 1) < opts.min_lines:
                counters["too_short"] = counters.get("too_short", 0) + 1
                continue
            body_touched = _intersects(ranges, m.start_line, m.end_line)
            if not body_touched:
                continue
            method_id = make_method_id(
                opts.repo_name, path, m.qualified_name, m.start_line, commit.hash
            )
            record = MethodRecord(
                id=method_id,
                repo=opts.repo_name,
                file_path=path,
                qualified_name=m.qualified_name,
                signature=m.signature,
                body=m.body,
                start_line=m.start_line,
                end_line=m.end_line,
                line_count=m.end_line - m.start_line + 1,
                commit=commit,
                language_tag=opts.language_tag,
            )
            has_comment = bool(m.leading_comment and m.leading_comment.strip())
            if has_comment:
                comment_touched = _intersects(
                    ranges, m.comment_start_line, m.comment_end_line
                )
                if comment_touched:
                    out.append((record, _comment_block(method_id, m.leading_comment), commit))
                else:
                    counters["comment_elsewhere"] = counters.get("comment_elsewhere", 0) + 1
            elif opts.include_uncommented:
                out.append((record, CommentBlock(method_id=method_id, raw_text=""), commit))
            else:
                counters["uncommented_skipped"] = counters.get("uncommented_skipped", 0) + 1
    return out


def mine_method_comment_pairs(
    repo_path: str | Path, opts: MinerOptions | None = None
) -> MiningResult:
    """Walk the history and emit (MethodRecord, CommentBlock, CommitInfo)
    triples satisfying the single-commit rule, oldest commit first.

    Merge commits are excluded unless opts.include_merges. Unparseable or
    unreadable files are counted and skipped, never fatal. Two runs over the
    same repository produce identical records in identical order.
    """
    opts = opts or MinerOptions()
    repo = GitRepo(repo_path)
    commits = repo.list_commits(
        rev=opts.rev, include_merges=opts.include_merges, max_commits=opts.max_commits
    )
    result = MiningResult()
    result.counters["commits"] = len(commits)

    if opts.jobs > 1:
        with ThreadPoolExecutor(max_workers=opts.jobs) as pool:
            per_commit = list(
                pool.map(lambda c: _mine_commit(repo, c, opts, result.counters), commits)
            )
    else:
        per_commit = [_mine_commit(repo, c, opts, result.counters) for c in commits]

    for batch in per_commit:
        result.records.extend(batch)
    result.counters["methods"] = len(result.records)
    result.counters["commented"] = sum(1 for _, c, _ in result.records if not c.empty)
    return result
