"""Thin wrapper over the system git for history listing, per-commit file
snapshots, and post-image diff line ranges."""

from __future__ import annotations

import re
import subprocess
from pathlib import Path

from .errors import RepoError
from .records import CommitInfo

_HUNK_RE = re.compile(r"^@@ -\d+(?:,\d+)? \+(\d+)(?:,(\d+))? @@")


class GitRepo:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        if not self.path.is_dir():
            raise RepoError(f"not a directory: {self.path}")
        try:
            self._run("rev-parse", "--git-dir")
        except RepoError as exc:
            raise RepoError(f"not a readable git repository: {self.path} ({exc})") from None

    def _run(self, *args: str) -> str:
        proc = subprocess.run(
            ["git", "-C", str(self.path), *args],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )
        if proc.returncode != 0:
            raise RepoError(
                f"git {' '.join(args)} failed: {proc.stderr.decode('utf-8', 'replace').strip()}"
            )
        return proc.stdout.decode("utf-8", "replace")

    def list_commits(
        self,
        rev: str = "HEAD",
        include_merges: bool = False,
        max_commits: int | None = None,
    ) -> list[CommitInfo]:
        """Commits oldest-first. Deterministic for a fixed repository."""
        args = ["log", "--reverse", "--format=%H%x1f%at%x1f%B%x1e"]
        if not include_merges:
            args.append("--no-merges")
        args.append(rev)
        out = self._run(*args)
        commits: list[CommitInfo] = []
        for chunk in out.split("\x1e"):
            chunk = chunk.strip("\n")
            if not chunk.strip():
                continue
            sha, at, message = chunk.split("\x1f", 2)
            commits.append(
                CommitInfo(
                    hash=sha.strip(),
                    message=message.strip("\n"),
                    author_time=int(at),
                    changed_paths=[],
                )
            )
        if max_commits is not None:
            commits = commits[:max_commits]
        return commits

    def changed_files(self, sha: str) -> list[tuple[str, str]]:
        """(status, path) pairs for one commit; statuses as in git name-status
        (A, M, D, R100 old new...). Renames report the new path."""
        out = self._run("diff-tree", "-r", "--root", "--no-commit-id", "--name-status", sha)
        pairs: list[tuple[str, str]] = []
        for line in out.splitlines():
            if not line.strip():
                continue
            parts = line.split("\t")
            status = parts[0]
            path = parts[-1]
            pairs.append((status, path))
        return pairs

    def file_at(self, sha: str, path: str) -> str:
        return self._run("show", f"{sha}:{path}")

    def diff_post_ranges(self, sha: str, path: str) -> list[tuple[int, int]]:
        """Post-image line ranges touched by the commit for one file.

        A pure deletion (new-count 0) is represented as the two lines around
        the deletion point so removals inside a span still intersect it.
        """
        out = self._run("show", "--format=", "--unified=0", sha, "--", path)
        ranges: list[tuple[int, int]] = []
        for line in out.splitlines():
            m = _HUNK_RE.match(line)
            if not m:
                continue
            start = int(m.group(1))
            count = int(m.group(2)) if m.group(2) is not None else 1
            if count == 0:
                ranges.append((max(1, start), start + 1))
            else:
                ranges.append((start, start + count - 1))
        return ranges
