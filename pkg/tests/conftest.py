"""Shared fixtures: a deterministic fixture git repository with issue-linked
methods, a matching local issue corpus, and scripted mock chat responses."""

from __future__ import annotations

import json
import os
import socket
import subprocess
from pathlib import Path

import pytest

from supcom.generation import (
    MockChatProvider,
    build_generation_prompt,
    build_retrieval_prompt,
    parse_retrieval_response,
)
from supcom.issues import IssueReport
from supcom.jsonl import read_jsonl
from supcom.records import MethodRecord

GIT_ENV_BASE = {
    "GIT_AUTHOR_NAME": "Fixture Dev",
    "GIT_AUTHOR_EMAIL": "dev@example.invalid",
    "GIT_COMMITTER_NAME": "Fixture Dev",
    "GIT_COMMITTER_EMAIL": "dev@example.invalid",
    "GIT_CONFIG_GLOBAL": "/dev/null",
    "GIT_CONFIG_SYSTEM": "/dev/null",
}


def git(repo: Path, *args: str, timestamp: int | None = None) -> str:
    env = {**os.environ, **GIT_ENV_BASE}
    if timestamp is not None:
        env["GIT_AUTHOR_DATE"] = f"{timestamp} +0000"
        env["GIT_COMMITTER_DATE"] = f"{timestamp} +0000"
    proc = subprocess.run(
        ["git", "-C", str(repo), *args],
        env=env,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        check=True,
    )
    return proc.stdout.decode()


def init_repo(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    subprocess.run(
        ["git", "init", "-q", str(path)],
        env={**os.environ, **GIT_ENV_BASE},
        check=True,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
    )
    return path


def commit_all(repo: Path, message: str, timestamp: int) -> str:
    git(repo, "add", "-A")
    git(repo, "commit", "-q", "-m", message, timestamp=timestamp)
    return git(repo, "rev-parse", "HEAD").strip()


PULSAR_V1 = """\
package org.fix.pulsar;

public class PulsarEndpoint {

    /**
     * Pauses all consumers attached to this endpoint.
     * A paused Pulsar consumer does not request any more messages from the broker.
     */
    public void pauseConsumers(boolean force) {
        for (PulsarConsumer consumer : consumers) {
            consumer.pause(force);
        }
        broker.notifyPaused();
    }

    /**
     * Resumes all consumers so that message delivery starts again.
     */
    public void resumeConsumers() {
        for (PulsarConsumer consumer : consumers) {
            consumer.resume();
        }
        broker.notifyResumed();
    }
}
"""

BULK_V1 = """\
package org.fix.transfer;

public class BulkClient {

    /** Get bulk requests value. */
    public int getBulkRequests() {
        int value = this.bulkRequests;
        return value;
    }

    /**
     * Sets how many requests are grouped into one bulk write.
     * Increasing the bulk size may improve transfer speed but will increase memory usage.
     */
    public void setBulkRequests(int bulkRequests) {
        this.bulkRequests = bulkRequests;
        queue.resize(bulkRequests);
    }

    public void flushQueue() {
        queue.drain();
        queue.reset();
    }
}
"""

BULK_V2 = BULK_V1.replace(
    "    public void flushQueue() {",
    "    /**\n"
    "     * Drains pending writes and resets the queue.\n"
    "     */\n"
    "    public void flushQueue() {",
)

SNAPSHOT_V1 = """\
package org.fix.snapshot;

public class SnapshotManager {

    /**
     * Creates a snapshot of the current state store.
     * Must be followed by a call to clearSnapshot once the copy is persisted.
     */
    public Snapshot snapshot() {
        Snapshot copy = store.copyAll();
        registry.track(copy);
        return copy;
    }

    /**
     * Clears the snapshot so the store can accept writes again.
     * Waiting writers are released in strict arrival order.
     */
    public void clearSnapshot(Snapshot copy) {
        registry.remove(copy);
        store.unlock();
    }

    public Snapshot restoreSnapshot(long id) {
        Snapshot copy = registry.find(id);
        store.load(copy);
        return copy;
    }
}
"""

LEADER_V1 = """\
package org.fix.leader;

public class LeaderRegistry {

    /**
     * Finds a stale leader entry.
     * A stale leader is a replica that won the election but is missing from the cluster state.
     */
    public Replica getStaleLeader() {
        Replica candidate = electionLog.winner();
        return clusterState.contains(candidate) ? null : candidate;
    }

    /**
     * Evicts the given leader and frees its registry slot.
     */
    public void evictLeader(Replica leader) {
        entries.remove(leader);
        slots.release(leader);
    }
}
"""

UTIL_V1 = """\
package org.fix.util;

public class Durations {

    /**
     * Formats a duration into a human readable string.
     */
    public String format(long millis) {
        long seconds = millis / 1000;
        return seconds + "s";
    }
}
"""

ISSUES = {
    "CAMEL-17551": {
        "key": "CAMEL-17551",
        "title": "Support pausing consumers on the Pulsar endpoint",
        "body": (
            "Users need a way to stop message delivery temporarily without closing the endpoint.\n"
            "\n"
            "Pauses all consumers attached to this endpoint.\n"
            "A paused Pulsar consumer does not request any more messages from the broker.\n"
            "Resumes all consumers so that message delivery starts again.\n"
        ),
        "discussion": [
            {
                "author": "reviewer",
                "timestamp": "2022-02-01T10:00:00Z",
                "text": "Please make sure the pause survives reconnects.",
            }
        ],
    },
    "HBASE-2001": {
        "key": "HBASE-2001",
        "title": "Make bulk request batching configurable",
        "body": (
            "Sets how many requests are grouped into one bulk write.\n"
            "Increasing the bulk size may improve transfer speed but will increase memory usage.\n"
            "The bulk requests value drives how many writes are batched together.\n"
            "\n"
            "```\n"
            "BulkClient client = new BulkClient();\n"
            "client.setBulkRequests(5);\n"
            "```\n"
        ),
        "discussion": [],
    },
    "FLINK-3100": {
        "key": "FLINK-3100",
        "title": "Snapshot lifecycle for the state store",
        "body": (
            "Creates a snapshot of the current state store.\n"
            "Must be followed by a call to clearSnapshot once the copy is persisted.\n"
            "Clears the snapshot so the store can accept writes again.\n"
        ),
        "discussion": [
            {
                "author": "committer",
                "timestamp": "2021-06-11T09:30:00Z",
                "text": "Restore should reuse the registry lookup.",
            }
        ],
    },
    "DERBY-4821": {
        "key": "DERBY-4821",
        "title": "Evict stale leaders from the registry",
        "body": (
            "Finds a stale leader entry.\n"
            "A stale leader is a replica that won the election but is missing from the cluster state.\n"
            "Evicts the given leader and frees its registry slot.\n"
            "The cleanup job runs every five minutes in production.\n"
        ),
        "discussion": [],
    },
}

# Scripted mock responses per method: evidence quotes must be verbatim issue
# sentences; comment blocks are what the "model" writes back.
SCRIPTS: dict[str, dict] = {
    "PulsarEndpoint.pauseConsumers": {
        "evidence": {
            "Functionality": ["Pauses all consumers attached to this endpoint."],
            "Implication": [
                "A paused Pulsar consumer does not request any more messages from the broker."
            ],
        },
        "comment": {
            "Functionality": "Pauses all consumers attached to this endpoint.",
            "Implication": (
                "A paused Pulsar consumer does not request any more messages from the broker."
            ),
        },
    },
    "PulsarEndpoint.resumeConsumers": {
        "evidence": {
            "Functionality": ["Resumes all consumers so that message delivery starts again."]
        },
        "comment": {
            "Functionality": "Resumes all consumers so that message delivery starts again."
        },
    },
    "BulkClient.getBulkRequests": {
        "evidence": {
            "Functionality": ["The bulk requests value drives how many writes are batched together."]
        },
        "comment": {
            "Functionality": "The bulk requests value drives how many writes are batched together."
        },
    },
    "BulkClient.setBulkRequests": {
        "evidence": {
            "Functionality": ["Sets how many requests are grouped into one bulk write."],
            "Implication": [
                "Increasing the bulk size may improve transfer speed but will increase memory usage."
            ],
        },
        "comment": {
            "Functionality": "Sets how many requests are grouped into one bulk write.",
            "Implication": (
                "Increasing the bulk size may improve transfer speed but will increase memory usage."
            ),
        },
    },
    "SnapshotManager.snapshot": {
        "evidence": {
            "Functionality": ["Creates a snapshot of the current state store."],
            "Directive": [
                "Must be followed by a call to clearSnapshot once the copy is persisted."
            ],
        },
        "comment": {
            "Functionality": "Creates a snapshot of the current state store.",
            "Directive": "Must be followed by a call to clearSnapshot once the copy is persisted.",
        },
    },
    "SnapshotManager.clearSnapshot": {
        "evidence": {
            "Functionality": ["Clears the snapshot so the store can accept writes again."]
        },
        "comment": {
            "Functionality": "Clears the snapshot so the store can accept writes again."
        },
    },
    "LeaderRegistry.getStaleLeader": {
        "evidence": {
            "Functionality": ["Finds a stale leader entry."],
            "Concept": [
                "A stale leader is a replica that won the election but is missing from the cluster state."
            ],
        },
        "comment": {
            "Functionality": "Finds a stale leader entry.",
            "Concept": (
                "A stale leader is a replica that won the election but is missing from the "
                "cluster state."
            ),
            # verbatim issue sentence that names none of the method's
            # identifiers: verifiable but not code-relevant
            "Rationale": "The cleanup job runs every five minutes in production.",
        },
    },
    "LeaderRegistry.evictLeader": {
        "evidence": {
            "Functionality": ["Evicts the given leader and frees its registry slot."]
        },
        "comment": {
            "Functionality": "Evicts the given leader and frees its registry slot.",
            # names identifiers but is unsupported by any issue sentence:
            # code-relevant but not verifiable
            "Rationale": "The slots release for a leader waits for quorum barriers downstream.",
        },
    },
}


def build_fixture_repo(path: Path) -> Path:
    """Six commits: four issue-keyed feature commits, one unkeyed commit, and
    one comment-only follow-up (method body untouched, so no pair)."""
    repo = init_repo(path)
    src = repo / "src/main/java/org/fix"

    (src / "pulsar").mkdir(parents=True)
    (src / "pulsar/PulsarEndpoint.java").write_text(PULSAR_V1, encoding="utf-8")
    commit_all(repo, "CAMEL-17551: support pausing consumers on the Pulsar endpoint", 1_650_000_000)

    (src / "transfer").mkdir(parents=True)
    (src / "transfer/BulkClient.java").write_text(BULK_V1, encoding="utf-8")
    commit_all(repo, "HBASE-2001: make bulk request batching configurable", 1_650_000_100)

    (src / "snapshot").mkdir(parents=True)
    (src / "snapshot/SnapshotManager.java").write_text(SNAPSHOT_V1, encoding="utf-8")
    commit_all(repo, "FLINK-3100: snapshot lifecycle for the state store", 1_650_000_200)

    (src / "leader").mkdir(parents=True)
    (src / "leader/LeaderRegistry.java").write_text(LEADER_V1, encoding="utf-8")
    commit_all(repo, "DERBY-4821: evict stale leaders from the registry", 1_650_000_300)

    (src / "util").mkdir(parents=True)
    (src / "util/Durations.java").write_text(UTIL_V1, encoding="utf-8")
    commit_all(repo, "add duration formatting helper", 1_650_000_400)

    (src / "transfer/BulkClient.java").write_text(BULK_V2, encoding="utf-8")
    commit_all(repo, "HBASE-2001: document the flush queue behaviour", 1_650_000_500)
    return repo


def write_issue_corpus(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    for key, payload in ISSUES.items():
        (path / f"{key}.json").write_text(
            json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8"
        )
    return path


def render_retrieval_response(evidence: dict[str, list[str]]) -> str:
    parts = []
    for type_name, quotes in evidence.items():
        lines = "\n".join(f"- {q}" for q in quotes)
        parts.append(f"## {type_name}\n{lines}")
    return "\n\n".join(parts) + "\n"


def render_generation_response(comment: dict[str, str]) -> str:
    parts = [f"## {type_name}\n{text}" for type_name, text in comment.items()]
    return "\n\n".join(parts) + "\n"


def script_mock_responses(out_dir: Path, fixtures_dir: Path) -> int:
    """Script retrieval + generation responses for every linked, commented
    method whose qualified name appears in SCRIPTS. Requires mine/ingest/link
    outputs under out_dir. Returns the number of scripted methods."""
    methods = [MethodRecord.from_dict(d) for d in read_jsonl(out_dir / "methods.jsonl")]
    issues = {d["key"]: IssueReport.from_dict(d) for d in read_jsonl(out_dir / "issues.jsonl")}
    links = {
        d["method_id"]: d["issue_key"]
        for d in read_jsonl(out_dir / "links.jsonl")
        if d.get("resolved")
    }
    mock = MockChatProvider(fixtures_dir)
    scripted = 0
    for method in methods:
        script = SCRIPTS.get(method.qualified_name)
        issue_key = links.get(method.id)
        if script is None or issue_key is None:
            continue
        issue = issues[issue_key]
        retrieval_prompt = build_retrieval_prompt(method, issue)
        retrieval_response = render_retrieval_response(script["evidence"])
        mock.script(retrieval_prompt.system, retrieval_prompt.user, retrieval_response)
        evidence, _ = parse_retrieval_response(retrieval_response, issue, method.id)
        generation_prompt = build_generation_prompt(method, evidence)
        mock.script(
            generation_prompt.system,
            generation_prompt.user,
            render_generation_response(script["comment"]),
        )
        scripted += 1
    return scripted


def make_config(
    repo: Path,
    issues_dir: Path,
    fixtures_dir: Path,
    out_dir: Path,
    include_uncommented: bool = False,
    mode: str = "dataset",
) -> dict:
    return {
        "repo": {
            "path": str(repo),
            "name": "fixturerepo",
            "extensions": [".java"],
            "include_uncommented": include_uncommented,
        },
        "issues": {"source": "directory", "dir": str(issues_dir)},
        "providers": {"chat": {"kind": "mock", "fixtures_dir": str(fixtures_dir)}},
        "generation": {"mode": mode},
        "output_dir": str(out_dir),
    }


@pytest.fixture(scope="session")
def fixture_world(tmp_path_factory) -> dict:
    """Built once per session: repo + issue corpus."""
    base = tmp_path_factory.mktemp("world")
    repo = build_fixture_repo(base / "repo")
    issues_dir = write_issue_corpus(base / "issues")
    return {"repo": repo, "issues_dir": issues_dir, "base": base}


@pytest.fixture()
def deny_network(monkeypatch):
    """Fail the test on any socket connection attempt."""

    def _blocked(*args, **kwargs):
        raise AssertionError("network access attempted during an offline run")

    monkeypatch.setattr(socket.socket, "connect", _blocked)
    monkeypatch.setattr(socket, "create_connection", _blocked)
    yield
