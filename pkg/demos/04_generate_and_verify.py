#!/usr/bin/env python3
"""Walkthrough: evidence retrieval and comment generation with the scripted
mock chat provider, then the two-criterion hallucination filter."""

import tempfile

from supcom.embedding import OfflineHashingProvider
from supcom.generation import (
    MockChatProvider,
    build_generation_prompt,
    build_retrieval_prompt,
    parse_retrieval_response,
    run_pipeline,
)
from supcom.issues import ingest_issue
from supcom.records import CommitInfo, MethodRecord
from supcom.verification import OfflineSideScorer, quadrant_stats, verify_comment

METHOD = MethodRecord(
    id="demo",
    repo="demo",
    file_path="PulsarEndpoint.java",
    qualified_name="PulsarEndpoint.pauseConsumers",
    signature="public void pauseConsumers(boolean force)",
    body=(
        "public void pauseConsumers(boolean force) {\n"
        "    for (PulsarConsumer consumer : consumers) {\n"
        "        consumer.pause(force);\n"
        "    }\n"
        "}"
    ),
    start_line=10,
    end_line=14,
    line_count=5,
    commit=CommitInfo(hash="a" * 40, message="CAMEL-17551: pause support", author_time=0),
)

ISSUE = ingest_issue(
    {
        "key": "CAMEL-17551",
        "title": "Support pausing Pulsar consumers",
        "body": (
            "Users need to stop delivery temporarily.\n"
            "A paused Pulsar consumer does not request any more messages from the broker.\n"
        ),
    }
)

RETRIEVAL_RESPONSE = """\
## Implication
- A paused Pulsar consumer does not request any more messages from the broker.
"""

# the second sentence is a hallucination: nothing in the issue supports it
GENERATION_RESPONSE = """\
## Implication
A paused Pulsar consumer does not request any more messages from the broker.
The pause also compacts the subscription ledger nightly.
"""


def main():
    with tempfile.TemporaryDirectory() as fixtures:
        mock = MockChatProvider(fixtures)
        retrieval = build_retrieval_prompt(METHOD, ISSUE)
        mock.script(retrieval.system, retrieval.user, RETRIEVAL_RESPONSE)
        evidence, _ = parse_retrieval_response(RETRIEVAL_RESPONSE, ISSUE, METHOD.id)
        generation = build_generation_prompt(METHOD, evidence)
        mock.script(generation.system, generation.user, GENERATION_RESPONSE)

        outcome = run_pipeline(METHOD, ISSUE, mock)
        print(f"pipeline status: {outcome.status}")
        print("evidence:", {k: [r.index for r in v] for k, v in outcome.evidence.entries.items()})

        provider = OfflineHashingProvider()
        verify_comment(
            outcome.comment,
            METHOD,
            ISSUE,
            embedding_provider=provider,
            side_scorer=OfflineSideScorer(provider=provider),
        )
        print("\nverification per sentence:")
        for s in outcome.comment.sentences:
            print(
                f"  retained={s.retained!s:5} relevant={s.code_relevant.value!s:5} "
                f"(via {s.code_relevant.criterion}) verifiable={s.verifiable.value!s:5} "
                f"(best sim {s.verifiable.score:.3f})\n    {s.text!r}"
            )
        stats = quadrant_stats([outcome.comment])
        print("\nquadrants:", stats.to_dict()["counts"])
        print("The invented 'ledger' sentence fails verifiability and is filtered out.")


if __name__ == "__main__":
    main()
