#!/usr/bin/env python3
"""Walkthrough: issue ingestion, sentence segmentation, and the 70%
word-overlap rule that selects comment sentences verifiable in an issue."""

from supcom.issues import ingest_issue
from supcom.textproc import overlap_candidates, word_overlap_ratio

ISSUE = {
    "key": "CAMEL-17551",
    "title": "Support pausing consumers on the endpoint",
    "body": (
        "Users need a way to stop message delivery temporarily.\n"
        "A paused consumer does not request any more messages from the broker.\n"
        "\n"
        "```\n"
        "endpoint.pauseConsumers(true);\n"
        "```\n"
    ),
    "discussion": [
        {"author": "reviewer", "timestamp": "2022-02-01", "text": "Make sure pause survives reconnects."}
    ],
}

COMMENT_SENTENCES = [
    "A paused consumer does not request messages from the broker.",  # near-verbatim
    "This method is thread safe and quite fast.",  # nothing like it in the issue
]


def main():
    issue = ingest_issue(ISSUE)
    print(f"{issue.key}: {issue.word_length} words, {len(issue.sentences)} sentences")
    for s in issue.sentences:
        tag = "code " if s.is_code_block else s.source_field
        print(f"  [{s.index}] ({tag}) {s.text}")

    print("\nOverlap of each comment sentence against each issue sentence:")
    for cs in COMMENT_SENTENCES:
        ratios = [round(word_overlap_ratio(cs, isent.text), 3) for isent in issue.sentences]
        print(f"  {cs!r}: {ratios}")

    kept = overlap_candidates(
        COMMENT_SENTENCES, [s.text for s in issue.sentences], threshold=0.7
    )
    print("\nKept by the strict >0.7 rule:")
    for comment, best, ratio in kept:
        print(f"  {comment!r}\n    best issue sentence: {best!r} (ratio {ratio:.3f})")
    print("\nThe thread-safety claim is dropped: no issue sentence backs it.")


if __name__ == "__main__":
    main()
