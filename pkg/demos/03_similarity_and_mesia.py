#!/usr/bin/env python3
"""Walkthrough: the offline embedding provider, cosine similarity with the
strict 0.6 threshold, and the supplementarity surrogate with its 3.0-bit
filter."""

from supcom.embedding import OfflineHashingProvider, exceeds_threshold, sentence_similarity
from supcom.mesia import build_background_model, mesia_score
from supcom.records import CommentBlock, CommitInfo, MethodRecord


def main():
    provider = OfflineHashingProvider()
    pairs = [
        ("A paused consumer requests nothing", "A paused consumer requests nothing"),
        ("A paused consumer requests nothing", "paused consumer requests nothing again"),
        ("pause the consumer", "weather is nice today"),
    ]
    print("Offline-provider similarities (deterministic, no downloads):")
    for s, t in pairs:
        sim = sentence_similarity(s, t, provider)
        print(f"  {sim:+.4f}  above 0.6 -> {exceeds_threshold(sim)!s:5}  {s!r} vs {t!r}")

    method = MethodRecord(
        id="demo",
        repo="demo",
        file_path="BulkClient.java",
        qualified_name="BulkClient.setBulkRequests",
        signature="public void setBulkRequests(int bulkRequests)",
        body=(
            "public void setBulkRequests(int bulkRequests) {\n"
            "    this.bulkRequests = bulkRequests;\n"
            "    queue.resize(bulkRequests);\n"
            "}"
        ),
        start_line=1,
        end_line=4,
        line_count=4,
        commit=CommitInfo(hash="0" * 40, message="", author_time=0),
    )
    corpus = [
        "Sets how many requests are grouped into one bulk write.",
        "Clears the snapshot so the store can accept writes again.",
        "Formats a duration into a human readable string.",
        "Finds a stale leader entry in the registry.",
    ]
    model = build_background_model(corpus)

    echo = CommentBlock(method_id="demo", raw_text="Set bulk requests queue.")
    rich = CommentBlock(
        method_id="demo",
        raw_text="Increasing this value may improve transfer speed but will increase memory usage.",
    )
    print("\nSupplementarity (mesia_surrogate, threshold keep >= 3.0 bits):")
    for label, block in (("code-echo ", echo), ("insightful", rich)):
        score = mesia_score(block, method, model)
        verdict = "kept" if score.value >= 3.0 else "filtered out"
        print(
            f"  {label}: {score.value:6.3f} bits over {score.novel_token_count} novel tokens -> {verdict}"
        )
    print("\nA comment that only restates identifiers carries zero novel information.")


if __name__ == "__main__":
    main()
