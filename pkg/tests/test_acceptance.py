"""Acceptance gate: one test per criterion, each printing a single pass/fail
line under pytest -v. Tolerances are pinned here and nowhere else."""

import json
import math
import random
import time

import numpy as np
import pytest

from conftest import (
    build_fixture_repo,
    commit_all,
    init_repo,
    make_config,
    script_mock_responses,
    write_issue_corpus,
)
from supcom.cli import main as cli_main
from supcom.embedding import (
    EmbeddingCache,
    OfflineHashingProvider,
    cosine_similarity,
    embed,
    sentence_similarity,
)
from supcom.evaluation import (
    CATEGORY_FULL,
    CATEGORY_NONE,
    CATEGORY_PARTIAL,
    CoverageResult,
    aggregate_coverage,
    categorize,
    coverage_evaluate,
)
from supcom.generation import GeneratedComment
from supcom.issues import IssueReport, IssueSentence
from supcom.jsonl import read_jsonl, write_json
from supcom.mesia import build_background_model, code_token_set, filter_supplementary, mesia_score
from supcom.miner import MinerOptions, extract_issue_keys, mine_method_comment_pairs
from supcom.records import (
    CommentBlock,
    CommentSentence,
    CommitInfo,
    MethodRecord,
    RelevanceCheck,
    VerifiabilityCheck,
)
from supcom.textproc import overlap_candidates, word_overlap_ratio
from supcom.verification import (
    is_code_relevant,
    is_issue_verifiable,
    quadrant_stats,
    verify_comment,
)

GOLDEN = "tests/golden/report.md"

# Published coverage aggregates the ratio arithmetic must reproduce:
# (label, n_full, n_partial, printed_percent), dataset size 443. The first
# row's printed figure (7.0) is inconsistent with its own counts under every
# rounding convention (33/443 = 7.4%) and is pinned as a strict xfail.
N_REFERENCE = 443
REFERENCE_ROWS = [
    ("row01-before", 23, 10, 7.0),
    ("row01-after", 16, 7, 5.1),
    ("row02-before", 118, 36, 34.7),
    ("row02-after", 83, 27, 24.8),
    ("row03-before", 130, 33, 36.7),
    ("row03-after", 94, 28, 27.5),
    ("row04-before", 111, 38, 33.6),
    ("row04-after", 93, 33, 28.4),
    ("row05-before", 173, 41, 48.3),
    ("row05-after", 140, 34, 39.2),
    ("row06-before", 257, 37, 66.3),
    ("row06-after", 230, 39, 60.7),
    ("row07-before", 219, 49, 60.4),
    ("row07-after", 195, 49, 55.0),
    ("row08-before", 237, 42, 62.9),
    ("row08-after", 208, 44, 56.8),
    ("row09-before", 267, 52, 72.0),
    ("row09-after", 243, 52, 66.5),
    ("row10-before", 278, 42, 72.2),
    ("row10-after", 254, 41, 66.5),
    ("row11-before", 116, 43, 35.8),
    ("row11-after", 93, 33, 28.4),
    ("row12-before", 129, 39, 37.9),
    ("row12-after", 107, 33, 31.6),
    ("row13-before", 266, 35, 67.9),
    ("row13-after", 239, 36, 62.0),
    ("row14-before", 236, 32, 60.4),
    ("row14-after", 207, 33, 54.1),
    ("row15-before", 260, 49, 69.7),
    ("row15-after", 229, 50, 62.9),
    ("row16-before", 279, 47, 73.5),
    ("row16-after", 258, 49, 69.3),
    ("row17-before", 358, 34, 88.4),
    ("row17-after", 335, 37, 83.9),
    ("row18-before", 113, 42, 35.0),
    ("row18-after", 98, 35, 30.0),
    ("row19-before", 332, 50, 86.2),
    ("row19-after", 310, 49, 81.0),
]


def synthetic_results(n_full: int, n_partial: int) -> list[CoverageResult]:
    out = [CoverageResult(method_id=f"f{i}", category=CATEGORY_FULL) for i in range(n_full)]
    out += [CoverageResult(method_id=f"p{i}", category=CATEGORY_PARTIAL) for i in range(n_partial)]
    return out


@pytest.mark.parametrize(
    "label,n_full,n_partial,printed",
    [
        pytest.param(
            *row,
            marks=(
                pytest.mark.xfail(
                    reason="source table misprint: 33/443 is 7.4%, printed 7.0%", strict=True
                )
                if row[0] == "row01-before"
                else ()
            ),
        )
        for row in REFERENCE_ROWS
    ],
)
def test_coverage_ratio_oracle(label, n_full, n_partial, printed):
    started = time.perf_counter()
    _, _, _, ratio = aggregate_coverage(synthetic_results(n_full, n_partial), N_REFERENCE)
    assert abs(ratio * 100 - printed) <= 0.1 + 1e-9, label
    assert time.perf_counter() - started < 1.0


def test_partition_laws():
    started = time.perf_counter()
    rng = random.Random(42)
    cases = 0
    while cases < 10_000:
        n_methods = rng.randint(1, 12)
        results = []
        for i in range(n_methods):
            flags = [rng.random() < 0.5 for _ in range(rng.randint(0, 5))]
            category = categorize(flags)
            # category definitions must match the per-sentence covered flags
            if not flags or not any(flags):
                assert category == CATEGORY_NONE
            elif all(flags):
                assert category == CATEGORY_FULL
            else:
                assert category == CATEGORY_PARTIAL
            results.append(CoverageResult(method_id=f"m{i}", category=category))
            cases += 1
        n_total = n_methods + rng.randint(0, 4)
        n_full, n_partial, n_none, ratio = aggregate_coverage(results, n_total)
        assert n_full + n_partial + n_none == n_total
        assert 0.0 <= ratio <= 1.0
    assert time.perf_counter() - started < 5.0


def test_filtering_monotonicity():
    rng = random.Random(7)
    provider = OfflineHashingProvider()
    cache = EmbeddingCache()
    vocab = [f"tok{i}" for i in range(30)]

    def sentence() -> str:
        return " ".join(rng.choice(vocab) for _ in range(rng.randint(2, 6)))

    for _ in range(150):
        n_methods = rng.randint(1, 5)
        pre_results, post_results = [], []
        pre_sents = post_sents = 0
        for i in range(n_methods):
            manual = [CommentSentence(text=sentence()) for _ in range(rng.randint(1, 3))]
            generated = []
            for _ in range(rng.randint(0, 5)):
                text = manual[0].text if rng.random() < 0.4 else sentence()
                generated.append(
                    CommentSentence(text=text, info_type="Concept", retained=rng.random() < 0.5)
                )
            retained = [g for g in generated if g.retained]
            pre_sents += len(generated)
            post_sents += len(retained)
            pre_results.append(
                coverage_evaluate(generated, manual, provider, cache=cache, method_id=f"m{i}")
            )
            post_results.append(
                coverage_evaluate(retained, manual, provider, cache=cache, method_id=f"m{i}")
            )
        assert post_sents <= pre_sents
        *_, pre_ratio = aggregate_coverage(pre_results, n_methods)
        *_, post_ratio = aggregate_coverage(post_results, n_methods)
        assert post_ratio <= pre_ratio


def test_verification_conjunction_and_idempotence():
    rng = random.Random(9)
    # conjunction over randomized annotation inputs
    for _ in range(500):
        r, v = rng.random() < 0.5, rng.random() < 0.5
        s = CommentSentence(
            text="t",
            info_type="Concept",
            code_relevant=RelevanceCheck(value=r),
            verifiable=VerifiabilityCheck(value=v),
            retained=r and v,
        )
        assert s.retained == (s.code_relevant.value and s.verifiable.value)

    provider = OfflineHashingProvider()
    cache = EmbeddingCache()
    method = MethodRecord(
        id="m",
        repo="r",
        file_path="F.java",
        qualified_name="C.f",
        signature="void f()",
        body="void f() { consumer.pause(); }",
        start_line=1,
        end_line=3,
        line_count=3,
        commit=CommitInfo(hash="0" * 40, message="", author_time=0),
    )
    issue = IssueReport(
        key="I-1",
        title="",
        body="",
        sentences=[
            IssueSentence(issue_key="I-1", index=0, text="The consumer must pause.", source_field="body")
        ],
    )
    gc = GeneratedComment(
        method_id="m",
        sentences=[CommentSentence(text="The consumer must pause.", info_type="Directive")],
    )
    once = verify_comment(gc, method, issue, embedding_provider=provider, cache=cache)
    snapshot = json.dumps([s.to_dict() for s in once.sentences], sort_keys=True)
    twice = verify_comment(once, method, issue, embedding_provider=provider, cache=cache)
    assert json.dumps([s.to_dict() for s in twice.sentences], sort_keys=True) == snapshot

    # boundary pins
    class FixedProvider:
        id = "fixed"
        dim = 2

        def embed_batch(self, texts):
            from supcom.embedding import EmbeddingVector

            mapping = {"s": [1.0, 0.0], "t": [0.6, 0.8]}
            return [
                EmbeddingVector(values=np.array(mapping[t]), dim=2, provider_id="fixed")
                for t in texts
            ]

    check = is_issue_verifiable(
        "s",
        [IssueSentence(issue_key="I", index=0, text="t", source_field="body")],
        FixedProvider(),
        cache=EmbeddingCache(),
    )
    assert check.score == pytest.approx(0.6, abs=1e-12) and not check.value

    class ZeroSide:
        id = "zero"

        def score(self, code, sentence):
            return 0.0

    rel = is_code_relevant("totally unrelated words", method, side_scorer=ZeroSide())
    assert not rel.value  # a zero alignment score is not positive

    comment = "t1 t2 t3 t4 t5 t6 t7 t8 t9 t10"
    issue_sentence = "t1 t2 t3 t4 t5 t6 t7 zz yy"
    assert word_overlap_ratio(comment, issue_sentence) == pytest.approx(0.7)
    assert overlap_candidates([comment], [issue_sentence], threshold=0.7) == []


def test_verbatim_verifiability_law():
    rng = random.Random(23)
    provider = OfflineHashingProvider()
    cache = EmbeddingCache()
    vocab = [f"word{i}" for i in range(60)]
    for i in range(100):
        text = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 10)))
        distractors = [
            IssueSentence(
                issue_key="I",
                index=j,
                text=" ".join(rng.choice(vocab) for _ in range(rng.randint(1, 10))),
                source_field="body",
            )
            for j in range(rng.randint(0, 3))
        ]
        target = IssueSentence(
            issue_key="I", index=len(distractors), text=text, source_field="body"
        )
        check = is_issue_verifiable(text, distractors + [target], provider, cache=cache)
        assert check.value, f"case {i}"
        assert check.score == pytest.approx(1.0, abs=1e-9)


FIXTURE_SENTENCES = [
    "pause the consumer now",
    "resume delivery after the window",
    "broker load drops sharply",
    "the queue drains in order",
    "leader election is stable",
    "a stale replica wins sometimes",
    "snapshots copy the whole store",
    "clearing unlocks the writers",
    "bulk writes batch many requests",
    "memory usage grows with batching",
    "retries use exponential backoff",
    "the cache stores unit vectors",
    "tokens hash to sparse positions",
    "prose sentences split on punctuation",
    "identifiers keep their exact spelling",
    "coverage needs strict thresholds",
    "quadrants partition every sentence",
    "manifests record provider identifiers",
    "golden files freeze the report",
    "the pipeline stays deterministic",
]


def test_similarity_engine_oracle():
    provider = OfflineHashingProvider()
    cache = EmbeddingCache()
    raw = {t: provider.embed_batch([t])[0].values for t in FIXTURE_SENTENCES}
    for s in FIXTURE_SENTENCES:
        for t in FIXTURE_SENTENCES:
            engine = sentence_similarity(s, t, provider, cache)
            a, b = raw[s], raw[t]
            oracle = float(np.dot(a, b) / (math.sqrt(float(np.dot(a, a))) * math.sqrt(float(np.dot(b, b)))))
            assert abs(engine - min(1.0, max(-1.0, oracle))) <= 1e-9

    rng = random.Random(31)
    vocab = [f"v{i}" for i in range(40)]
    for _ in range(300):
        s = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 9)))
        t = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 9)))
        assert sentence_similarity(s, t, provider, cache) == sentence_similarity(t, s, provider, cache)
        assert sentence_similarity(s, s, provider, cache) == pytest.approx(1.0, abs=1e-9)


def test_overlap_oracle():
    rng = random.Random(77)
    vocab = [f"tok{i}" for i in range(16)]

    def brute_force(comments, issues, threshold):
        kept = []
        for c in comments:
            ratios = [word_overlap_ratio(c, i) for i in issues]
            if not ratios:
                continue
            best = max(ratios)
            if best > threshold:
                kept.append((c, issues[ratios.index(best)], best))
        return kept

    for _ in range(1000):
        comments = [
            " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 7)))
            for _ in range(rng.randint(0, 5))
        ]
        issues = [
            " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 7)))
            for _ in range(rng.randint(0, 7))
        ]
        threshold = rng.choice([0.3, 0.5, 0.7, 0.9])
        assert overlap_candidates(comments, issues, threshold=threshold) == brute_force(
            comments, issues, threshold
        )
    assert word_overlap_ratio("a b c d e", "a b c d zz") == pytest.approx(0.8)


def test_mesia_surrogate_checks():
    method = MethodRecord(
        id="m",
        repo="r",
        file_path="F.java",
        qualified_name="C.f",
        signature="void f()",
        body="void f() { pauseConsumers(broker); }",
        start_line=1,
        end_line=3,
        line_count=3,
        commit=CommitInfo(hash="0" * 40, message="", author_time=0),
    )
    model = build_background_model(["a b", "a"])  # unseen probability 1/6

    echo = CommentBlock(method_id="m", raw_text="pause consumers broker f void")
    assert mesia_score(echo, method, model).value == 0.0

    single = CommentBlock(method_id="m", raw_text="pause latency")
    assert mesia_score(single, method, model).value == pytest.approx(math.log2(6), abs=1e-9)

    rng = random.Random(3)
    words = ["quorum", "latency", "shrinks", "nightly", "compaction"]
    base = mesia_score(CommentBlock(method_id="m", raw_text=" ".join(words)), method, model).value
    for _ in range(10):
        rng.shuffle(words)
        assert mesia_score(
            CommentBlock(method_id="m", raw_text=" ".join(words)), method, model
        ).value == pytest.approx(base, abs=0.0)

    def block(value):
        b = CommentBlock(method_id=f"b{value}", raw_text="x")
        b.mesia = value
        return b

    retained, rejected = filter_supplementary([block(2.999), block(3.0), block(3.001), block(0.0)])
    assert [b.mesia for b in retained] == [3.0, 3.001]
    assert [b.mesia for b in rejected] == [2.999, 0.0]

    # 50-comment fixture mean equals an independent rescoring
    vocab = [f"word{i}" for i in range(40)]
    corpus = [" ".join(rng.choice(vocab) for _ in range(rng.randint(3, 10))) for _ in range(50)]
    fixture_model = build_background_model(corpus)
    known = code_token_set(method)
    got = [
        mesia_score(CommentBlock(method_id="m", raw_text=t), method, fixture_model).value
        for t in corpus
    ]
    counts = {}
    for text in corpus:
        for tok in "".join(ch.lower() if ch.isalnum() else " " for ch in text).split():
            counts[tok] = counts.get(tok, 0) + 1
    total, vocab_size = sum(counts.values()), len(counts)
    want = []
    for text in corpus:
        novel = sorted(
            set("".join(ch.lower() if ch.isalnum() else " " for ch in text).split()) - known
        )
        if not novel:
            want.append(0.0)
        else:
            want.append(
                sum(-math.log2((counts.get(t, 0) + 1) / (total + vocab_size + 1)) for t in novel)
                / len(novel)
            )
    assert sum(got) / 50 == pytest.approx(sum(want) / 50, abs=1e-12)


def test_end_to_end_deterministic_run(fixture_world, tmp_path, deny_network):
    started = time.perf_counter()
    golden = open(GOLDEN, "rb").read()

    def run(out_dir, fixtures_dir, resume_flag):
        cfg_path = out_dir.parent / f"{out_dir.name}-config.json"
        write_json(
            cfg_path,
            make_config(fixture_world["repo"], fixture_world["issues_dir"], fixtures_dir, out_dir),
        )
        for stage in ("mine", "ingest-issues", "link"):
            assert cli_main([stage, "--config", str(cfg_path), resume_flag, "--offline"]) == 0
        script_mock_responses(out_dir, fixtures_dir)
        for stage in ("dataset", "generate", "evaluate"):
            assert cli_main([stage, "--config", str(cfg_path), resume_flag, "--offline"]) == 0
        return (out_dir / "report.md").read_bytes()

    first = run(tmp_path / "out1", tmp_path / "mock1", "--resume")
    assert first == golden
    second = run(tmp_path / "out2", tmp_path / "mock2", "--no-resume")
    assert second == golden

    # the pause-consumers analog retains its Implication sentence
    needle = "does not request any more messages from the broker"
    retained_impl = [
        s
        for row in read_jsonl(tmp_path / "out1" / "generated.jsonl")
        for s in row["sentences"]
        if s.get("retained") and s.get("info_type") == "Implication" and needle in s["text"]
    ]
    assert retained_impl, "the broker implication sentence must survive filtering"

    # filtering monotonicity on the real batch, mirroring the report row pair
    report = json.loads((tmp_path / "out1" / "report.json").read_text())
    assert report["generation"]["after"]["sents_avg"] <= report["generation"]["before"]["sents_avg"]
    assert report["coverage"]["after"]["ratio"] <= report["coverage"]["before"]["ratio"]
    assert time.perf_counter() - started < 30.0


def test_miner_correctness(tmp_path):
    doc = "    /**\n     * Sums all the registered parts.\n     */\n"
    method = (
        "    public int total() {\n"
        "        int sum = parts.size();\n"
        "        return sum;\n"
        "    }\n"
    )

    together = init_repo(tmp_path / "together")
    (together / "Box.java").write_text(
        "public class Box {\n" + doc + method + "}\n", encoding="utf-8"
    )
    commit_all(together, "add documented method", 1_700_000_000)
    kept = mine_method_comment_pairs(together, MinerOptions(repo_name="t"))
    assert len(kept.records) == 1 and not kept.records[0][1].empty

    split = init_repo(tmp_path / "split")
    (split / "Box.java").write_text("public class Box {\n" + method + "}\n", encoding="utf-8")
    commit_all(split, "method first", 1_700_000_000)
    (split / "Box.java").write_text(
        "public class Box {\n" + doc + method + "}\n", encoding="utf-8"
    )
    commit_all(split, "comment later", 1_700_000_100)
    assert mine_method_comment_pairs(split, MinerOptions(repo_name="t")).records == []

    cases = [
        ("CAMEL-17551: pause consumers", ["CAMEL-17551"]),
        ("fix typo in readme", []),
        ("Fixes HBASE-1234 and HBASE-1234, see HBASE-9", ["HBASE-1234", "HBASE-9"]),
        ("DERBY-4821 evict stale leaders", ["DERBY-4821"]),
        ("[FLINK-3100] snapshot lifecycle", ["FLINK-3100"]),
        ("FLINK-3100/FLINK-3101 combined", ["FLINK-3100", "FLINK-3101"]),
        ("prefix CAMEL-1 suffix CAMEL-2", ["CAMEL-1", "CAMEL-2"]),
        ("lowercase camel-17551 is not a key", []),
        ("ABC- 123 split key does not count", []),
        ("A1B2-99 alphanumeric project key", ["A1B2-99"]),
        ("1ABC-99 must start with a letter", []),
        ("see HBASE-1234x trailing letter", []),
        ("no dash ABC123", []),
        ("multi CAMEL-1 CAMEL-1 CAMEL-1 dedup", ["CAMEL-1"]),
        ("parens (HBASE-77) count", ["HBASE-77"]),
        ("colon HBASE-88: and comma HBASE-99, count", ["HBASE-88", "HBASE-99"]),
        ("Merge PR #42 from fork", []),
        ("UPPER-0 zero is a number", ["UPPER-0"]),
        ("tail key at end CAMEL-5", ["CAMEL-5"]),
        ("newline\nHBASE-31\nalso counts", ["HBASE-31"]),
    ]
    assert len(cases) == 20
    for message, expected in cases:
        assert extract_issue_keys(message) == expected, message


def test_generation_rate_on_partial_failures(fixture_world, tmp_path, deny_network, caplog):
    fixtures = tmp_path / "mock"
    out = tmp_path / "out"
    cfg_path = tmp_path / "config.json"
    write_json(
        cfg_path,
        make_config(
            fixture_world["repo"],
            fixture_world["issues_dir"],
            fixtures,
            out,
            include_uncommented=True,
            mode="all_linked",
        ),
    )
    for stage in ("mine", "ingest-issues", "link"):
        assert cli_main([stage, "--config", str(cfg_path), "--offline"]) == 0
    links = list(read_jsonl(out / "links.jsonl"))
    assert len({d["method_id"] for d in links}) == 10
    scripted = script_mock_responses(out, fixtures)
    assert scripted == 8  # the two undocumented methods stay unscripted and fail
    assert cli_main(["generate", "--config", str(cfg_path), "--offline"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    counters = manifest["counters"]
    assert counters["methods_in_generation"] == 10
    assert counters["methods_failed"] == 2
    assert counters["generation_rate"] == pytest.approx(0.8)
    assert f"{counters['generation_rate'] * 100:.1f}%" == "80.0%"
