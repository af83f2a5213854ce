"""Stage implementations behind the CLI: mine, ingest-issues, link, dataset,
generate, evaluate, report. Stages communicate through JSONL files in the
output directory and are resumable via input/output content hashes."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Optional

from . import mesia
from .config import PipelineConfig, new_manifest
from .embedding import (
    EmbeddingCache,
    EmbeddingProvider,
    HttpEmbeddingProvider,
    OfflineHashingProvider,
)
from .errors import (
    IssueNotFoundError,
    IssueValidationError,
    ReportError,
    TransientServiceError,
)
from .evaluation import (
    CoverageResult,
    aggregate_coverage,
    coverage_evaluate,
    emit_report,
    supplementarity_stats,
)
from .generation import (
    GeneratedComment,
    HttpChatProvider,
    MockChatProvider,
    PipelineParams,
    _load_template,
    run_pipeline,
    template_hash,
)
from .issues import IssueLink, IssueReport, TrackerClient, ingest_issue, link_issues
from .jsonl import file_sha256, read_json, read_jsonl, write_json, write_jsonl
from .mesia import BackgroundModel, build_background_model, mesia_score, score_text
from .miner import MinerOptions, extract_issue_keys, mine_method_comment_pairs
from .records import CommentBlock, CommentSentence, MethodRecord
from .textproc import overlap_candidates, tokenize_words
from .verification import (
    HttpSideScorer,
    OfflineSideScorer,
    SideScorer,
    quadrant_stats,
    verify_comment,
)

log = logging.getLogger(__name__)

METHODS_FILE = "methods.jsonl"
COMMENTS_FILE = "comments.jsonl"
ISSUES_FILE = "issues.jsonl"
LINKS_FILE = "links.jsonl"
DATASET_FILE = "dataset.jsonl"
SCORED_COMMENTS_FILE = "comments_scored.jsonl"
MODEL_FILE = "model.json"
GENERATED_FILE = "generated.jsonl"
REPORT_JSON = "report.json"
MANIFEST_FILE = "manifest.json"


class StageRunner:
    """Skips a stage when its recorded input hashes, output hashes, and
    config digest all still match; otherwise runs it and records them."""

    def __init__(self, out_dir: str | Path, config_digest: str, resume: bool = True):
        self.out_dir = Path(out_dir)
        self.state_dir = self.out_dir / ".stages"
        self.config_digest = config_digest
        self.resume = resume

    def _state_path(self, name: str) -> Path:
        return self.state_dir / f"{name}.json"

    def _hashes(self, paths: list[Path]) -> Optional[dict]:
        out = {}
        for p in paths:
            if not p.exists():
                return None
            out[str(p)] = file_sha256(p)
        return out

    def run(
        self,
        name: str,
        inputs: list[Path],
        outputs: list[Path],
        fn: Callable[[], dict],
    ) -> tuple[bool, dict]:
        """Returns (ran, counters)."""
        state_path = self._state_path(name)
        if self.resume and state_path.exists():
            state = read_json(state_path)
            current_in = self._hashes(inputs)
            current_out = self._hashes(outputs)
            if (
                state.get("config_digest") == self.config_digest
                and current_in is not None
                and current_out is not None
                and state.get("inputs") == current_in
                and state.get("outputs") == current_out
            ):
                log.info("stage %s: up to date, skipped", name)
                return False, state.get("counters", {})
        counters = fn()
        out_hashes = self._hashes(outputs)
        if out_hashes is None:
            raise ReportError(f"stage {name} did not produce all outputs: {outputs}")
        write_json(
            state_path,
            {
                "config_digest": self.config_digest,
                "inputs": self._hashes(inputs) or {},
                "outputs": out_hashes,
                "counters": counters,
            },
        )
        return True, counters

    def all_counters(self) -> dict:
        merged: dict = {}
        if self.state_dir.is_dir():
            for path in sorted(self.state_dir.glob("*.json")):
                merged.update(read_json(path).get("counters", {}))
        return merged


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise ReportError(f"missing {path.name}: run `supcom {produced_by}` first ({path})")
    return path


# ---------------------------------------------------------------------------
# Provider construction
# ---------------------------------------------------------------------------


def make_chat_provider(cfg: PipelineConfig):
    c = cfg.providers.chat
    if c.kind == "mock":
        return MockChatProvider(c.fixtures_dir)
    return HttpChatProvider(endpoint=c.endpoint, model=c.model or "", api_key_env=c.api_key_env)


def make_embedding_provider(cfg: PipelineConfig) -> EmbeddingProvider:
    e = cfg.providers.embedding
    if e.kind == "offline":
        return OfflineHashingProvider(dim=e.dim, k=e.k)
    return HttpEmbeddingProvider(base_url=e.base_url)


def make_side_scorer(cfg: PipelineConfig, cache: EmbeddingCache) -> SideScorer:
    s = cfg.providers.side
    if s.kind == "offline":
        e = cfg.providers.embedding
        return OfflineSideScorer(provider=OfflineHashingProvider(dim=e.dim, k=e.k), cache=cache)
    return HttpSideScorer(base_url=s.base_url)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_mine(cfg: PipelineConfig, out_dir: Path) -> dict:
    opts = MinerOptions(
        repo_name=cfg.repo.name,
        extensions=tuple(cfg.repo.extensions),
        rev=cfg.repo.rev,
        include_uncommented=cfg.repo.include_uncommented,
        include_merges=cfg.repo.include_merges,
        min_lines=cfg.repo.min_lines,
        max_commits=cfg.repo.max_commits,
        jobs=cfg.repo.jobs,
    )
    result = mine_method_comment_pairs(cfg.repo.path, opts)
    write_jsonl(out_dir / METHODS_FILE, (m.to_dict() for m, _, _ in result.records))
    write_jsonl(out_dir / COMMENTS_FILE, (c.to_dict() for _, c, _ in result.records))
    counters = {f"miner_{k}": v for k, v in result.counters.items()}
    counters["methods_mined"] = len(result.records)
    return counters


def _load_methods(out_dir: Path) -> list[MethodRecord]:
    return [MethodRecord.from_dict(d) for d in read_jsonl(out_dir / METHODS_FILE)]


def _load_comments(out_dir: Path, name: str = COMMENTS_FILE) -> dict[str, CommentBlock]:
    return {
        d["method_id"]: CommentBlock.from_dict(d) for d in read_jsonl(out_dir / name)
    }


def _load_issues(out_dir: Path) -> dict[str, IssueReport]:
    return {d["key"]: IssueReport.from_dict(d) for d in read_jsonl(out_dir / ISSUES_FILE)}


def stage_ingest_issues(cfg: PipelineConfig, out_dir: Path) -> dict:
    counters = {"issues_ingested": 0, "issues_rejected": 0, "issues_not_found": 0, "issues_failed": 0}
    reports: list[IssueReport] = []
    if cfg.issues.source == "directory":
        issue_dir = Path(cfg.issues.dir)
        if not issue_dir.is_dir():
            raise ReportError(f"issues.dir does not exist: {issue_dir}")
        for path in sorted(issue_dir.glob("*.json")):
            try:
                reports.append(ingest_issue(read_json(path)))
                counters["issues_ingested"] += 1
            except IssueValidationError as exc:
                counters["issues_rejected"] += 1
                log.warning("rejected issue file %s: %s", path.name, exc)
    else:
        methods = _load_methods(out_dir) if (out_dir / METHODS_FILE).exists() else None
        if methods is None:
            raise ReportError("tracker ingestion needs methods.jsonl: run `supcom mine` first")
        keys = sorted(
            {k for m in methods for k in extract_issue_keys(m.commit.message)}
        )
        token = os.environ.get(cfg.issues.token_env, "") if cfg.issues.token_env else None
        client = TrackerClient(
            base_url=cfg.issues.base_url,
            token=token or None,
            cache_dir=cfg.issues.cache_dir,
            max_attempts=cfg.issues.max_attempts,
            backoff_base=cfg.issues.backoff_base,
        )

        def fetch_one(key: str):
            try:
                return "ok", client.fetch_issue(key)
            except IssueNotFoundError:
                log.warning("issue %s not found", key)
                return "not_found", None
            except TransientServiceError as exc:
                log.warning("issue %s fetch failed: %s", key, exc)
                return "failed", None

        if cfg.issues.fetch_jobs > 1:
            with ThreadPoolExecutor(max_workers=cfg.issues.fetch_jobs) as pool:
                outcomes = list(pool.map(fetch_one, keys))
        else:
            outcomes = [fetch_one(k) for k in keys]
        for status, report in outcomes:
            if status == "ok":
                reports.append(report)
                counters["issues_ingested"] += 1
            elif status == "not_found":
                counters["issues_not_found"] += 1
            else:
                counters["issues_failed"] += 1
    write_jsonl(out_dir / ISSUES_FILE, (r.to_dict() for r in reports))
    return counters


def stage_link(cfg: PipelineConfig, out_dir: Path) -> dict:
    methods = _load_methods(out_dir)
    issues = _load_issues(out_dir)
    links = link_issues(methods, issues)
    write_jsonl(out_dir / LINKS_FILE, (l.to_dict() for l in links))
    resolved_methods = {l.method_id for l in links if l.resolved}
    return {
        "links_total": len(links),
        "links_unresolved": sum(1 for l in links if not l.resolved),
        "methods_linked": len(resolved_methods),
    }


def stage_dataset(cfg: PipelineConfig, out_dir: Path) -> dict:
    methods = {m.id: m for m in _load_methods(out_dir)}
    comments = _load_comments(out_dir)
    issues = _load_issues(out_dir)
    links = [IssueLink.from_dict(d) for d in read_jsonl(out_dir / LINKS_FILE)]

    corpus = [c.raw_text for c in comments.values() if not c.empty]
    if not corpus:
        raise ReportError("no mined comments to build the background model from")
    model = build_background_model(corpus)
    model.save(out_dir / MODEL_FILE)

    scored: dict[str, CommentBlock] = {}
    rows: list[dict] = []
    kept_methods: set[str] = set()
    n_mesia_rejected = 0
    n_no_overlap = 0
    for link in links:
        if not link.resolved:
            continue
        method = methods.get(link.method_id)
        comment = comments.get(link.method_id)
        issue = issues.get(link.issue_key)
        if method is None or comment is None or issue is None or comment.empty:
            continue
        if comment.method_id not in scored:
            comment.mesia = mesia_score(comment, method, model).value
            scored[comment.method_id] = comment
        if comment.mesia < cfg.thresholds.mesia:
            n_mesia_rejected += 1
            continue
        kept = overlap_candidates(
            [s.text for s in comment.sentences],
            [s.text for s in issue.sentences],
            threshold=cfg.thresholds.overlap,
            counting=cfg.thresholds.overlap_counting,
        )
        if not kept:
            n_no_overlap += 1
            continue
        issue_text_to_index = {s.text: s.index for s in reversed(issue.sentences)}
        rows.append(
            {
                "method_id": method.id,
                "issue_key": issue.key,
                "mesia": comment.mesia,
                "kept": [
                    {
                        "comment_text": cs,
                        "issue_index": issue_text_to_index.get(best),
                        "issue_text": best,
                        "ratio": ratio,
                    }
                    for cs, best, ratio in kept
                ],
            }
        )
        kept_methods.add(method.id)
    for method_id, comment in comments.items():
        if method_id not in scored and not comment.empty:
            method = methods.get(method_id)
            if method is not None:
                comment.mesia = mesia_score(comment, method, model).value
    write_jsonl(out_dir / SCORED_COMMENTS_FILE, (c.to_dict() for c in comments.values()))
    write_jsonl(out_dir / DATASET_FILE, rows)
    return {
        "dataset_rows": len(rows),
        "dataset_methods": len(kept_methods),
        "dataset_mesia_rejected": n_mesia_rejected,
        "dataset_no_overlap": n_no_overlap,
    }


def _generation_targets(cfg: PipelineConfig, out_dir: Path) -> list[tuple[str, str]]:
    """(method_id, issue_key) pairs to run, in stable order."""
    if cfg.generation.mode == "dataset":
        path = _require(out_dir / DATASET_FILE, "dataset")
        return [(d["method_id"], d["issue_key"]) for d in read_jsonl(path)]
    path = _require(out_dir / LINKS_FILE, "link")
    return [
        (d["method_id"], d["issue_key"])
        for d in read_jsonl(path)
        if d.get("resolved", True)
    ]


def stage_generate(cfg: PipelineConfig, out_dir: Path) -> dict:
    methods = {m.id: m for m in _load_methods(out_dir)}
    issues = _load_issues(out_dir)
    targets = _generation_targets(cfg, out_dir)

    chat = make_chat_provider(cfg)
    cache = EmbeddingCache()
    embedder = make_embedding_provider(cfg)
    side = make_side_scorer(cfg, cache)
    model = (
        BackgroundModel.load(out_dir / MODEL_FILE) if (out_dir / MODEL_FILE).exists() else None
    )
    known_tokens: dict[str, set] = {}
    params = PipelineParams(
        temperature=cfg.generation.temperature,
        issue_word_budget=cfg.generation.issue_word_budget,
        overlap_threshold=cfg.thresholds.overlap,
        retrieval_template=cfg.prompts.retrieval,
        generation_template=cfg.prompts.generation,
    )

    def sentence_dicts(method: MethodRecord, outcome) -> list[dict]:
        rows = [s.to_dict() for s in outcome.comment.sentences]
        if model is not None:
            if method.id not in known_tokens:
                known_tokens[method.id] = mesia.code_token_set(method)
            known = known_tokens[method.id]
            for row in rows:
                row["mesia"] = score_text(row["text"], known, model).value
        return rows

    def process(target: tuple[str, str]) -> dict:
        method_id, issue_key = target
        method = methods.get(method_id)
        issue = issues.get(issue_key)
        if method is None or issue is None:
            return {
                "method_id": method_id,
                "issue_key": issue_key,
                "status": "failed",
                "failure_reason": "missing method or issue record",
                "evidence": {"method_id": method_id, "entries": {}},
                "sentences": [],
                "telemetry": {},
            }
        outcome = run_pipeline(method, issue, chat, params)
        if outcome.status == "ok":
            verify_comment(
                outcome.comment,
                method,
                issue,
                embedding_provider=embedder,
                side_scorer=side,
                theta=cfg.thresholds.similarity,
                include_code_blocks=cfg.generation.include_code_block_targets,
                cache=cache,
            )
        return {
            "method_id": method_id,
            "issue_key": issue_key,
            "status": outcome.status,
            "failure_reason": outcome.failure_reason,
            "evidence": outcome.evidence.to_dict(),
            "sentences": sentence_dicts(method, outcome),
            "telemetry": outcome.telemetry.to_dict(),
        }

    if cfg.generation.concurrency > 1:
        with ThreadPoolExecutor(max_workers=cfg.generation.concurrency) as pool:
            records = list(pool.map(process, targets))
    else:
        records = [process(t) for t in targets]

    write_jsonl(out_dir / GENERATED_FILE, records)

    method_status: dict[str, dict] = {}
    for rec in records:
        slot = method_status.setdefault(
            rec["method_id"], {"statuses": set(), "retained": 0}
        )
        slot["statuses"].add(rec["status"])
        slot["retained"] += sum(1 for s in rec["sentences"] if s.get("retained"))
    linked_methods = {m for m, _ in targets}
    generated_ok = sum(1 for v in method_status.values() if "ok" in v["statuses"])
    retained_methods = sum(1 for v in method_status.values() if v["retained"] > 0)
    # delivering no evidence is an empty result, not a provider failure
    failed_methods = sum(
        1 for v in method_status.values() if v["statuses"] == {"failed"}
    )
    no_evidence_methods = sum(
        1
        for v in method_status.values()
        if "ok" not in v["statuses"] and "no_evidence" in v["statuses"]
    )
    counters = {
        "generation_targets": len(targets),
        "methods_in_generation": len(linked_methods),
        "methods_generated": generated_ok,
        "methods_retained": retained_methods,
        "methods_failed": failed_methods,
        "methods_no_evidence": no_evidence_methods,
        "sentences_generated": sum(len(r["sentences"]) for r in records),
        "sentences_retained": sum(
            1 for r in records for s in r["sentences"] if s.get("retained")
        ),
    }
    if linked_methods:
        counters["generation_rate"] = round(retained_methods / len(linked_methods), 4)
    return counters


def generation_failure_exceeds_ceiling(cfg: PipelineConfig, counters: dict) -> bool:
    total = counters.get("methods_in_generation", 0)
    failed = counters.get("methods_failed", 0)
    if total == 0 or failed == 0:
        return False
    rate = failed / total
    return failed == total or rate > cfg.generation.failure_rate_ceiling


def stage_evaluate(cfg: PipelineConfig, out_dir: Path) -> dict:
    _require(out_dir / GENERATED_FILE, "generate")
    _require(out_dir / METHODS_FILE, "mine")
    methods = {m.id: m for m in _load_methods(out_dir)}
    comment_file = (
        SCORED_COMMENTS_FILE if (out_dir / SCORED_COMMENTS_FILE).exists() else COMMENTS_FILE
    )
    comments = _load_comments(out_dir, comment_file)
    model = (
        BackgroundModel.load(_require(out_dir / MODEL_FILE, "dataset"))
    )
    generated_rows = list(read_jsonl(out_dir / GENERATED_FILE))

    cache = EmbeddingCache()
    embedder = make_embedding_provider(cfg)
    theta = cfg.thresholds.similarity

    # group generated sentences per method (one method may pair with several
    # issues; coverage is a per-method judgement)
    per_method: dict[str, dict] = {}
    for row in generated_rows:
        slot = per_method.setdefault(
            row["method_id"],
            {"sentences": [], "ok": False, "issue_keys": [], "statuses": []},
        )
        slot["issue_keys"].append(row["issue_key"])
        slot["statuses"].append(row["status"])
        if row["status"] == "ok":
            slot["ok"] = True
            slot["sentences"].extend(CommentSentence.from_dict(s) for s in row["sentences"])

    results_pre: list[CoverageResult] = []
    results_post: list[CoverageResult] = []
    evaluable = 0
    per_method_rows: list[dict] = []
    quadrant_input: list[GeneratedComment] = []
    supp_scored: list[tuple[Optional[str], float]] = []

    for method_id, slot in per_method.items():
        manual = comments.get(method_id)
        generated_sents = slot["sentences"]
        retained_sents = [s for s in generated_sents if s.retained]
        annotated = [
            s for s in generated_sents if s.code_relevant is not None and s.verifiable is not None
        ]
        if annotated:
            quadrant_input.append(GeneratedComment(method_id=method_id, sentences=annotated))
        method = methods.get(method_id)
        if method is not None and retained_sents:
            known = mesia.code_token_set(method)
            for s in retained_sents:
                supp_scored.append((s.info_type, score_text(s.text, known, model).value))
        row: dict = {
            "method_id": method_id,
            "issue_keys": ";".join(sorted(set(slot["issue_keys"]))),
            "status": "ok" if slot["ok"] else (slot["statuses"][0] if slot["statuses"] else "failed"),
            "n_generated": len(generated_sents),
            "n_retained": len(retained_sents),
            "category_pre": "",
            "category_post": "",
        }
        if manual is not None and not manual.empty and manual.sentences:
            evaluable += 1
            pre = coverage_evaluate(
                generated_sents, manual.sentences, embedder, theta=theta, cache=cache,
                method_id=method_id,
            )
            post = coverage_evaluate(
                retained_sents, manual.sentences, embedder, theta=theta, cache=cache,
                method_id=method_id,
            )
            results_pre.append(pre)
            results_post.append(post)
            row["category_pre"] = pre.category
            row["category_post"] = post.category
        per_method_rows.append(row)

    n_total = evaluable
    coverage: dict = {"n_total": n_total}
    if n_total > 0:
        for stage_name, results in (("before", results_pre), ("after", results_post)):
            n_full, n_partial, n_none, ratio = aggregate_coverage(results, n_total)
            coverage[stage_name] = {
                "n_full": n_full,
                "n_partial": n_partial,
                "n_none": n_none,
                "ratio": ratio,
            }
    else:
        for stage_name in ("before", "after"):
            coverage[stage_name] = {"n_full": 0, "n_partial": 0, "n_none": 0, "ratio": 0.0}

    quad = quadrant_stats(quadrant_input)
    supp = supplementarity_stats(supp_scored)

    def _sent_stats(selector) -> dict:
        ok_methods = [m for m, slot in per_method.items() if slot["statuses"]]
        if not ok_methods:
            return {"sents_avg": 0.0, "sent_len_avg": 0.0}
        counts = []
        lengths = []
        for m in ok_methods:
            sents = [s for s in per_method[m]["sentences"] if selector(s)]
            counts.append(len(sents))
            lengths.extend(len(tokenize_words(s.text)) for s in sents)
        return {
            "sents_avg": round(sum(counts) / len(counts), 4) if counts else 0.0,
            "sent_len_avg": round(sum(lengths) / len(lengths), 4) if lengths else 0.0,
        }

    generation_stats = {
        "before": _sent_stats(lambda s: True),
        "after": _sent_stats(lambda s: bool(s.retained)),
    }

    retrieval_tpl = _load_template("retrieval.txt", cfg.prompts.retrieval)
    generation_tpl = _load_template("generation.txt", cfg.prompts.generation)
    side_id = make_side_scorer(cfg, cache).id
    report = {
        "meta": {
            "repo": cfg.repo.name,
            "chat_provider": make_chat_provider(cfg).id,
            "embedding_provider": embedder.id,
            "side_scorer": side_id,
            "thresholds": {
                "similarity": cfg.thresholds.similarity,
                "overlap": cfg.thresholds.overlap,
                "mesia": cfg.thresholds.mesia,
            },
            "retrieval_prompt_hash": template_hash(retrieval_tpl),
            "generation_prompt_hash": template_hash(generation_tpl),
            "supplementarity_metric": mesia.METRIC_ID,
        },
        "coverage": coverage,
        "quadrants": quad.to_dict(),
        "supplementarity": supp.to_dict(),
        "generation": generation_stats,
        "per_method": per_method_rows,
        "per_method_coverage": {
            "before": [r.to_dict() for r in results_pre],
            "after": [r.to_dict() for r in results_post],
        },
    }

    linked_methods = {m for m, _ in _generation_targets(cfg, out_dir)}
    methods_retained = sum(1 for r in per_method_rows if r["n_retained"] > 0)
    if cfg.generation.mode == "all_linked" and linked_methods:
        report["generation_rate"] = {
            "linked_total": len(linked_methods),
            "generated_ok": methods_retained,
            "rate": methods_retained / len(linked_methods),
        }

    emit_report(report, out_dir, per_method_rows=per_method_rows)
    counters = {
        "evaluated_methods": n_total,
        "coverage_ratio_before": coverage["before"]["ratio"],
        "coverage_ratio_after": coverage["after"]["ratio"],
        "quadrant_total": quad.total,
    }
    return counters


def stage_report(cfg: PipelineConfig, out_dir: Path) -> dict:
    path = _require(out_dir / REPORT_JSON, "evaluate")
    report = read_json(path)
    emit_report(report, out_dir, per_method_rows=report.get("per_method", []))
    return {"report_rerendered": 1}


# ---------------------------------------------------------------------------
# Command wiring
# ---------------------------------------------------------------------------

STAGE_SPECS: dict[str, dict] = {
    "mine": {
        "fn": stage_mine,
        "inputs": [],
        "outputs": [METHODS_FILE, COMMENTS_FILE],
    },
    "ingest-issues": {
        "fn": stage_ingest_issues,
        "inputs": [],
        "outputs": [ISSUES_FILE],
    },
    "link": {
        "fn": stage_link,
        "inputs": [METHODS_FILE, ISSUES_FILE],
        "outputs": [LINKS_FILE],
    },
    "dataset": {
        "fn": stage_dataset,
        "inputs": [METHODS_FILE, COMMENTS_FILE, ISSUES_FILE, LINKS_FILE],
        "outputs": [DATASET_FILE, MODEL_FILE, SCORED_COMMENTS_FILE],
    },
    "generate": {
        "fn": stage_generate,
        "inputs": [METHODS_FILE, ISSUES_FILE, LINKS_FILE],
        "optional_inputs": [MODEL_FILE],
        "outputs": [GENERATED_FILE],
    },
    "evaluate": {
        "fn": stage_evaluate,
        "inputs": [METHODS_FILE, ISSUES_FILE, GENERATED_FILE],
        "outputs": [REPORT_JSON, "report.md", "report.csv"],
    },
    "report": {
        "fn": stage_report,
        "inputs": [REPORT_JSON],
        "outputs": ["report.md", "report.csv"],
    },
}


def run_stage(cfg: PipelineConfig, stage_name: str, resume: bool = True) -> tuple[bool, dict]:
    """Run one named stage with resumability and write the run manifest."""
    spec = STAGE_SPECS[stage_name]
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runner = StageRunner(out_dir, cfg.digest(), resume=resume)
    inputs = [out_dir / name for name in spec["inputs"]]
    for p in inputs:
        _require(p, _producer_of(p.name))
    inputs += [
        out_dir / name for name in spec.get("optional_inputs", []) if (out_dir / name).exists()
    ]
    outputs = [out_dir / name for name in spec["outputs"]]
    ran, counters = runner.run(stage_name, inputs, outputs, lambda: spec["fn"](cfg, out_dir))

    manifest = new_manifest(cfg)
    manifest.counters = runner.all_counters()
    cache = EmbeddingCache()
    manifest.provider_ids = {
        "chat": make_chat_provider(cfg).id,
        "embedding": make_embedding_provider(cfg).id,
        "side": make_side_scorer(cfg, cache).id,
    }
    manifest.prompt_hashes = {
        "retrieval": template_hash(_load_template("retrieval.txt", cfg.prompts.retrieval)),
        "generation": template_hash(_load_template("generation.txt", cfg.prompts.generation)),
    }
    manifest.finished_at = time.time()
    manifest.write(out_dir / MANIFEST_FILE)
    return ran, counters


def _producer_of(file_name: str) -> str:
    producers = {
        METHODS_FILE: "mine",
        COMMENTS_FILE: "mine",
        ISSUES_FILE: "ingest-issues",
        LINKS_FILE: "link",
        DATASET_FILE: "dataset",
        MODEL_FILE: "dataset",
        SCORED_COMMENTS_FILE: "dataset",
        GENERATED_FILE: "generate",
        REPORT_JSON: "evaluate",
    }
    return producers.get(file_name, "the previous stage")
