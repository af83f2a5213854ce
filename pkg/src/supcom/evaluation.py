"""Coverage against manual reference comments, verifiability quadrants,
supplementarity distributions, and report emission (json/csv/md)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .embedding import EmbeddingCache, EmbeddingProvider, embed, cosine_similarity
from .errors import ReportError
from .jsonl import write_json
from .records import CommentSentence

CATEGORY_FULL = "Full"
CATEGORY_PARTIAL = "Partial"
CATEGORY_NONE = "None"


@dataclass
class SentenceCoverage:
    manual_text: str
    covered: bool
    best_generated: Optional[str] = None
    score: float = 0.0

    def to_dict(self) -> dict:
        return {
            "manual_text": self.manual_text,
            "covered": self.covered,
            "best_generated": self.best_generated,
            "score": self.score,
        }


@dataclass
class CoverageResult:
    method_id: str
    category: str
    sentences: list[SentenceCoverage] = field(default_factory=list)

    @property
    def n_covered(self) -> int:
        return sum(1 for s in self.sentences if s.covered)

    def to_dict(self) -> dict:
        return {
            "method_id": self.method_id,
            "category": self.category,
            "sentences": [s.to_dict() for s in self.sentences],
        }


def categorize(covered_flags: Sequence[bool]) -> str:
    """Full = every manual sentence covered; Partial = some but not all;
    None = zero covered (or no manual sentences to cover)."""
    if not covered_flags:
        return CATEGORY_NONE
    n = sum(1 for f in covered_flags if f)
    if n == len(covered_flags):
        return CATEGORY_FULL
    if n > 0:
        return CATEGORY_PARTIAL
    return CATEGORY_NONE


def coverage_evaluate(
    generated: Sequence[CommentSentence],
    manual: Sequence[CommentSentence],
    provider: EmbeddingProvider,
    theta: float = 0.6,
    cache: Optional[EmbeddingCache] = None,
    method_id: str = "",
) -> CoverageResult:
    """A manual sentence is covered iff its best similarity against the
    generated sentences is strictly above theta. An empty generated list
    leaves every manual sentence uncovered."""
    per_sentence: list[SentenceCoverage] = []
    gen_vecs = [(g.text, embed(g.text, provider, cache)) for g in generated if g.text.strip()]
    for m in manual:
        best_text: Optional[str] = None
        best_score = 0.0 if not gen_vecs else -2.0
        if gen_vecs:
            m_vec = embed(m.text, provider, cache)
            for g_text, g_vec in gen_vecs:
                score = cosine_similarity(m_vec, g_vec)
                if score > best_score:
                    best_score = score
                    best_text = g_text
        per_sentence.append(
            SentenceCoverage(
                manual_text=m.text,
                covered=best_score > theta,
                best_generated=best_text,
                score=best_score,
            )
        )
    return CoverageResult(
        method_id=method_id,
        category=categorize([s.covered for s in per_sentence]),
        sentences=per_sentence,
    )


def coverage_ratio(n_full: int, n_partial: int, n_total: int) -> float:
    """(full + partial) / total, as a fraction in [0, 1]."""
    if n_total <= 0:
        raise ReportError("coverage ratio needs a positive dataset size")
    return (n_full + n_partial) / n_total


def aggregate_coverage(
    results: Sequence[CoverageResult], n_total: int
) -> tuple[int, int, int, float]:
    """Aggregate per-method categories; methods missing from results count as
    not covered. Returns (n_full, n_partial, n_none, ratio)."""
    n_full = sum(1 for r in results if r.category == CATEGORY_FULL)
    n_partial = sum(1 for r in results if r.category == CATEGORY_PARTIAL)
    if n_full + n_partial > n_total:
        raise ReportError("more covered methods than the dataset size")
    n_none = n_total - n_full - n_partial
    return n_full, n_partial, n_none, coverage_ratio(n_full, n_partial, n_total)


def format_pct(fraction: float) -> str:
    """Display convention: full-precision fraction rendered at one decimal."""
    return f"{fraction * 100:.1f}%"


@dataclass
class DistributionSummary:
    count: int = 0
    mean: float = 0.0
    minimum: float = 0.0
    maximum: float = 0.0
    histogram: list[tuple[int, int]] = field(default_factory=list)  # (bin start, count)
    per_type: dict[str, dict] = field(default_factory=dict)
    empty: bool = False

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "min": self.minimum,
            "max": self.maximum,
            "histogram_bin_width_bits": 1,
            "histogram": [[b, c] for b, c in self.histogram],
            "per_type": self.per_type,
            "empty": self.empty,
        }


def supplementarity_stats(scored: Sequence[tuple[Optional[str], float]]) -> DistributionSummary:
    """Distribution of supplementarity values over (info_type, value) pairs,
    with a 1-bit histogram and a per-type breakdown. Callers pass retained
    sentences only."""
    if not scored:
        return DistributionSummary(empty=True)
    values = [v for _, v in scored]
    bins: dict[int, int] = {}
    for v in values:
        bins[int(math.floor(v))] = bins.get(int(math.floor(v)), 0) + 1
    per_type: dict[str, dict] = {}
    for t, v in scored:
        name = t or "untyped"
        slot = per_type.setdefault(name, {"count": 0, "sum": 0.0})
        slot["count"] += 1
        slot["sum"] += v
    per_type_out = {
        name: {"count": d["count"], "mean": round(d["sum"] / d["count"], 4)}
        for name, d in sorted(per_type.items())
    }
    return DistributionSummary(
        count=len(values),
        mean=round(sum(values) / len(values), 4),
        minimum=round(min(values), 4),
        maximum=round(max(values), 4),
        histogram=sorted(bins.items()),
        per_type=per_type_out,
    )


def _md_table(headers: list[str], rows: list[list[str]]) -> str:
    lines = ["| " + " | ".join(headers) + " |", "|" + "|".join(["---"] * len(headers)) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines)


def render_markdown(report: dict) -> str:
    """Deterministic markdown rendering of a report dict (no timestamps)."""
    meta = report.get("meta", {})
    cov = report.get("coverage", {})
    quad = report.get("quadrants", {})
    supp = report.get("supplementarity", {})
    gen = report.get("generation", {})

    out: list[str] = []
    out.append("# Supplementary comment generation report")
    out.append("")
    out.append(
        f"Repository: `{meta.get('repo', '?')}` | methods evaluated: "
        f"{cov.get('n_total', 0)} | chat provider: `{meta.get('chat_provider', '?')}` | "
        f"embedding provider: `{meta.get('embedding_provider', '?')}`"
    )
    out.append("")
    out.append("## Generation and coverage")
    out.append("")
    rows = []
    for stage_key, label in (("before", "Before filtering"), ("after", "After filtering")):
        stage_cov = cov.get(stage_key, {})
        stage_gen = gen.get(stage_key, {})
        rows.append(
            [
                label,
                f"{stage_gen.get('sents_avg', 0.0):.1f}",
                f"{stage_gen.get('sent_len_avg', 0.0):.1f}",
                str(stage_cov.get("n_full", 0)),
                str(stage_cov.get("n_partial", 0)),
                format_pct(stage_cov.get("ratio", 0.0)),
            ]
        )
    out.append(
        _md_table(
            ["Stage", "#Sents (avg)", "Sent Len (avg)", "#Full", "#Partial", "Coverage"],
            rows,
        )
    )
    out.append("")
    out.append("## Relevance and verifiability quadrants")
    out.append("")
    counts = quad.get("counts", {})
    props = quad.get("proportions", {})
    out.append(
        _md_table(
            ["Quadrant", "Sentences", "Proportion"],
            [
                [
                    "code-relevant and issue-verifiable (retained)",
                    str(counts.get("relevant_verifiable", 0)),
                    f"{props.get('relevant_verifiable', 0.0):.4f}",
                ],
                [
                    "code-relevant, not verifiable",
                    str(counts.get("relevant_unverifiable", 0)),
                    f"{props.get('relevant_unverifiable', 0.0):.4f}",
                ],
                [
                    "not relevant, issue-verifiable",
                    str(counts.get("irrelevant_verifiable", 0)),
                    f"{props.get('irrelevant_verifiable', 0.0):.4f}",
                ],
                [
                    "not relevant, not verifiable",
                    str(counts.get("irrelevant_unverifiable", 0)),
                    f"{props.get('irrelevant_unverifiable', 0.0):.4f}",
                ],
            ],
        )
    )
    out.append("")
    out.append("## Supplementarity of retained sentences (mesia_surrogate)")
    out.append("")
    if supp.get("empty"):
        out.append("No retained sentences to score.")
    else:
        out.append(
            f"count: {supp.get('count', 0)} | mean: {supp.get('mean', 0.0):.4f} bits | "
            f"min: {supp.get('min', 0.0):.4f} | max: {supp.get('max', 0.0):.4f}"
        )
        out.append("")
        out.append(
            _md_table(
                ["Bin (bits)", "Sentences"],
                [[f"[{b}, {b + 1})", str(c)] for b, c in supp.get("histogram", [])],
            )
        )
        per_type = supp.get("per_type", {})
        if per_type:
            out.append("")
            out.append(
                _md_table(
                    ["Category", "Sentences", "Mean (bits)"],
                    [
                        [name, str(d["count"]), f"{d['mean']:.4f}"]
                        for name, d in per_type.items()
                    ],
                )
            )
    if "generation_rate" in report:
        gr = report["generation_rate"]
        out.append("")
        out.append("## Generation rate")
        out.append("")
        out.append(
            f"{gr['generated_ok']} of {gr['linked_total']} issue-linked methods produced at "
            f"least one retained sentence: {format_pct(gr['rate'])}"
        )
    out.append("")
    out.append("## Run parameters")
    out.append("")
    thresholds = meta.get("thresholds", {})
    out.append(
        f"- thresholds: similarity {thresholds.get('similarity', 0.6)}, "
        f"overlap {thresholds.get('overlap', 0.7)}, mesia {thresholds.get('mesia', 3.0)}"
    )
    out.append(f"- side scorer: `{meta.get('side_scorer', '?')}`")
    out.append(
        f"- prompt hashes: retrieval `{meta.get('retrieval_prompt_hash', '')}`, "
        f"generation `{meta.get('generation_prompt_hash', '')}`"
    )
    out.append("")
    return "\n".join(out)


def emit_report(
    report: dict,
    out_dir: str | Path,
    per_method_rows: Optional[list[dict]] = None,
    formats: tuple[str, ...] = ("json", "csv", "md"),
) -> dict[str, Path]:
    """Write report files; json is the source of truth, csv is row-per-method,
    md mirrors the coverage table layout."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create output directory {out_dir}: {exc}") from None
    written: dict[str, Path] = {}
    if "json" in formats:
        path = out_dir / "report.json"
        write_json(path, report)
        written["json"] = path
    if "csv" in formats:
        path = out_dir / "report.csv"
        rows = per_method_rows or []
        headers = list(rows[0].keys()) if rows else ["method_id"]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=headers)
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        written["csv"] = path
    if "md" in formats:
        path = out_dir / "report.md"
        path.write_text(render_markdown(report), encoding="utf-8")
        written["md"] = path
    return written
