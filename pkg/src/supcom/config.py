"""Pipeline configuration (strict JSON schema) and the run manifest."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .jsonl import write_json

TOOL_VERSION = "0.1.0"


@dataclass
class RepoConfig:
    path: str = ""
    name: str = "repo"
    extensions: list[str] = field(default_factory=lambda: [".java"])
    rev: str = "HEAD"
    include_uncommented: bool = False
    include_merges: bool = False
    min_lines: int = 3
    max_commits: Optional[int] = None
    jobs: int = 1


@dataclass
class IssuesConfig:
    source: str = "directory"  # "directory" | "tracker"
    dir: Optional[str] = None
    base_url: Optional[str] = None
    token_env: Optional[str] = None
    cache_dir: Optional[str] = None
    max_attempts: int = 3
    backoff_base: float = 0.5
    fetch_jobs: int = 1


@dataclass
class ThresholdsConfig:
    overlap: float = 0.7
    mesia: float = 3.0
    similarity: float = 0.6
    overlap_counting: str = "set"  # "set" | "multiset"


@dataclass
class ChatProviderConfig:
    kind: str = "mock"  # "mock" | "http"
    fixtures_dir: Optional[str] = None
    endpoint: Optional[str] = None
    model: Optional[str] = None
    api_key_env: Optional[str] = None


@dataclass
class EmbeddingProviderConfig:
    kind: str = "offline"  # "offline" | "http"
    dim: int = 512
    k: int = 4
    base_url: Optional[str] = None


@dataclass
class SideProviderConfig:
    kind: str = "offline"  # "offline" | "http"
    base_url: Optional[str] = None


@dataclass
class ProvidersConfig:
    chat: ChatProviderConfig = field(default_factory=ChatProviderConfig)
    embedding: EmbeddingProviderConfig = field(default_factory=EmbeddingProviderConfig)
    side: SideProviderConfig = field(default_factory=SideProviderConfig)


@dataclass
class GenerationConfig:
    mode: str = "dataset"  # "dataset" | "all_linked"
    temperature: float = 0.0
    issue_word_budget: Optional[int] = None
    concurrency: int = 1
    failure_rate_ceiling: float = 1.0
    include_code_block_targets: bool = False


@dataclass
class PromptsConfig:
    retrieval: Optional[str] = None
    generation: Optional[str] = None


@dataclass
class PipelineConfig:
    repo: RepoConfig = field(default_factory=RepoConfig)
    issues: IssuesConfig = field(default_factory=IssuesConfig)
    thresholds: ThresholdsConfig = field(default_factory=ThresholdsConfig)
    providers: ProvidersConfig = field(default_factory=ProvidersConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    prompts: PromptsConfig = field(default_factory=PromptsConfig)
    output_dir: str = "out"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        ).hexdigest()


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    allowed = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s): {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, f in allowed.items():
        if name not in data:
            continue
        value = data[name]
        nested = _NESTED.get((cls, name))
        if nested is not None and value is not None:
            value = _build(nested, value, f"{where}.{name}")
        kwargs[name] = value
    return cls(**kwargs)


_NESTED = {
    (PipelineConfig, "repo"): RepoConfig,
    (PipelineConfig, "issues"): IssuesConfig,
    (PipelineConfig, "thresholds"): ThresholdsConfig,
    (PipelineConfig, "providers"): ProvidersConfig,
    (PipelineConfig, "generation"): GenerationConfig,
    (PipelineConfig, "prompts"): PromptsConfig,
    (ProvidersConfig, "chat"): ChatProviderConfig,
    (ProvidersConfig, "embedding"): EmbeddingProviderConfig,
    (ProvidersConfig, "side"): SideProviderConfig,
}


def validate_config(cfg: PipelineConfig) -> PipelineConfig:
    if not cfg.repo.path:
        raise ConfigError("repo.path is required")
    if cfg.issues.source not in ("directory", "tracker"):
        raise ConfigError("issues.source must be 'directory' or 'tracker'")
    if cfg.issues.source == "directory":
        if not cfg.issues.dir:
            raise ConfigError("issues.dir is required for the directory source")
        if cfg.issues.base_url:
            raise ConfigError("exactly one issue source: drop issues.base_url or switch source")
    else:
        if not cfg.issues.base_url:
            raise ConfigError("issues.base_url is required for the tracker source")
        if cfg.issues.dir:
            raise ConfigError("exactly one issue source: drop issues.dir or switch source")
    if not (0.0 < cfg.thresholds.overlap <= 1.0):
        raise ConfigError("thresholds.overlap must be in (0, 1]")
    if not (-1.0 <= cfg.thresholds.similarity <= 1.0):
        raise ConfigError("thresholds.similarity must be in [-1, 1]")
    if cfg.thresholds.mesia < 0.0:
        raise ConfigError("thresholds.mesia must be non-negative")
    if cfg.thresholds.overlap_counting not in ("set", "multiset"):
        raise ConfigError("thresholds.overlap_counting must be 'set' or 'multiset'")
    if cfg.providers.chat.kind not in ("mock", "http"):
        raise ConfigError("providers.chat.kind must be 'mock' or 'http'")
    if cfg.providers.chat.kind == "mock" and not cfg.providers.chat.fixtures_dir:
        raise ConfigError("providers.chat.fixtures_dir is required for the mock provider")
    if cfg.providers.chat.kind == "http" and not cfg.providers.chat.endpoint:
        raise ConfigError("providers.chat.endpoint is required for the http provider")
    if cfg.providers.embedding.kind not in ("offline", "http"):
        raise ConfigError("providers.embedding.kind must be 'offline' or 'http'")
    if cfg.providers.embedding.kind == "http" and not cfg.providers.embedding.base_url:
        raise ConfigError("providers.embedding.base_url is required for the http provider")
    if cfg.providers.side.kind not in ("offline", "http"):
        raise ConfigError("providers.side.kind must be 'offline' or 'http'")
    if cfg.providers.side.kind == "http" and not cfg.providers.side.base_url:
        raise ConfigError("providers.side.base_url is required for the http provider")
    if cfg.generation.mode not in ("dataset", "all_linked"):
        raise ConfigError("generation.mode must be 'dataset' or 'all_linked'")
    if cfg.generation.concurrency < 1:
        raise ConfigError("generation.concurrency must be >= 1")
    if cfg.issues.fetch_jobs < 1:
        raise ConfigError("issues.fetch_jobs must be >= 1")
    if not (0.0 <= cfg.generation.failure_rate_ceiling <= 1.0):
        raise ConfigError("generation.failure_rate_ceiling must be in [0, 1]")
    return cfg


def load_config(path: str | Path) -> PipelineConfig:
    """Parse and validate a config file. Unknown keys are rejected so typos
    cannot silently change a run."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    cfg = _build(PipelineConfig, data, "config")
    return validate_config(cfg)


def apply_overrides(
    cfg: PipelineConfig,
    out_dir: Optional[str] = None,
    offline: bool = False,
    concurrency: Optional[int] = None,
) -> PipelineConfig:
    """CLI-level overrides. --offline forces the offline embedding and side
    providers and refuses non-mock chat (no network may be touched)."""
    if out_dir:
        cfg.output_dir = out_dir
    if concurrency is not None:
        cfg.generation.concurrency = concurrency
    if offline:
        if cfg.providers.chat.kind != "mock":
            raise ConfigError("--offline requires providers.chat.kind == 'mock'")
        cfg.providers.embedding.kind = "offline"
        cfg.providers.embedding.base_url = None
        cfg.providers.side.kind = "offline"
        cfg.providers.side.base_url = None
        if cfg.issues.source == "tracker":
            raise ConfigError("--offline requires issues.source == 'directory'")
    return validate_config(cfg)


@dataclass
class RunManifest:
    config: dict
    tool_version: str = TOOL_VERSION
    provider_ids: dict = field(default_factory=dict)
    prompt_hashes: dict = field(default_factory=dict)
    started_at: float = 0.0
    finished_at: float = 0.0
    counters: dict = field(default_factory=dict)

    def check_counters(self) -> bool:
        """retained <= generated <= linked <= mined, at method granularity,
        over whichever counters exist so far."""
        chain = ["methods_retained", "methods_generated", "methods_linked", "methods_mined"]
        present = [self.counters[k] for k in chain if k in self.counters]
        return all(a <= b for a, b in zip(present, present[1:]))

    def write(self, path: str | Path) -> None:
        if not self.check_counters():
            raise ConfigError(f"inconsistent run counters: {self.counters}")
        write_json(
            Path(path),
            {
                "tool_version": self.tool_version,
                "config": self.config,
                "provider_ids": self.provider_ids,
                "prompt_hashes": self.prompt_hashes,
                "started_at": self.started_at,
                "finished_at": self.finished_at,
                "counters": self.counters,
            },
        )


def new_manifest(cfg: PipelineConfig) -> RunManifest:
    return RunManifest(config=cfg.to_dict(), started_at=time.time())
