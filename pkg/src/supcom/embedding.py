"""Sentence embeddings and cosine similarity with pluggable providers.

The offline provider needs no model downloads: each word token is hashed to
k signed positions of a d-dimensional vector with a fixed keyed hash, token
vectors are summed over the token multiset and L2-normalized. Vectors are
order-free in the tokens, unit-norm, and stable across processes.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from hashlib import blake2b
from pathlib import Path
from typing import Optional, Protocol, Sequence, runtime_checkable

import numpy as np
import requests

from .errors import EmbeddingError, TransientServiceError
from .jsonl import read_json, text_sha256, write_json
from .textproc import tokenize_words

_HASH_KEY = b"supcom-embed-v1"


@dataclass
class EmbeddingVector:
    values: np.ndarray
    dim: int
    provider_id: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.dim,):
            raise EmbeddingError(
                f"vector length {self.values.shape} does not match dim {self.dim}"
            )


@runtime_checkable
class EmbeddingProvider(Protocol):
    id: str
    dim: int

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def _token_positions(token: str, k: int, dim: int) -> list[tuple[int, float]]:
    out = []
    for slot in range(k):
        digest = blake2b(
            f"{token}\x00{slot}".encode("utf-8"), digest_size=8, key=_HASH_KEY
        ).digest()
        index = int.from_bytes(digest[:4], "big") % dim
        sign = 1.0 if digest[4] & 1 == 0 else -1.0
        out.append((index, sign))
    return out


class OfflineHashingProvider:
    """Deterministic fallback provider (no network, no model files)."""

    def __init__(self, dim: int = 512, k: int = 4):
        self.dim = dim
        self.k = k
        self.id = f"offline-hash-d{dim}k{k}"

    def _vector(self, text: str) -> np.ndarray:
        tokens = tokenize_words(text)
        if not tokens:
            # token-free but nonempty input (pure punctuation) still must
            # produce a nonzero vector
            tokens = [text.strip()]
        v = np.zeros(self.dim, dtype=np.float64)
        for tok in tokens:
            for index, sign in _token_positions(tok, self.k, self.dim):
                v[index] += sign
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            v[_token_positions(text.strip() or "_", 1, self.dim)[0][0]] = 1.0
            norm = 1.0
        return v / norm

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [
            EmbeddingVector(values=self._vector(t), dim=self.dim, provider_id=self.id)
            for t in texts
        ]


class HttpEmbeddingProvider:
    """Client for the scoring-service /embed endpoint."""

    def __init__(
        self,
        base_url: str,
        dim: int = 0,
        timeout: float = 30.0,
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        session: Optional[requests.Session] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.id = f"http:{self.base_url}"
        self.dim = dim  # 0 = discovered from the first response
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.session = session or requests.Session()

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        payload = post_with_retries(
            self.session,
            f"{self.base_url}/embed",
            {"texts": list(texts)},
            timeout=self.timeout,
            max_attempts=self.max_attempts,
            backoff_base=self.backoff_base,
        )
        dim = int(payload["dim"])
        if self.dim == 0:
            self.dim = dim
        return [
            EmbeddingVector(values=np.asarray(vec, dtype=np.float64), dim=dim, provider_id=self.id)
            for vec in payload["vectors"]
        ]


def post_with_retries(
    session: requests.Session,
    url: str,
    json_payload: dict,
    timeout: float = 30.0,
    max_attempts: int = 3,
    backoff_base: float = 0.5,
    headers: Optional[dict] = None,
) -> dict:
    """POST JSON with exponential backoff on transport errors, 5xx, and 429."""
    last_error: Optional[str] = None
    for attempt in range(max_attempts):
        if attempt:
            time.sleep(backoff_base * (2 ** (attempt - 1)))
        try:
            resp = session.post(url, json=json_payload, timeout=timeout, headers=headers)
        except requests.RequestException as exc:
            last_error = str(exc)
            continue
        if resp.status_code == 429 or resp.status_code >= 500:
            last_error = f"HTTP {resp.status_code}"
            continue
        resp.raise_for_status()
        return resp.json()
    raise TransientServiceError(
        f"POST {url} failed after {max_attempts} attempts: {last_error}",
        retries_exhausted=True,
    )


class EmbeddingCache:
    """In-memory cache keyed by (provider_id, text hash), optionally backed
    by a content-addressed directory so reruns skip recomputation."""

    def __init__(self, disk_dir: Optional[str | Path] = None):
        self._mem: dict[tuple[str, str], EmbeddingVector] = {}
        self._lock = threading.Lock()
        self.disk_dir = Path(disk_dir) if disk_dir else None

    def _disk_path(self, provider_id: str, text_hash: str) -> Optional[Path]:
        if self.disk_dir is None:
            return None
        safe = provider_id.replace("/", "_").replace(":", "_")
        return self.disk_dir / safe / f"{text_hash}.json"

    def get(self, provider_id: str, text_hash: str) -> Optional[EmbeddingVector]:
        with self._lock:
            hit = self._mem.get((provider_id, text_hash))
        if hit is not None:
            return hit
        path = self._disk_path(provider_id, text_hash)
        if path is not None and path.exists():
            d = read_json(path)
            vec = EmbeddingVector(
                values=np.asarray(d["values"], dtype=np.float64),
                dim=int(d["dim"]),
                provider_id=d["provider_id"],
            )
            with self._lock:
                self._mem[(provider_id, text_hash)] = vec
            return vec
        return None

    def put(self, provider_id: str, text_hash: str, vec: EmbeddingVector) -> None:
        with self._lock:
            self._mem[(provider_id, text_hash)] = vec
        path = self._disk_path(provider_id, text_hash)
        if path is not None:
            write_json(
                path,
                {"provider_id": vec.provider_id, "dim": vec.dim, "values": vec.values.tolist()},
            )

    def clear(self) -> None:
        with self._lock:
            self._mem.clear()


_default_cache = EmbeddingCache()


def clear_embedding_cache() -> None:
    _default_cache.clear()


def embed(
    text: str, provider: EmbeddingProvider, cache: Optional[EmbeddingCache] = None
) -> EmbeddingVector:
    """Sentence vector for text. Providers exposing token_vectors() get
    arithmetic-mean pooling; results are cached by (provider id, text hash)
    and the cached path returns bit-identical vectors."""
    if not text or not text.strip():
        raise EmbeddingError("cannot embed empty text")
    cache = cache if cache is not None else _default_cache
    key_hash = text_sha256(text)
    hit = cache.get(provider.id, key_hash)
    if hit is not None:
        return hit
    if hasattr(provider, "token_vectors"):
        token_vecs = provider.token_vectors(text)
        if not token_vecs:
            raise EmbeddingError(f"provider {provider.id} returned no token vectors")
        arr = np.mean(np.asarray(token_vecs, dtype=np.float64), axis=0)
        vec = EmbeddingVector(values=arr, dim=arr.shape[0], provider_id=provider.id)
    else:
        vec = provider.embed_batch([text])[0]
    cache.put(provider.id, key_hash, vec)
    return vec


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """dot(a,b) / (|a||b|), clamped to [-1, 1] against float drift."""
    if a.dim != b.dim:
        raise EmbeddingError(f"dimension mismatch: {a.dim} vs {b.dim}")
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na == 0.0 or nb == 0.0:
        raise EmbeddingError("cosine similarity undefined for a zero vector")
    sim = float(np.dot(a.values, b.values) / (na * nb))
    return max(-1.0, min(1.0, sim))


def sentence_similarity(
    s: str,
    t: str,
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
) -> float:
    return cosine_similarity(embed(s, provider, cache), embed(t, provider, cache))


def exceeds_threshold(sim: float, theta: float = 0.6) -> bool:
    """Strictly greater: a score of exactly theta does not pass."""
    return sim > theta
