"""Embedding and alignment backends.

The hashing backend is the zero-dependency default: deterministic keyed-hash
token vectors, mean-pooled and L2-normalized. A sentence-transformers
backend can be selected at deploy time; the wire contract is identical
either way.
"""

from __future__ import annotations

import re
import threading
from hashlib import blake2b
from typing import Optional, Protocol, Sequence

import numpy as np

_HASH_KEY = b"scoring-service-v1"
_IDENT_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
_SUBTOKEN_RE = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|[0-9]+")
_WORD_RE = re.compile(r"[0-9A-Za-z]+")

_JAVA_KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while var record yield
    true false null""".split()
)


class Backend(Protocol):
    model_id: str
    dim: int

    def ready(self) -> bool: ...

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...

    def side_scores(self, code: str, sentences: Sequence[str]) -> list[float]: ...


def code_identifier_text(code: str) -> str:
    """Lowercased camelCase/snake_case fragments of the code's identifiers,
    joined as one text; the alignment target for the hashing backend."""
    fragments: set[str] = set()
    for name in _IDENT_RE.findall(code):
        if name in _JAVA_KEYWORDS:
            continue
        for chunk in re.split(r"[_$]+", name):
            for frag in _SUBTOKEN_RE.findall(chunk):
                if len(frag) >= 2:
                    fragments.add(frag.lower())
    return " ".join(sorted(fragments))


class HashingBackend:
    """Deterministic fallback: each token maps to k signed positions of a
    d-dimensional vector; token vectors are mean-pooled and normalized."""

    def __init__(self, dim: int = 512, k: int = 4):
        self.dim = dim
        self.k = k
        self.model_id = f"hashing-v1-d{dim}k{k}"

    def ready(self) -> bool:
        return True

    def _token_vector(self, token: str) -> np.ndarray:
        v = np.zeros(self.dim, dtype=np.float64)
        for slot in range(self.k):
            digest = blake2b(
                f"{token}\x00{slot}".encode("utf-8"), digest_size=8, key=_HASH_KEY
            ).digest()
            index = int.from_bytes(digest[:4], "big") % self.dim
            sign = 1.0 if digest[4] & 1 == 0 else -1.0
            v[index] += sign
        return v

    def _sentence_vector(self, text: str) -> np.ndarray:
        tokens = [t.lower() for t in _WORD_RE.findall(text)] or [text.strip() or "_"]
        pooled = np.mean([self._token_vector(t) for t in tokens], axis=0)
        norm = float(np.linalg.norm(pooled))
        if norm == 0.0:
            pooled[0] = 1.0
            norm = 1.0
        return pooled / norm

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self._sentence_vector(t) for t in texts])

    def side_scores(self, code: str, sentences: Sequence[str]) -> list[float]:
        ident_text = code_identifier_text(code)
        if not ident_text:
            return [0.0 for _ in sentences]
        target = self._sentence_vector(ident_text)
        return [float(np.dot(self._sentence_vector(s), target)) for s in sentences]


class SbertBackend:
    """sentence-transformers backend, lazily loaded; reports not-ready until
    the model is in memory (the service answers 503 meanwhile)."""

    def __init__(self, model_name: str):
        self.model_name = model_name
        self.model_id = f"sbert:{model_name}"
        self.dim = 0
        self._model = None
        self._lock = threading.Lock()
        self._error: Optional[str] = None

    def ready(self) -> bool:
        if self._model is not None:
            return True
        with self._lock:
            if self._model is None and self._error is None:
                try:
                    from sentence_transformers import SentenceTransformer

                    self._model = SentenceTransformer(self.model_name)
                    self.dim = int(self._model.get_sentence_embedding_dimension())
                except Exception as exc:  # model missing or no download path
                    self._error = str(exc)
        return self._model is not None

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        vectors = self._model.encode(list(texts), convert_to_numpy=True, show_progress_bar=False)
        return np.asarray(vectors, dtype=np.float64)

    def side_scores(self, code: str, sentences: Sequence[str]) -> list[float]:
        code_vec = self.embed([code])[0]
        code_vec = code_vec / (np.linalg.norm(code_vec) or 1.0)
        out = []
        for vec in self.embed(list(sentences)):
            vec = vec / (np.linalg.norm(vec) or 1.0)
            out.append(float(np.dot(vec, code_vec)))
        return out
