"""The HTTP embedding/side/chat clients against a local stub server that
speaks the documented wire formats."""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from supcom.embedding import HttpEmbeddingProvider, cosine_similarity, embed, EmbeddingCache
from supcom.errors import TransientServiceError
from supcom.generation import ChatParams, HttpChatProvider
from supcom.verification import HttpSideScorer


class _StubScoringHandler(BaseHTTPRequestHandler):
    fail_first: int = 0
    requests: list = []

    def _read(self):
        length = int(self.headers.get("Content-Length", "0"))
        return json.loads(self.rfile.read(length) or b"{}")

    def _send(self, obj, status=200):
        body = json.dumps(obj).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):  # noqa: N802 (http.server API)
        cls = type(self)
        if cls.fail_first > 0:
            cls.fail_first -= 1
            self._send({"detail": "unavailable"}, status=503)
            return
        payload = self._read()
        cls.requests.append((self.path, payload, self.headers.get("Authorization")))
        if self.path == "/embed":
            # unit basis vectors keyed by text order: deterministic and simple
            texts = payload["texts"]
            vectors = []
            for t in texts:
                v = [0.0] * 8
                v[hash_stable(t) % 8] = 1.0
                vectors.append(v)
            self._send({"vectors": vectors, "dim": 8, "model_id": "stub-embed"})
        elif self.path == "/side":
            scores = [
                1.0 if "pause" in s.lower() else -0.5 for s in payload["sentences"]
            ]
            self._send({"scores": scores, "model_id": "stub-side"})
        elif self.path == "/chat":
            self._send(
                {"choices": [{"message": {"role": "assistant", "content": "## Concept\nStub reply."}}]}
            )
        else:
            self._send({"detail": "not found"}, status=404)

    def log_message(self, *args):
        pass


def hash_stable(text: str) -> int:
    import hashlib

    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "big")


@pytest.fixture()
def stub_server():
    handler = _StubScoringHandler
    handler.fail_first = 0
    handler.requests = []
    server = HTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}", handler
    server.shutdown()
    thread.join(timeout=5)


class TestHttpEmbeddingProvider:
    def test_parses_vectors_and_discovers_dim(self, stub_server):
        base, _ = stub_server
        provider = HttpEmbeddingProvider(base_url=base, backoff_base=0.001)
        vecs = provider.embed_batch(["alpha", "beta"])
        assert provider.dim == 8
        assert all(v.dim == 8 and v.values.shape == (8,) for v in vecs)

    def test_engine_embed_and_cache(self, stub_server):
        base, handler = stub_server
        provider = HttpEmbeddingProvider(base_url=base, backoff_base=0.001)
        cache = EmbeddingCache()
        a = embed("alpha", provider, cache)
        b = embed("alpha", provider, cache)
        assert np.array_equal(a.values, b.values)
        assert len([r for r in handler.requests if r[0] == "/embed"]) == 1
        assert cosine_similarity(a, b) == pytest.approx(1.0)

    def test_retries_then_succeeds(self, stub_server):
        base, handler = stub_server
        handler.fail_first = 2
        provider = HttpEmbeddingProvider(base_url=base, backoff_base=0.001)
        vecs = provider.embed_batch(["alpha"])
        assert len(vecs) == 1

    def test_exhausted_retries_raise_transient(self, stub_server):
        base, handler = stub_server
        handler.fail_first = 5
        provider = HttpEmbeddingProvider(base_url=base, backoff_base=0.001, max_attempts=3)
        with pytest.raises(TransientServiceError) as err:
            provider.embed_batch(["alpha"])
        assert err.value.retries_exhausted


class TestHttpSideScorer:
    def test_scores_parsed(self, stub_server):
        base, _ = stub_server
        scorer = HttpSideScorer(base_url=base, backoff_base=0.001)
        assert scorer.score("void f() {}", "please pause the thing") == 1.0
        assert scorer.score("void f() {}", "unrelated") == -0.5


class TestHttpChatProvider:
    def test_completion_roundtrip(self, stub_server):
        base, handler = stub_server
        provider = HttpChatProvider(endpoint=f"{base}/chat", model="stub-model", backoff_base=0.001)
        text = provider.complete("system text", "user text", ChatParams(temperature=0.0))
        assert "Stub reply" in text
        path, payload, _ = [r for r in handler.requests if r[0] == "/chat"][0]
        assert payload["temperature"] == 0.0
        assert payload["model"] == "stub-model"
        assert [m["role"] for m in payload["messages"]] == ["system", "user"]

    def test_api_key_header_from_env(self, stub_server, monkeypatch):
        base, handler = stub_server
        monkeypatch.setenv("DEMO_CHAT_KEY", "tok-123")
        provider = HttpChatProvider(
            endpoint=f"{base}/chat", model="m", api_key_env="DEMO_CHAT_KEY", backoff_base=0.001
        )
        provider.complete("s", "u", ChatParams())
        _, _, auth = [r for r in handler.requests if r[0] == "/chat"][0]
        assert auth == "Bearer tok-123"
