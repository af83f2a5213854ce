import random

import numpy as np
import pytest

from supcom.embedding import (
    EmbeddingCache,
    EmbeddingVector,
    OfflineHashingProvider,
    cosine_similarity,
    embed,
    exceeds_threshold,
    sentence_similarity,
)
from supcom.errors import EmbeddingError

# verified exactly orthogonal under the shipped hash seed (no position collisions)
ORTHOGONAL_PAIRS = [
    ("pause the consumer", "weather is nice today"),
    ("the quick brown fox", "jumps over lazy dogs"),
]


@pytest.fixture()
def provider():
    return OfflineHashingProvider()


@pytest.fixture()
def cache():
    return EmbeddingCache()


class TestOfflineProvider:
    def test_deterministic_across_calls(self, provider, cache):
        a = embed("pause consumer", provider, cache)
        b = embed("pause consumer", provider, cache)
        assert np.array_equal(a.values, b.values)

    def test_deterministic_across_instances(self, cache):
        a = embed("pause consumer", OfflineHashingProvider(), EmbeddingCache())
        b = embed("pause consumer", OfflineHashingProvider(), EmbeddingCache())
        assert np.array_equal(a.values, b.values)

    def test_unit_norm_and_dim(self, provider, cache):
        v = embed("pause consumer", provider, cache)
        assert v.dim == 512 and v.values.shape == (512,)
        assert np.linalg.norm(v.values) == pytest.approx(1.0, abs=1e-12)

    def test_token_order_free(self, provider):
        a = provider.embed_batch(["alpha beta gamma"])[0]
        b = provider.embed_batch(["gamma alpha beta"])[0]
        assert np.array_equal(a.values, b.values)

    def test_multiset_sensitivity(self, provider):
        a = provider.embed_batch(["echo echo once"])[0]
        b = provider.embed_batch(["echo once"])[0]
        assert not np.array_equal(a.values, b.values)

    def test_nonzero_for_punctuation_only_text(self, provider, cache):
        v = embed("!!!", provider, cache)
        assert np.linalg.norm(v.values) > 0

    def test_empty_text_rejected(self, provider, cache):
        with pytest.raises(EmbeddingError):
            embed("   ", provider, cache)

    def test_batch_order_preserved(self, provider):
        texts = ["one two", "three four", "five six"]
        vecs = provider.embed_batch(texts)
        singles = [provider.embed_batch([t])[0] for t in texts]
        for got, want in zip(vecs, singles):
            assert np.array_equal(got.values, want.values)


class TestMeanPooling:
    class TokenProvider:
        id = "stub-token"
        dim = 4

        def embed_batch(self, texts):
            raise AssertionError("engine must pool token vectors instead")

        def token_vectors(self, text):
            return [np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0, 0.0])]

    def test_engine_mean_pools_token_vectors(self, cache):
        v = embed("two tokens", self.TokenProvider(), cache)
        assert np.allclose(v.values, [0.5, 0.5, 0.0, 0.0])


class TestCache:
    def test_cached_path_bit_identical(self, provider):
        cache = EmbeddingCache()
        first = embed("pause consumer", provider, cache)
        second = embed("pause consumer", provider, cache)
        assert second is first or np.array_equal(second.values, first.values)

    def test_disk_cache_roundtrip(self, tmp_path, provider):
        disk = EmbeddingCache(disk_dir=tmp_path / "vecs")
        original = embed("stable text here", provider, disk)
        fresh = EmbeddingCache(disk_dir=tmp_path / "vecs")

        class Exploding:
            id = provider.id
            dim = provider.dim

            def embed_batch(self, texts):
                raise AssertionError("must be served from the disk cache")

        served = embed("stable text here", Exploding(), fresh)
        assert np.array_equal(served.values, original.values)


class TestCosine:
    def test_self_similarity(self, provider, cache):
        v = embed("pause consumer", provider, cache)
        assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-9)

    def test_negation(self):
        v = EmbeddingVector(values=np.array([1.0, 2.0, -3.0]), dim=3, provider_id="t")
        w = EmbeddingVector(values=-v.values, dim=3, provider_id="t")
        assert cosine_similarity(v, w) == pytest.approx(-1.0, abs=1e-12)

    def test_orthogonal_axes(self):
        a = EmbeddingVector(values=np.array([1.0, 0.0]), dim=2, provider_id="t")
        b = EmbeddingVector(values=np.array([0.0, 1.0]), dim=2, provider_id="t")
        assert cosine_similarity(a, b) == 0.0

    def test_dim_mismatch_rejected(self):
        a = EmbeddingVector(values=np.array([1.0, 0.0]), dim=2, provider_id="t")
        b = EmbeddingVector(values=np.array([1.0, 0.0, 0.0]), dim=3, provider_id="t")
        with pytest.raises(EmbeddingError):
            cosine_similarity(a, b)

    def test_zero_vector_rejected(self):
        a = EmbeddingVector(values=np.array([0.0, 0.0]), dim=2, provider_id="t")
        b = EmbeddingVector(values=np.array([1.0, 0.0]), dim=2, provider_id="t")
        with pytest.raises(EmbeddingError):
            cosine_similarity(a, b)

    def test_clamped_to_range(self, provider, cache):
        rng = random.Random(4)
        vocab = [f"w{i}" for i in range(30)]
        for _ in range(200):
            s = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 10)))
            t = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 10)))
            sim = sentence_similarity(s, t, provider, cache)
            assert -1.0 <= sim <= 1.0


class TestSentenceSimilarity:
    def test_identical_sentences(self, provider, cache):
        assert sentence_similarity("pause it", "pause it", provider, cache) == pytest.approx(
            1.0, abs=1e-9
        )

    @pytest.mark.parametrize("s,t", ORTHOGONAL_PAIRS)
    def test_token_disjoint_is_exactly_zero(self, provider, cache, s, t):
        assert sentence_similarity(s, t, provider, cache) == 0.0

    def test_symmetry_exact(self, provider, cache):
        rng = random.Random(8)
        vocab = [f"v{i}" for i in range(25)]
        for _ in range(100):
            s = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 9)))
            t = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 9)))
            assert sentence_similarity(s, t, provider, cache) == sentence_similarity(
                t, s, provider, cache
            )


class TestExceedsThreshold:
    def test_above(self):
        assert exceeds_threshold(0.61)

    def test_exactly_at_threshold_is_false(self):
        assert not exceeds_threshold(0.6)

    def test_one(self):
        assert exceeds_threshold(1.0)
