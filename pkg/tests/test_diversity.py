import math
import random

import numpy as np
import pytest

from codecurate.diversity import (DiversityError, EmbeddingVector, HashedBagOfWords,
                                  SelectedSet, VectorCache, cosine, embed_pool,
                                  nn_similarity, select)
from codecurate.scoring import ScoreRecord

from conftest import make_dataset


def vec(*values):
    return EmbeddingVector.of(list(values))


def records_and_vectors(rng, size, dim=8):
    """Random scored records with random embeddings."""
    records = [ScoreRecord(sample_id=f"s{i:03d}", c=0.0, q=0,
                           c_norm=0.0, q_norm=0.0, s=rng.random())
               for i in range(size)]
    vectors = {r.sample_id: EmbeddingVector.of([rng.uniform(-1, 1) for _ in range(dim)] or [1])
               for r in records}
    return records, vectors


def brute_force_select(records, vectors, q, tau):
    """Independent greedy reference: explicit loops, no SelectedSet reuse."""
    ordered = sorted(records, key=lambda r: (-r.s, r.sample_id))
    chosen_ids, chosen_vecs = [], []
    for r in ordered:
        v = vectors[r.sample_id]
        if chosen_vecs:
            best = max(float(np.dot(v.values, w.values)) / (v.norm * w.norm)
                       for w in chosen_vecs)
        else:
            best = -1.0
        if best < tau:
            chosen_ids.append(r.sample_id)
            chosen_vecs.append(v)
        if len(chosen_ids) >= q:
            break
    return chosen_ids


class TestEmbeddingVector:
    def test_zero_vector_rejected(self):
        with pytest.raises(DiversityError):
            EmbeddingVector.of([0.0, 0.0])

    def test_non_finite_rejected(self):
        with pytest.raises(DiversityError):
            EmbeddingVector.of([1.0, float("inf")])

    def test_norm_stored(self):
        assert vec(3.0, 4.0).norm == 5.0


class TestNnSimilarity:
    def test_self_similarity(self):
        v = vec(1.0, 2.0, 3.0)
        d = SelectedSet()
        d.add("a", v)
        assert nn_similarity(v, d) == pytest.approx(1.0)

    def test_empty_set_sentinel(self):
        assert nn_similarity(vec(1.0), SelectedSet()) == -1.0

    def test_hand_computed_max(self):
        v = vec(1.0, 0.0, 0.0)
        a = vec(1.0, 1.0, 0.0)   # cos = 1/sqrt(2)
        b = vec(0.0, 1.0, 0.0)   # cos = 0
        d = SelectedSet()
        d.add("a", a)
        d.add("b", b)
        assert nn_similarity(v, d) == pytest.approx(1.0 / math.sqrt(2))

    def test_dimension_mismatch(self):
        d = SelectedSet()
        d.add("a", vec(1.0, 0.0))
        with pytest.raises(DiversityError):
            nn_similarity(vec(1.0, 0.0, 0.0), d)


class TestHashedBagOfWords:
    def test_deterministic(self):
        p = HashedBagOfWords(dim=32)
        a = p.embed("some instruction text")
        b = p.embed("some instruction text")
        assert np.array_equal(a.values, b.values)

    def test_empty_text_rejected(self):
        with pytest.raises(DiversityError):
            HashedBagOfWords(dim=32).embed("")


class TestSelect:
    def test_tau_above_any_cosine_gives_top_q(self):
        rng = random.Random(1)
        records, vectors = records_and_vectors(rng, 20)
        chosen = select(records, vectors, q_budget=5, tau=2.0)
        expected = [r.sample_id for r in sorted(records, key=lambda r: (-r.s, r.sample_id))[:5]]
        assert chosen.ids == expected

    def test_identical_embeddings_admit_one(self):
        rng = random.Random(2)
        records = [ScoreRecord(sample_id=f"s{i}", c=0, q=0, c_norm=0, q_norm=0,
                               s=rng.random()) for i in range(10)]
        same = EmbeddingVector.of([1.0, 2.0])
        vectors = {r.sample_id: same for r in records}
        chosen = select(records, vectors, q_budget=10, tau=0.9)
        assert len(chosen) == 1

    def test_matches_brute_force_reference(self):
        pool = make_dataset([f"synthetic sample number {i} about topic {i % 7}"
                             for i in range(30)])
        provider = HashedBagOfWords(dim=64)
        vectors = {s.id: provider.embed(f"synthetic sample number {i} about topic {i % 7}")
                   for i, s in enumerate(pool.samples)}
        rng = random.Random(3)
        records = [ScoreRecord(sample_id=s.id, c=0, q=0, c_norm=0, q_norm=0,
                               s=rng.random()) for s in pool.samples]
        expected = brute_force_select(records, vectors, 10, 0.945)
        assert select(records, vectors, 10, 0.945).ids == expected

    def test_budget_respected(self):
        rng = random.Random(4)
        records, vectors = records_and_vectors(rng, 40)
        assert len(select(records, vectors, 7, 2.0)) <= 7

    def test_admitted_is_subsequence_of_sorted_order(self):
        rng = random.Random(5)
        records, vectors = records_and_vectors(rng, 30)
        chosen = select(records, vectors, 30, 0.5)
        order = [r.sample_id for r in sorted(records, key=lambda r: (-r.s, r.sample_id))]
        positions = [order.index(i) for i in chosen.ids]
        assert positions == sorted(positions)

    def test_raising_tau_never_shrinks(self):
        for seed in range(10):
            rng = random.Random(seed)
            records, vectors = records_and_vectors(rng, 25)
            low = select(records, vectors, 25, 0.3)
            high = select(records, vectors, 25, 0.8)
            assert set(low.ids) <= set(high.ids)

    def test_pure_reruns_identical(self):
        rng = random.Random(6)
        records, vectors = records_and_vectors(rng, 20)
        assert select(records, vectors, 8, 0.7).ids == select(records, vectors, 8, 0.7).ids

    def test_unscored_sample_rejected(self):
        records = [ScoreRecord(sample_id="a")]
        with pytest.raises(DiversityError):
            select(records, {"a": vec(1.0)}, 1, 0.9)

    def test_metric_mode_first_always_admitted(self):
        records = [ScoreRecord(sample_id="a", c=0, q=0, c_norm=0, q_norm=0, s=1.0)]
        chosen = select(records, {"a": vec(1.0, 0.0)}, 1, 0.945, distance_mode="metric")
        assert chosen.ids == ["a"]

    def test_replay_admission_invariant(self):
        # every admitted sample had nn similarity < tau against the set at its moment
        rng = random.Random(8)
        records, vectors = records_and_vectors(rng, 30)
        tau = 0.6
        chosen = select(records, vectors, 30, tau)
        replay = SelectedSet()
        for sid in chosen.ids:
            assert nn_similarity(vectors[sid], replay) < tau
            replay.add(sid, vectors[sid])


class TestEmbedPool:
    def test_counts_and_cache(self, tmp_path):
        pool = make_dataset([f"text number {i}" for i in range(100)])
        cache = VectorCache(tmp_path / "vec")

        class Counting(HashedBagOfWords):
            calls = 0

            def embed(self, text):
                Counting.calls += 1
                return super().embed(text)

        provider = Counting(dim=16)
        vectors, failed = embed_pool(pool.samples, provider, cache=cache)
        assert len(vectors) == 100 and failed == [] and Counting.calls == 100
        vectors2, _ = embed_pool(pool.samples, provider, cache=cache)
        assert Counting.calls == 100  # warm cache: zero provider calls
        for sid in vectors:
            assert np.allclose(vectors[sid].values, vectors2[sid].values)

    def test_cache_hit_identical_vector(self, tmp_path):
        pool = make_dataset(["only one sample"])
        cache = VectorCache(tmp_path / "vec")
        provider = HashedBagOfWords(dim=16)
        first, _ = embed_pool(pool.samples, provider, cache=cache)
        second, _ = embed_pool(pool.samples, provider, cache=cache)
        sid = pool.samples[0].id
        assert np.array_equal(first[sid].values, second[sid].values)

    def test_empty_pool(self):
        vectors, failed = embed_pool([], HashedBagOfWords(dim=8))
        assert vectors == {} and failed == []

    def test_provider_failure_excludes_sample(self):
        pool = make_dataset(["good text"])
        # punctuation-only instruction tokenizes to nothing -> zero vector -> excluded
        from codecurate.corpus import Message, Sample
        bad = Sample(id="bad", source="f",
                     messages=(Message("user", "!!!"), Message("assistant", "x")))
        vectors, failed = embed_pool([pool.samples[0], bad], HashedBagOfWords(dim=8))
        assert failed == ["bad"]
        assert pool.samples[0].id in vectors
