from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from leafassist.embeddings import cosine_similarity, l2_normalize
from leafassist.ingest import Chunk
from leafassist.vectorstore import StoreLoadError, VectorStore


def chunk(i, text=None):
    return Chunk(chunk_id=f"doc.md#{i}", text=text or f"text {i}",
                 source_id="doc.md", ordinal=i, char_span=(i, i + 1))


def unit(values):
    return l2_normalize(np.asarray(values, dtype=np.float64))


class TestAdd:
    def test_add_nothing(self):
        assert VectorStore(dim=4).add([]) == 0

    def test_add_distinct(self):
        store = VectorStore(dim=4)
        assert store.add([(chunk(i), unit([1, i, 0, 0])) for i in range(3)]) == 3
        assert len(store) == 3

    def test_upsert_same_id(self):
        store = VectorStore(dim=2)
        store.add([(chunk(0), unit([1, 0]))])
        added = store.add([(chunk(0), unit([0, 1]))])
        assert added == 0
        assert len(store) == 1
        [hit] = store.search(unit([0, 1]), k=1)
        assert hit.score == pytest.approx(1.0)  # latest vector wins

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            VectorStore(dim=4).add([(chunk(0), unit([1, 0]))])


class TestSearch:
    def test_empty_store(self):
        assert VectorStore(dim=4).search(unit([1, 0, 0, 0]), k=5) == []

    def test_self_query_scores_one(self):
        store = VectorStore(dim=4)
        vec = unit([1, 2, 3, 4])
        store.add([(chunk(0), vec)])
        [hit] = store.search(vec, k=1)
        assert hit.chunk.chunk_id == "doc.md#0"
        assert hit.score == pytest.approx(1.0)

    def test_k_larger_than_store(self):
        store = VectorStore(dim=2)
        store.add([(chunk(i), unit([1, i])) for i in range(3)])
        assert len(store.search(unit([1, 0]), k=10)) == 3

    def test_bad_k(self):
        with pytest.raises(ValueError):
            VectorStore(dim=2).search(unit([1, 0]), k=0)

    def test_tie_break_by_insertion_order(self):
        store = VectorStore(dim=2)
        same = unit([1, 1])
        store.add([(chunk(i), same) for i in range(4)])
        hits = store.search(unit([1, 1]), k=4)
        assert [h.chunk.chunk_id for h in hits] == [f"doc.md#{i}" for i in range(4)]

    vectors_st = st.lists(
        st.lists(st.floats(-1, 1), min_size=6, max_size=6)
        .filter(lambda v: any(x != 0 for x in v)).map(unit),
        min_size=1, max_size=40)

    @given(vectors_st, st.integers(1, 10))
    @settings(max_examples=60)
    def test_matches_full_sort_oracle(self, vectors, k):
        store = VectorStore(dim=6)
        store.add([(chunk(i), v) for i, v in enumerate(vectors)])
        query = vectors[0]
        got = store.search(query, k)
        scored = [(cosine_similarity(query, v), i) for i, v in enumerate(vectors)]
        expected = sorted(scored, key=lambda t: (-t[0], t[1]))[:k]
        assert [(h.score, h.chunk.ordinal) for h in got] == expected

    @given(vectors_st)
    @settings(max_examples=40)
    def test_scores_non_increasing_and_bounded(self, vectors):
        store = VectorStore(dim=6)
        store.add([(chunk(i), v) for i, v in enumerate(vectors)])
        hits = store.search(vectors[-1], k=len(vectors))
        scores = [h.score for h in hits]
        assert scores == sorted(scores, reverse=True)
        assert all(abs(s) <= 1 + 1e-9 for s in scores)

    def test_upsert_idempotent_for_search(self):
        store = VectorStore(dim=2)
        pairs = [(chunk(i), unit([1, i])) for i in range(3)]
        store.add(pairs)
        before = store.search(unit([1, 2]), k=3)
        store.add(pairs)
        after = store.search(unit([1, 2]), k=3)
        assert [(h.chunk.chunk_id, h.score) for h in before] == \
            [(h.chunk.chunk_id, h.score) for h in after]


class TestPersistence:
    def test_empty_round_trip(self, tmp_path):
        store = VectorStore(dim=4)
        store.persist(tmp_path / "s.jsonl")
        loaded = VectorStore.load(tmp_path / "s.jsonl")
        assert len(loaded) == 0 and loaded.dim == 4

    def test_round_trip_preserves_search(self, tmp_path):
        store = VectorStore(dim=3)
        store.add([(chunk(i), unit([1, i, i * i])) for i in range(3)])
        store.persist(tmp_path / "s.jsonl")
        loaded = VectorStore.load(tmp_path / "s.jsonl")
        query = unit([1, 2, 3])
        assert store.search(query, 3) == loaded.search(query, 3)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("PK\x03\x04 not a store\n", encoding="utf-8")
        with pytest.raises(StoreLoadError):
            VectorStore.load(path)

    def test_wrong_version_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps({"version": 99, "dim": 4}) + "\n", encoding="utf-8")
        with pytest.raises(StoreLoadError, match="version"):
            VectorStore.load(path)

    def test_corrupt_entry_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps({"version": 1, "dim": 4}) + "\n{broken\n",
                        encoding="utf-8")
        with pytest.raises(StoreLoadError, match="line 2"):
            VectorStore.load(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(StoreLoadError):
            VectorStore.load(tmp_path / "absent.jsonl")

    def test_upsert_after_load_continues_indices(self, tmp_path):
        store = VectorStore(dim=2)
        store.add([(chunk(0), unit([1, 0])), (chunk(1), unit([0, 1]))])
        store.persist(tmp_path / "s.jsonl")
        loaded = VectorStore.load(tmp_path / "s.jsonl")
        loaded.add([(chunk(0), unit([1, 1]))])  # re-add bumps insertion index
        hits = loaded.search(unit([1, 1]), k=2)
        assert hits[0].chunk.chunk_id == "doc.md#0"
