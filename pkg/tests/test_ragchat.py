from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from leafassist.boxes import BBox, ClassList, Detection
from leafassist.embeddings import DeterministicEmbedder
from leafassist.errors import TransportError
from leafassist.ingest import Chunk
from leafassist.llmclient import Completion
from leafassist.ragchat import (EMPTY_CONTEXT_NOTICE, RagChat, Session,
                                dedupe_class_names, form_query)
from leafassist.vectorstore import VectorStore

CLASSES = ClassList()
DIM = 64


def det(name, conf):
    class_id = CLASSES.names.index(name)
    return Detection(class_id, name, BBox(0, 0, 10, 10), conf)


class FakeLlm:
    """In-process LLM double: echoes the prompt, records every call."""

    def __init__(self, fail=False):
        self.calls = []
        self.fail = fail

    def complete(self, messages):
        self.calls.append(messages)
        if self.fail:
            raise TransportError("scripted failure")
        return Completion(text="ECHO:" + messages[0].content, model="fake",
                          latency_ms=1.0)


def make_chat(texts, llm=None, k=4, budget=4000):
    """Build a RagChat over a store holding one chunk per text."""
    embedder = DeterministicEmbedder(dim=DIM)
    store = VectorStore(dim=DIM)
    chunks = [Chunk(f"kb.md#{i}", text, "kb.md", i, (0, len(text)))
              for i, text in enumerate(texts)]
    store.add(zip(chunks, embedder.embed_texts([c.text for c in chunks])))
    return RagChat(store, embedder, llm or FakeLlm(), k=k,
                   context_char_budget=budget, clock=lambda: 12345.0)


class TestFormQuery:
    def test_healthy_leaf(self):
        assert form_query([]) == \
            "No disease detected. Provide general coffee leaf care guidance."

    def test_single_disease(self):
        assert form_query([det("rust", 0.9)]) == (
            "Detected disease(s): rust. Describe the disease, its causes, "
            "symptoms, and recommended remedies.")

    def test_dedupe_and_confidence_order(self):
        dets = [det("rust", 0.6), det("phoma", 0.8), det("rust", 0.5)]
        assert dedupe_class_names(dets) == ["phoma", "rust"]
        assert "Detected disease(s): phoma, rust." in form_query(dets)

    def test_each_name_appears_once(self):
        dets = [det("rust", 0.5), det("rust", 0.9), det("miner", 0.7)]
        query = form_query(dets)
        assert query.count("rust") == 1
        assert query.count("miner") == 1

    def test_tied_confidence_keeps_first_appearance(self):
        dets = [det("phoma", 0.7), det("rust", 0.7)]
        assert dedupe_class_names(dets) == ["phoma", "rust"]


class TestRetrieve:
    def test_empty_store(self):
        chat = RagChat(VectorStore(dim=DIM), DeterministicEmbedder(DIM), FakeLlm())
        assert chat.retrieve("anything") == []

    def test_exact_text_ranks_first(self):
        chat = make_chat(["orange pustules rust", "leaf miner tunnels",
                          "phoma dieback shoots"])
        hits = chat.retrieve("orange pustules rust")
        assert hits[0].chunk.chunk_id == "kb.md#0"
        assert hits[0].score == pytest.approx(1.0)

    def test_top_k_prefix_of_full_ranking(self):
        texts = [f"disease passage number {i} about leaves" for i in range(6)]
        chat = make_chat(texts)
        full = chat.retrieve("passage about leaves", k=6)
        top2 = chat.retrieve("passage about leaves", k=2)
        assert [h.chunk.chunk_id for h in top2] == \
            [h.chunk.chunk_id for h in full[:2]]


class TestBuildPrompt:
    def test_single_chunk_context(self):
        chat = make_chat(["rust remedy text"])
        session = Session("s1", window_size=2)
        retrieved = chat.retrieve("rust remedy text", k=1)
        bundle = chat.build_prompt("What helps?", retrieved, session)
        assert len(bundle.context_entries) == 1
        assert bundle.context_entries[0] == "[source: kb.md#0] rust remedy text"
        messages = bundle.to_messages()
        assert messages[0].role == "system"
        assert "[source: kb.md#0]" in messages[0].content
        assert messages[-1].content == "What helps?"

    def test_empty_retrieval_notice(self):
        chat = make_chat(["rust text"])
        bundle = chat.build_prompt("q", [], Session("s1"))
        assert bundle.context_entries == ()
        assert EMPTY_CONTEXT_NOTICE in bundle.to_messages()[0].content

    def test_window_evicts_oldest_exchange(self):
        chat = make_chat(["rust text"])
        session = Session("s1", window_size=2)
        for i in range(3):
            chat.answer(f"question {i}", session)
        bundle = chat.build_prompt("next", chat.retrieve("rust"), session)
        contents = [t.content for t in bundle.history]
        assert not any("question 0" in c for c in contents)
        assert any("question 1" in c for c in contents)
        assert any("question 2" in c for c in contents)

    def test_same_source_chunks_tagged_distinctly(self):
        chat = make_chat(["first rust passage", "second rust passage"])
        retrieved = chat.retrieve("rust passage", k=2)
        bundle = chat.build_prompt("q", retrieved, Session("s1"))
        tags = [entry.split("]")[0] for entry in bundle.context_entries]
        assert len(set(tags)) == 2

    def test_context_budget_drops_lowest_scored(self):
        chat = make_chat(["rust alpha " * 30, "rust beta " * 30], budget=400)
        retrieved = chat.retrieve("rust", k=2)
        bundle = chat.build_prompt("q", retrieved, Session("s1"))
        assert len(bundle.context_entries) == 1
        kept_id = retrieved[0].chunk.chunk_id
        assert kept_id in bundle.context_entries[0]


class TestAnswer:
    def test_echo_contains_chunk_text(self):
        llm = FakeLlm()
        chat = make_chat(["copper sprays control rust"], llm=llm)
        answer = chat.answer("Detected disease(s): rust. Describe it.",
                             Session("s1"))
        assert "copper sprays control rust" in answer.text
        assert answer.sources == (("kb.md", "kb.md#0"),)
        assert answer.model_name == "fake"

    def test_history_accumulates(self):
        llm = FakeLlm()
        chat = make_chat(["rust text"], llm=llm)
        session = Session("s1")
        chat.answer("first question", session)
        chat.answer("second question", session)
        assert len(session.turns) == 4
        second_call = llm.calls[1]
        assert any("first question" in m.content for m in second_call)

    def test_failure_leaves_session_untouched(self):
        chat = make_chat(["rust text"], llm=FakeLlm(fail=True))
        session = Session("s1")
        with pytest.raises(TransportError):
            chat.answer("q", session)
        assert session.turns == []

    def test_followup_query_prefixed_with_diseases(self):
        llm = FakeLlm()
        chat = make_chat(["rust text"], llm=llm)
        session = Session("s1")
        session.detections = [det("rust", 0.9)]
        chat.answer("Detected disease(s): rust. Describe it.", session)
        chat.answer("can I use organic products?", session)
        # the follow-up user message is verbatim; the retrieval used the prefix
        last_call = llm.calls[-1]
        assert last_call[-1].content == "can I use organic products?"

    def test_turn_roles_alternate(self):
        chat = make_chat(["rust text"])
        session = Session("s1")
        chat.answer("q1", session)
        chat.answer("q2", session)
        assert [t.role for t in session.turns] == \
            ["user", "assistant", "user", "assistant"]


class TestWindowProperty:
    @given(st.integers(1, 4), st.lists(st.text(
        alphabet="abcdefgh ", min_size=1, max_size=12), min_size=1, max_size=10))
    @settings(max_examples=25, deadline=None)
    def test_history_never_exceeds_window(self, window, questions):
        llm = FakeLlm()
        chat = make_chat(["rust text", "miner text"], llm=llm)
        session = Session("s1", window_size=window)
        for question in questions:
            chat.answer(question, session)
        for call in llm.calls:
            history_messages = call[1:-1]  # between system and current question
            assert len(history_messages) <= 2 * window

    @given(st.lists(st.sampled_from(["rust", "miner", "phoma", "care"]),
                    min_size=1, max_size=6))
    @settings(max_examples=25, deadline=None)
    def test_source_soundness(self, topics):
        llm = FakeLlm()
        chat = make_chat([f"{t} passage text" for t in
                          ("rust", "miner", "phoma", "care")], llm=llm, k=2)
        session = Session("s1")
        for topic in topics:
            retrieved_ids = {h.chunk.chunk_id for h in chat.retrieve(f"{topic} passage text")}
            answer = chat.answer(f"{topic} passage text", session)
            answered_ids = {cid for _, cid in answer.sources}
            assert answered_ids <= retrieved_ids
