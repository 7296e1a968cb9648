"""Retrieval-then-read chat: query forming, retrieval, prompt assembly, memory.

The flow per turn: embed a query, pull the top passages from the vector store,
assemble a prompt whose system message carries the passages with source tags,
append a bounded window of recent conversation, call the LLM, and return the
answer together with the chunk ids it was grounded on. A turn that fails
leaves the session untouched.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .boxes import Detection
from .llmclient import ChatMessage
from .vectorstore import ScoredChunk, VectorStore

DEFAULT_K = 4
DEFAULT_WINDOW_SIZE = 5
DEFAULT_CONTEXT_CHAR_BUDGET = 4000

SYSTEM_INSTRUCTION = (
    "You are an assistant for coffee growers diagnosing leaf diseases. "
    "Answer using only the passages in the context block below; do not draw on "
    "outside knowledge. When the passages do not cover the question, say that "
    "the topic is not covered by the knowledge base. Keep advice practical and "
    "mention the source passages you relied on."
)

EMPTY_CONTEXT_NOTICE = (
    "No knowledge-base passages were found for this query. Tell the user the "
    "topic is not covered by the knowledge base."
)

DISEASE_QUERY_TEMPLATE = (
    "Detected disease(s): {names}. Describe the disease, its causes, symptoms, "
    "and recommended remedies."
)

HEALTHY_QUERY = "No disease detected. Provide general coffee leaf care guidance."


@dataclass(frozen=True)
class ChatTurn:
    role: str  # "user" | "assistant"
    content: str
    sources: tuple = ()  # chunk ids; assistant turns only
    timestamp: float = 0.0


@dataclass
class Session:
    """Conversation state: full transcript plus the diagnosis context.

    Prompt construction sees at most ``window_size`` most-recent exchanges;
    the full transcript is kept for the history endpoint.
    """

    session_id: str
    window_size: int = DEFAULT_WINDOW_SIZE
    turns: list = field(default_factory=list)
    detections: list = field(default_factory=list)

    def windowed_turns(self) -> list:
        return self.turns[-2 * self.window_size:] if self.window_size > 0 else []


@dataclass(frozen=True)
class PromptBundle:
    system: str
    context_entries: tuple  # formatted "[source: id] text" strings
    history: tuple  # ChatTurns, oldest first
    question: str

    def to_messages(self) -> list[ChatMessage]:
        if self.context_entries:
            context_block = "\n\n".join(self.context_entries)
        else:
            context_block = EMPTY_CONTEXT_NOTICE
        system = f"{self.system}\n\nContext:\n{context_block}"
        messages = [ChatMessage("system", system)]
        for turn in self.history:
            messages.append(ChatMessage(turn.role, turn.content))
        messages.append(ChatMessage("user", self.question))
        return messages


@dataclass(frozen=True)
class Answer:
    text: str
    sources: tuple  # deduplicated (source_id, chunk_id) pairs, context order
    model_name: str
    latency_ms: float


def dedupe_class_names(detections: list[Detection]) -> list[str]:
    """Class names once each, ordered by their maximum confidence, descending.

    Equal maxima keep first-appearance order.
    """
    best: dict[str, float] = {}
    order: list[str] = []
    for det in detections:
        if det.class_name not in best:
            best[det.class_name] = det.confidence
            order.append(det.class_name)
        elif det.confidence > best[det.class_name]:
            best[det.class_name] = det.confidence
    return sorted(order, key=lambda name: -best[name])  # stable: ties keep order


def form_query(detections: list[Detection]) -> str:
    """Render post-NMS detections into the diagnosis query string."""
    if not detections:
        return HEALTHY_QUERY
    return DISEASE_QUERY_TEMPLATE.format(names=", ".join(dedupe_class_names(detections)))


class RagChat:
    """Ties the store, an embedding provider, and an LLM client into chat turns."""

    def __init__(self, store: VectorStore, embedder, llm, k: int = DEFAULT_K,
                 context_char_budget: int = DEFAULT_CONTEXT_CHAR_BUDGET,
                 clock=time.time):
        self.store = store
        self.embedder = embedder
        self.llm = llm
        self.k = k
        self.context_char_budget = context_char_budget
        self._clock = clock

    def retrieve(self, query: str, k: int | None = None) -> list[ScoredChunk]:
        if len(self.store) == 0:
            return []
        vector = self.embedder.embed_texts([query])[0]
        return self.store.search(vector, k or self.k)

    def _budgeted(self, retrieved: list[ScoredChunk]) -> list[ScoredChunk]:
        """Enforce the context budget by dropping lowest-scored chunks first.

        A lone over-budget chunk is clipped rather than dropped so retrieval
        output never vanishes entirely.
        """
        chosen = list(retrieved)
        while len(chosen) > 1 and sum(len(c.chunk.text) for c in chosen) > self.context_char_budget:
            chosen.pop()  # retrieval order is best-first
        if len(chosen) == 1 and len(chosen[0].chunk.text) > self.context_char_budget:
            clipped = chosen[0]
            chunk = clipped.chunk
            text = chunk.text[:self.context_char_budget]
            chosen[0] = ScoredChunk(
                type(chunk)(chunk.chunk_id, text, chunk.source_id,
                            chunk.ordinal, chunk.char_span),
                clipped.score)
        return chosen

    def build_prompt(self, question: str, retrieved: list[ScoredChunk],
                     session: Session) -> PromptBundle:
        entries = tuple(
            f"[source: {sc.chunk.chunk_id}] {sc.chunk.text}"
            for sc in self._budgeted(retrieved)
        )
        return PromptBundle(
            system=SYSTEM_INSTRUCTION,
            context_entries=entries,
            history=tuple(session.windowed_turns()),
            question=question,
        )

    def answer(self, question: str, session: Session) -> Answer:
        """Run one full turn; the session grows only after the LLM succeeds.

        Follow-up turns retrieve on the follow-up text prefixed with the
        session's detected disease names; the opening diagnosis turn uses its
        question verbatim (it already names the diseases).
        """
        retrieval_query = question
        if session.turns and session.detections:
            names = ", ".join(dedupe_class_names(session.detections))
            retrieval_query = f"Detected disease(s): {names}. {question}"
        retrieved = self.retrieve(retrieval_query)
        bundle = self.build_prompt(question, retrieved, session)
        completion = self.llm.complete(bundle.to_messages())

        chunk_ids = []
        source_pairs = []
        for entry_chunk in self._budgeted(retrieved):
            pair = (entry_chunk.chunk.source_id, entry_chunk.chunk.chunk_id)
            if pair not in source_pairs:
                source_pairs.append(pair)
                chunk_ids.append(entry_chunk.chunk.chunk_id)

        now = self._clock()
        session.turns.append(ChatTurn("user", question, (), now))
        session.turns.append(
            ChatTurn("assistant", completion.text, tuple(chunk_ids), now))
        return Answer(
            text=completion.text,
            sources=tuple(source_pairs),
            model_name=completion.model,
            latency_ms=completion.latency_ms,
        )
