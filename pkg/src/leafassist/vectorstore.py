"""Exact in-memory top-k cosine search over embedded chunks, with persistence.

Knowledge bases here are hundreds to a few thousand chunks, so the store scans
every entry instead of maintaining an approximate index: exactness makes
retrieval trivially testable and the scan is nowhere near the bottleneck.

Persistence is a versioned JSON-lines file: a header line
``{"version": 1, "dim": N}`` followed by one entry per line. Floats survive
the JSON round trip bit-for-bit, so a reloaded store returns identical search
results.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import cosine_similarity
from .errors import LeafAssistError
from .ingest import Chunk

FORMAT_VERSION = 1


class StoreLoadError(LeafAssistError):
    """Store file is missing, corrupt, or of an unknown version."""


@dataclass(frozen=True)
class StoreEntry:
    chunk: Chunk
    vector: np.ndarray
    insertion_index: int


@dataclass(frozen=True)
class ScoredChunk:
    chunk: Chunk
    score: float


class VectorStore:
    """Upsert-by-chunk_id store with deterministic exact top-k search.

    Reads take a short internal lock to snapshot the entry list and then score
    outside it; writes are serialized behind the same lock, so concurrent
    searches during ingestion block only briefly.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError(f"store dim must be >= 1, got {dim}")
        self.dim = dim
        self._entries: dict[str, StoreEntry] = {}
        self._next_index = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def _check_dim(self, vector: np.ndarray) -> np.ndarray:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.dim,):
            raise ValueError(
                f"vector dim mismatch: got {vector.shape}, store dim {self.dim}")
        return vector

    def add(self, entries) -> int:
        """Upsert ``(chunk, vector)`` pairs; returns how many chunk_ids were new.

        Re-adding an existing chunk_id replaces its vector and bumps its
        insertion index, as if it had been removed and appended.
        """
        added = 0
        with self._lock:
            for chunk, vector in entries:
                vector = self._check_dim(vector)
                if chunk.chunk_id not in self._entries:
                    added += 1
                self._entries[chunk.chunk_id] = StoreEntry(
                    chunk, vector, self._next_index)
                self._next_index += 1
        return added

    def search(self, query: np.ndarray, k: int) -> list[ScoredChunk]:
        """Exact top-k by cosine similarity, ties broken by insertion order."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        query = self._check_dim(query)
        with self._lock:
            entries = list(self._entries.values())
        scored = [(cosine_similarity(query, e.vector), e) for e in entries]
        scored.sort(key=lambda pair: (-pair[0], pair[1].insertion_index))
        return [ScoredChunk(e.chunk, score) for score, e in scored[:k]]

    def persist(self, path) -> None:
        """Write the store to ``path`` atomically (write then rename)."""
        path = Path(path)
        with self._lock:
            entries = sorted(self._entries.values(), key=lambda e: e.insertion_index)
            lines = [json.dumps({"version": FORMAT_VERSION, "dim": self.dim})]
            for entry in entries:
                lines.append(json.dumps({
                    "chunk_id": entry.chunk.chunk_id,
                    "text": entry.chunk.text,
                    "source_id": entry.chunk.source_id,
                    "ordinal": entry.chunk.ordinal,
                    "char_span": list(entry.chunk.char_span),
                    "vector": [float(v) for v in entry.vector],
                    "insertion_index": entry.insertion_index,
                }))
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
        tmp.replace(path)

    @classmethod
    def load(cls, path) -> "VectorStore":
        path = Path(path)
        try:
            raw_lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise StoreLoadError(f"cannot read store file {path}: {exc}") from exc
        if not raw_lines:
            raise StoreLoadError(f"{path}: empty file, expected a header line")
        try:
            header = json.loads(raw_lines[0])
        except ValueError as exc:
            raise StoreLoadError(f"{path}: header is not JSON: {exc}") from exc
        if not isinstance(header, dict) or "version" not in header:
            raise StoreLoadError(f"{path}: first line is not a store header")
        if header["version"] != FORMAT_VERSION:
            raise StoreLoadError(
                f"{path}: unsupported store version {header['version']!r}, "
                f"expected {FORMAT_VERSION}")

        store = cls(dim=int(header["dim"]))
        max_index = -1
        for line_no, line in enumerate(raw_lines[1:], start=2):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                chunk = Chunk(
                    chunk_id=record["chunk_id"],
                    text=record["text"],
                    source_id=record["source_id"],
                    ordinal=record["ordinal"],
                    char_span=tuple(record["char_span"]),
                )
                vector = store._check_dim(np.asarray(record["vector"], dtype=np.float64))
                index = int(record["insertion_index"])
            except (KeyError, TypeError, ValueError) as exc:
                raise StoreLoadError(f"{path}: bad entry on line {line_no}: {exc}") from exc
            store._entries[chunk.chunk_id] = StoreEntry(chunk, vector, index)
            max_index = max(max_index, index)
        store._next_index = max_index + 1
        return store
