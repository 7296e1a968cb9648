"""Knowledge-base loading and chunking.

Documents are markdown/plain-text files, optionally carrying a front-matter
block of ``key: value`` lines between ``---`` delimiters. Splitting is
recursive: a text is divided at the coarsest separator that applies (paragraph
break, then newline, then space, then single characters) and the resulting
pieces are greedily packed into chunks of at most ``chunk_size`` characters,
carrying up to ``overlap`` trailing characters into the next chunk when a
split is forced.

Chunk texts are exact substrings of the document body (separators included),
so the recorded character spans tile the whole body and re-running ingestion
on unchanged input reproduces the chunk list byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import LeafAssistError

DEFAULT_SEPARATORS = ("\n\n", "\n", " ", "")
DEFAULT_CHUNK_SIZE = 800
DEFAULT_OVERLAP = 100


class IngestError(LeafAssistError):
    """A knowledge-base file could not be loaded; message names the file."""


@dataclass(frozen=True)
class Document:
    source_id: str
    title: str
    body: str
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ChunkSpec:
    chunk_size: int = DEFAULT_CHUNK_SIZE
    overlap: int = DEFAULT_OVERLAP
    separators: tuple = DEFAULT_SEPARATORS

    def __post_init__(self):
        if self.chunk_size < 1:
            raise ValueError(f"chunk_size must be >= 1, got {self.chunk_size}")
        if not 0 <= self.overlap < self.chunk_size:
            raise ValueError(
                f"overlap must satisfy 0 <= overlap < chunk_size, "
                f"got overlap={self.overlap}, chunk_size={self.chunk_size}")


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    text: str
    source_id: str
    ordinal: int
    char_span: tuple  # (start, end) offsets into the source body


def _parse_front_matter(text: str, path) -> tuple[dict, str]:
    """Split an optional leading ``---`` block into (metadata, body)."""
    lines = text.split("\n")
    if not lines or lines[0].strip() != "---":
        return {}, text
    for idx in range(1, len(lines)):
        if lines[idx].strip() == "---":
            meta = {}
            for raw in lines[1:idx]:
                if not raw.strip():
                    continue
                key, sep, value = raw.partition(":")
                if sep:
                    meta[key.strip()] = value.strip()
            return meta, "\n".join(lines[idx + 1:])
    raise IngestError(f"{path}: front matter opened with '---' but never closed")


def load_documents(root_path) -> list[Document]:
    """Load every ``.md``/``.txt`` file under ``root_path``, ordered by source_id."""
    root = Path(root_path)
    if not root.is_dir():
        raise IngestError(f"knowledge-base directory not readable: {root}")
    documents = []
    for path in sorted(root.rglob("*")):
        if not (path.is_file() and path.suffix.lower() in (".md", ".txt")):
            continue
        source_id = path.relative_to(root).as_posix()
        try:
            text = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise IngestError(f"{source_id}: not valid UTF-8 ({exc})") from exc
        except OSError as exc:
            raise IngestError(f"{source_id}: unreadable ({exc})") from exc
        metadata, body = _parse_front_matter(text, source_id)
        if not body.strip():
            raise IngestError(f"{source_id}: document body is empty")
        title = metadata.get("title") or path.stem
        documents.append(Document(source_id, title, body, metadata))
    documents.sort(key=lambda d: d.source_id)
    return documents


def _split_span(body: str, start: int, end: int, separators,
                chunk_size: int) -> list[tuple[int, int]]:
    """Recursively split body[start:end] into pieces of at most chunk_size.

    Pieces partition the span exactly; each separator occurrence stays attached
    to the end of the piece it terminates.
    """
    if end - start <= chunk_size:
        return [(start, end)]
    for level, sep in enumerate(separators):
        if sep == "":
            return [(i, i + 1) for i in range(start, end)]
        cuts = []
        pos = body.find(sep, start, end)
        while pos != -1:
            cuts.append(pos + len(sep))
            pos = body.find(sep, pos + len(sep), end)
        bounds = [start] + [c for c in cuts if c < end] + [end]
        if len(bounds) <= 2:  # separator absent or only terminal: try the next one
            continue
        pieces = []
        remaining = separators[level + 1:]
        for lo, hi in zip(bounds, bounds[1:]):
            pieces.extend(_split_span(body, lo, hi, remaining, chunk_size))
        return pieces
    # Ran out of separators: fall back to single characters.
    return [(i, i + 1) for i in range(start, end)]


def _merge_pieces(pieces: list[tuple[int, int]], chunk_size: int,
                  overlap: int) -> list[tuple[int, int]]:
    """Greedily pack contiguous pieces into chunks, retaining overlap tails.

    When adding a piece would push the current chunk past ``chunk_size``, the
    chunk is emitted and leading pieces are dropped until at most ``overlap``
    characters remain to seed the next chunk.
    """
    chunks = []
    window: list[tuple[int, int]] = []
    window_len = 0
    for piece in pieces:
        piece_len = piece[1] - piece[0]
        if window and window_len + piece_len > chunk_size:
            chunks.append((window[0][0], window[-1][1]))
            while window and (window_len > overlap
                              or (window_len + piece_len > chunk_size)):
                dropped = window.pop(0)
                window_len -= dropped[1] - dropped[0]
        window.append(piece)
        window_len += piece_len
    if window:
        chunks.append((window[0][0], window[-1][1]))
    return chunks


def split_text(body: str, spec: ChunkSpec) -> list[tuple[str, tuple[int, int]]]:
    """Split a body into ``(text, (start, end))`` chunk tuples."""
    if not body:
        return []
    separators = list(spec.separators)
    if "" not in separators:
        separators.append("")
    pieces = _split_span(body, 0, len(body), separators, spec.chunk_size)
    spans = _merge_pieces(pieces, spec.chunk_size, spec.overlap)
    return [(body[s:e], (s, e)) for s, e in spans]


def chunk_document(doc: Document, spec: ChunkSpec) -> list[Chunk]:
    return [
        Chunk(chunk_id=f"{doc.source_id}#{ordinal}", text=text,
              source_id=doc.source_id, ordinal=ordinal, char_span=span)
        for ordinal, (text, span) in enumerate(split_text(doc.body, spec))
    ]


def ingest(root_path, spec: ChunkSpec = ChunkSpec()) -> list[Chunk]:
    """Load a knowledge base and chunk every document; stable across re-runs."""
    chunks = []
    for doc in load_documents(root_path):
        chunks.extend(chunk_document(doc, spec))
    return chunks
