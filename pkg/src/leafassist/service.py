"""HTTP API tying detection, retrieval, and chat into the diagnosis flow.

The service is a thin layer: it owns sessions and configuration, maps domain
errors onto an error envelope, and otherwise passes data through unchanged
(responses carry exactly the detector's post-NMS output). All non-2xx
responses use ``{"error": {"code": ..., "message": ...}}``.

Handlers are synchronous on purpose: FastAPI runs them on its threadpool, and
the store, session manager, and HTTP clients are all safe under that model.
"""

from __future__ import annotations

import threading
import time
from pathlib import Path

from fastapi import FastAPI, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .boxes import ClassList
from .config import AppConfig
from .detectors import (FixtureDetector, ImageDecodeError, RemoteDetector,
                        decode_image_size)
from .embeddings import DeterministicEmbedder, RemoteEmbedder
from .errors import ConfigError, LeafAssistError, ProtocolError, TransportError
from .ingest import ChunkSpec, IngestError, ingest
from .llmclient import CompletionConfig, HttpChatClient
from .ragchat import RagChat, Session, form_query
from .vectorstore import VectorStore


class ApiError(Exception):
    """Carried to the envelope handler: HTTP status plus machine-readable code."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class ChatRequest(BaseModel):
    session_id: str
    message: str


class IngestRequest(BaseModel):
    path: str


def build_detector(config: AppConfig):
    classes = ClassList(config.detector.classes)
    if config.detector.mode == "remote":
        return RemoteDetector(config.detector.remote_url, classes,
                              config.detector.conf_threshold,
                              config.detector.iou_threshold,
                              config.detector.timeout_seconds)
    if not config.detector.labels_dir:
        raise ConfigError("detector.mode=fixture requires detector.labels_dir")
    return FixtureDetector(config.detector.labels_dir, classes,
                           config.detector.conf_threshold,
                           config.detector.iou_threshold)


def build_embedder(config: AppConfig):
    emb = config.embedding
    if emb.provider == "remote":
        return RemoteEmbedder(emb.endpoint, emb.model, emb.dim, emb.api_key_env,
                              emb.batch_size, emb.timeout_seconds)
    return DeterministicEmbedder(emb.dim)


def build_llm(config: AppConfig):
    llm = config.llm
    return HttpChatClient(CompletionConfig(
        endpoint=llm.endpoint, model=llm.model, api_key_env=llm.api_key_env,
        temperature=llm.temperature, max_tokens=llm.max_tokens,
        timeout_seconds=llm.timeout_seconds, max_retries=llm.max_retries,
        backoff_seconds=llm.backoff_seconds))


def load_or_create_store(config: AppConfig) -> VectorStore:
    path = Path(config.store.path)
    if path.is_file():
        store = VectorStore.load(path)
        if store.dim != config.embedding.dim:
            raise ConfigError(
                f"store file {path} has dim {store.dim} but embedding.dim is "
                f"{config.embedding.dim}")
        return store
    return VectorStore(dim=config.embedding.dim)


class SessionManager:
    """In-memory sessions with idle TTL and per-session turn serialization.

    A second concurrent turn on one session is rejected with 409 rather than
    queued: the UI only ever has one request in flight, so queueing would just
    hide client bugs.
    """

    def __init__(self, window_size: int, ttl_seconds: float, clock=time.monotonic):
        self.window_size = window_size
        self.ttl_seconds = ttl_seconds
        self._clock = clock
        self._sessions: dict[str, Session] = {}
        self._last_active: dict[str, float] = {}
        self._turn_locks: dict[str, threading.Lock] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def _prune(self, now: float) -> None:
        expired = [sid for sid, seen in self._last_active.items()
                   if now - seen > self.ttl_seconds]
        for sid in expired:
            self._sessions.pop(sid, None)
            self._last_active.pop(sid, None)
            self._turn_locks.pop(sid, None)

    def create(self) -> Session:
        now = self._clock()
        with self._lock:
            self._prune(now)
            self._counter += 1
            session = Session(session_id=f"sess-{self._counter:06d}",
                              window_size=self.window_size)
            self._sessions[session.session_id] = session
            self._last_active[session.session_id] = now
            self._turn_locks[session.session_id] = threading.Lock()
        return session

    def get(self, session_id: str) -> tuple[Session, threading.Lock]:
        now = self._clock()
        with self._lock:
            self._prune(now)
            if session_id not in self._sessions:
                raise ApiError(404, "unknown_session",
                               f"no active session {session_id!r}")
            self._last_active[session_id] = now
            return self._sessions[session_id], self._turn_locks[session_id]


class AppState:
    def __init__(self, config: AppConfig):
        self.config = config
        self.detector = build_detector(config)
        self.embedder = build_embedder(config)
        self.llm = build_llm(config)
        self.store = load_or_create_store(config)
        self.chat = RagChat(self.store, self.embedder, self.llm,
                            k=config.retrieval.k,
                            context_char_budget=config.retrieval.context_char_budget)
        self.sessions = SessionManager(config.chat.window_size,
                                       config.server.session_ttl_seconds)
        self.ingest_lock = threading.Lock()


def _detection_dict(det) -> dict:
    return {
        "class_id": det.class_id,
        "class_name": det.class_name,
        "x1": det.bbox.x1, "y1": det.bbox.y1,
        "x2": det.bbox.x2, "y2": det.bbox.y2,
        "confidence": det.confidence,
    }


def _sources_list(answer) -> list[dict]:
    return [{"source_id": sid, "chunk_id": cid} for sid, cid in answer.sources]


def create_app(config: AppConfig) -> FastAPI:
    state = AppState(config)
    app = FastAPI(title="leafassist", docs_url=None, redoc_url=None)
    app.state.leafassist = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=config.server.cors_origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def api_error_handler(_request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}})

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": {"code": "bad_request", "message": str(exc.errors())}})

    @app.exception_handler(LeafAssistError)
    async def domain_error_handler(_request: Request, exc: LeafAssistError):
        return JSONResponse(
            status_code=500,
            content={"error": {"code": "internal", "message": str(exc)}})

    def run_answer(session: Session, question: str):
        try:
            return state.chat.answer(question, session)
        except (TransportError, ProtocolError, ConfigError) as exc:
            raise ApiError(502, "llm_error", str(exc)) from exc

    @app.post("/api/diagnose")
    def diagnose(image: UploadFile):
        payload = image.file.read()
        if len(payload) > config.server.max_upload_bytes:
            raise ApiError(400, "too_large",
                           f"upload exceeds {config.server.max_upload_bytes} bytes")
        try:
            width, height = decode_image_size(payload)
        except ImageDecodeError as exc:
            raise ApiError(400, "not_an_image", str(exc)) from exc
        if len(state.store) == 0:
            raise ApiError(503, "store_empty",
                           "knowledge base not ingested yet; POST /api/ingest first")
        try:
            detections = state.detector.detect(payload, image.filename or "upload.jpg")
        except (TransportError, ProtocolError, LeafAssistError) as exc:
            raise ApiError(502, "detector_error", str(exc)) from exc

        session = state.sessions.create()
        session.detections = list(detections)
        answer = run_answer(session, form_query(detections))
        return JSONResponse({
            "session_id": session.session_id,
            "detections": [_detection_dict(d) for d in detections],
            "image_width": width,
            "image_height": height,
            "answer": answer.text,
            "sources": _sources_list(answer),
        })

    @app.post("/api/chat")
    def chat(body: ChatRequest):
        if not body.message:
            raise ApiError(400, "bad_request", "message must be non-empty")
        session, turn_lock = state.sessions.get(body.session_id)
        if not turn_lock.acquire(blocking=False):
            raise ApiError(409, "session_busy",
                           "another turn is in flight for this session")
        try:
            answer = run_answer(session, body.message)
        finally:
            turn_lock.release()
        return JSONResponse({
            "session_id": body.session_id,
            "answer": answer.text,
            "sources": _sources_list(answer),
        })

    @app.post("/api/ingest")
    def ingest_kb(body: IngestRequest):
        if not state.ingest_lock.acquire(blocking=False):
            raise ApiError(423, "ingest_running", "an ingestion is already running")
        try:
            spec = ChunkSpec(config.chunking.chunk_size, config.chunking.overlap)
            try:
                chunks = ingest(body.path, spec)
            except IngestError as exc:
                raise ApiError(400, "invalid_kb", str(exc)) from exc
            try:
                vectors = state.embedder.embed_texts([c.text for c in chunks])
            except (TransportError, ProtocolError, ConfigError) as exc:
                raise ApiError(502, "embedding_error", str(exc)) from exc
            added = state.store.add(zip(chunks, vectors))
            state.store.persist(config.store.path)
            documents = len({c.source_id for c in chunks})
        finally:
            state.ingest_lock.release()
        return JSONResponse({"documents": documents, "chunks_added": added})

    @app.get("/api/sessions/{session_id}/history")
    def history(session_id: str):
        session, _ = state.sessions.get(session_id)
        return JSONResponse({
            "session_id": session_id,
            "turns": [
                {"role": t.role, "content": t.content,
                 "sources": list(t.sources), "timestamp": t.timestamp}
                for t in session.turns
            ],
        })

    @app.get("/api/health")
    def health():
        return JSONResponse({
            "status": "ok",
            "store_size": len(state.store),
            "detector_mode": state.detector.mode,
        })

    return app


def load_app(config_path=None) -> FastAPI:
    """Uvicorn-friendly factory: build the app from a config file path."""
    from .config import load_config

    return create_app(load_config(config_path))
