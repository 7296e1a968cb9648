"""Embedding providers behind one `embed_texts` interface.

Two providers: a remote client for any endpoint speaking the de-facto
embeddings API (``{"model": ..., "input": [...]}`` in, ``{"data":
[{"embedding": [...]}]}`` out), and an offline deterministic provider for
tests and air-gapped runs. All produced vectors are L2-normalized float64
arrays, except that empty text maps to the zero vector.
"""

from __future__ import annotations

import hashlib
import os
import re

import httpx
import numpy as np

from .errors import ConfigError
from .httpjson import post_json

DEFAULT_DIM = 384

_TOKEN_RE = re.compile(r"[^0-9a-z]+")


def l2_normalize(vector: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        return vector
    return vector / norm


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between two vectors; 0.0 when either has norm 0."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


class DeterministicEmbedder:
    """Hashed bag-of-words embedding: offline, reproducible, order-insensitive.

    Text is lowercased and split on non-alphanumeric runs; each token is hashed
    with a fixed seed into one of ``dim`` buckets; bucket counts are
    L2-normalized. Similar wording lands in similar buckets, which is all the
    pipeline tests need. A pure function of the input string bytes.
    """

    kind = "deterministic-local"

    def __init__(self, dim: int = DEFAULT_DIM, seed: int = 1):
        if dim < 1:
            raise ConfigError(f"embedding dim must be >= 1, got {dim}")
        self.dim = dim
        self.seed = seed

    def _bucket(self, token: str) -> int:
        digest = hashlib.sha256(f"{self.seed}:{token}".encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") % self.dim

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        vectors = []
        for text in texts:
            counts = np.zeros(self.dim, dtype=np.float64)
            for token in _TOKEN_RE.split(text.lower()):
                if token:
                    counts[self._bucket(token)] += 1.0
            vectors.append(l2_normalize(counts))
        return vectors


class RemoteEmbedder:
    """Client for a hosted embeddings endpoint, batched with bounded retries."""

    kind = "remote"

    def __init__(self, endpoint: str, model: str, dim: int = DEFAULT_DIM,
                 api_key_env: str = "EMBEDDING_API_KEY", batch_size: int = 64,
                 timeout: float = 30.0, max_retries: int = 3,
                 backoff_seconds: float = 0.5, sleep=None):
        if not endpoint:
            raise ConfigError("remote embedding provider needs an endpoint URL")
        self.endpoint = endpoint
        self.model = model
        self.dim = dim
        self.api_key_env = api_key_env
        self.batch_size = batch_size
        self.max_retries = max_retries
        self.backoff_seconds = backoff_seconds
        self._sleep = sleep
        self._client = httpx.Client(timeout=timeout)

    def _headers(self) -> dict:
        key = os.environ.get(self.api_key_env, "")
        return {"Authorization": f"Bearer {key}"} if key else {}

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        vectors: list[np.ndarray] = []
        for lo in range(0, len(texts), self.batch_size):
            batch = texts[lo:lo + self.batch_size]
            kwargs = {} if self._sleep is None else {"sleep": self._sleep}
            body = post_json(
                self._client, self.endpoint,
                {"model": self.model, "input": batch},
                headers=self._headers(), max_retries=self.max_retries,
                backoff_seconds=self.backoff_seconds, **kwargs)
            rows = body.get("data", [])
            if len(rows) != len(batch):
                raise ConfigError(
                    f"embedding endpoint returned {len(rows)} vectors for "
                    f"{len(batch)} inputs")
            for row in rows:
                vector = np.asarray(row["embedding"], dtype=np.float64)
                if vector.shape != (self.dim,):
                    raise ConfigError(
                        f"embedding dim mismatch: endpoint returned {vector.shape[0]}, "
                        f"configured {self.dim}")
                vectors.append(l2_normalize(vector))
        return vectors
