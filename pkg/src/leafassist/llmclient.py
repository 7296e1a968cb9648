"""Chat-completion client for hosted LLM endpoints.

Speaks the de-facto chat-completions JSON schema (``{"model", "messages",
"temperature", "max_tokens"}`` in, ``{"choices": [{"message": {"content"}}],
"usage": ...}`` out) so any compatible provider plugs in via configuration.
The API key is read from an environment variable at call time and never
persisted.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import httpx

from .errors import ProtocolError
from .httpjson import post_json

VALID_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in VALID_ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role != "system" and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")


@dataclass(frozen=True)
class CompletionConfig:
    endpoint: str
    model: str
    api_key_env: str = "LLM_API_KEY"
    temperature: float = 0.2
    max_tokens: int = 1024
    timeout_seconds: float = 30.0
    max_retries: int = 3
    backoff_seconds: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.timeout_seconds <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class Completion:
    text: str
    model: str
    latency_ms: float
    prompt_tokens: int | None = None
    completion_tokens: int | None = None


def validate_messages(messages: list[ChatMessage]) -> None:
    if not messages or messages[0].role != "system":
        raise ValueError("message sequence must start with a system message")
    if any(m.role == "system" for m in messages[1:]):
        raise ValueError("only one system message allowed, and it must lead")


def build_request_payload(messages: list[ChatMessage], config: CompletionConfig) -> dict:
    """Request body as a dict with a fixed key order (byte-stable once encoded)."""
    return {
        "model": config.model,
        "messages": [{"role": m.role, "content": m.content} for m in messages],
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }


class HttpChatClient:
    """Stateless, retry-wrapped client; safe to share across request handlers."""

    def __init__(self, config: CompletionConfig, sleep=None):
        self.config = config
        self._sleep = sleep
        self._client = httpx.Client(timeout=config.timeout_seconds)

    def complete(self, messages: list[ChatMessage]) -> Completion:
        validate_messages(messages)
        payload = build_request_payload(messages, self.config)
        headers = {}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        kwargs = {} if self._sleep is None else {"sleep": self._sleep}
        started = time.monotonic()
        body = post_json(self._client, self.config.endpoint, payload,
                         headers=headers, max_retries=self.config.max_retries,
                         backoff_seconds=self.config.backoff_seconds, **kwargs)
        latency_ms = (time.monotonic() - started) * 1000.0
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed completion response: {exc}") from exc
        usage = body.get("usage") or {}
        return Completion(
            text=text,
            model=body.get("model", self.config.model),
            latency_ms=latency_ms,
            prompt_tokens=usage.get("prompt_tokens"),
            completion_tokens=usage.get("completion_tokens"),
        )
