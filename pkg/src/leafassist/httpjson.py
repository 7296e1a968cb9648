"""JSON-over-HTTP POST with bounded retries, shared by the remote clients.

Request bodies are serialized here with compact separators and a fixed key
order (insertion order of the payload dict), so identical inputs always produce
identical bytes on the wire.
"""

from __future__ import annotations

import json
import time

import httpx

from .errors import ConfigError, ProtocolError, TransportError

RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})
AUTH_STATUSES = frozenset({401, 403})


def encode_body(payload: dict) -> bytes:
    return json.dumps(payload, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def post_json(client: httpx.Client, url: str, payload: dict, *,
              headers: dict | None = None, max_retries: int = 3,
              backoff_seconds: float = 0.5, sleep=time.sleep) -> dict:
    """POST a JSON payload, retrying on 429/5xx/timeouts with exponential backoff.

    ``max_retries`` counts retries after the first attempt. Auth failures
    (401/403) raise :class:`ConfigError` immediately, without retrying; other
    non-2xx statuses and exhausted retries raise :class:`TransportError`;
    undecodable response bodies raise :class:`ProtocolError`.
    """
    body = encode_body(payload)
    send_headers = {"Content-Type": "application/json"}
    if headers:
        send_headers.update(headers)

    last_failure = None
    for attempt in range(max_retries + 1):
        if attempt:
            sleep(backoff_seconds * 2 ** (attempt - 1))
        try:
            response = client.post(url, content=body, headers=send_headers)
        except httpx.TimeoutException as exc:
            last_failure = f"timeout: {exc}"
            continue
        except httpx.HTTPError as exc:
            raise TransportError(f"POST {url} failed: {exc}") from exc
        if response.status_code in AUTH_STATUSES:
            raise ConfigError(
                f"POST {url} rejected with HTTP {response.status_code}: check the API key")
        if response.status_code in RETRYABLE_STATUSES:
            last_failure = f"HTTP {response.status_code}"
            continue
        if response.status_code != 200:
            raise TransportError(f"POST {url} answered HTTP {response.status_code}")
        try:
            return response.json()
        except ValueError as exc:
            raise ProtocolError(f"POST {url} returned undecodable JSON: {exc}") from exc
    raise TransportError(
        f"POST {url} still failing after {max_retries} retries (last: {last_failure})")
