"""Chat backends: a chat-completions HTTP client and a scripted replay stub.

Both expose ``complete(messages, params) -> str``.  The HTTP backend talks
the common chat-completions JSON shape (request ``{"model", "messages",
"temperature"}``, reply ``choices[0].message.content``) and retries
transient failures with exponential backoff.  The replay backend feeds
pre-recorded assistant replies strictly in order, which makes pipeline runs
deterministic and testable offline.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Protocol

log = logging.getLogger(__name__)

ENV_API_BASE = "MAO_API_BASE"
ENV_API_KEY = "MAO_API_KEY"
ENV_MODEL = "MAO_MODEL"

TRANSPORT = "Transport"
RATE_LIMITED = "RateLimited"
MALFORMED = "Malformed"


class BackendError(Exception):
    """Chat backend failure; ``kind`` is Transport, RateLimited, or Malformed."""

    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(f"{kind}: {message}")


class ReplayExhausted(Exception):
    """The replay script has no responses left."""


class ChatBackend(Protocol):
    def complete(self, messages: list, params: Optional[dict] = None) -> str:
        ...


def _check_messages(messages: list) -> None:
    if not messages:
        raise ValueError("messages must be non-empty")
    for m in messages:
        if "role" not in m or "content" not in m:
            raise ValueError(f"message missing role/content: {m!r}")


class HttpChatBackend:
    """Chat-completions client over HTTPS.

    Transient failures (connection errors, HTTP 5xx, HTTP 429) are retried
    up to ``attempts`` times with exponential backoff; other failures raise
    immediately.  Safe for concurrent use: no mutable shared state beyond
    the requests session, which is thread-safe for plain requests.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str = "",
        model: str = "",
        attempts: int = 3,
        timeout: float = 60.0,
        backoff: float = 0.5,
        sleeper: Callable[[float], None] = time.sleep,
        session=None,
    ):
        if session is None:
            import requests

            session = requests.Session()
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.attempts = attempts
        self.timeout = timeout
        self.backoff = backoff
        self.sleeper = sleeper
        self.session = session

    @classmethod
    def from_env(cls, environ=None) -> "HttpChatBackend":
        env = os.environ if environ is None else environ
        base = env.get(ENV_API_BASE, "")
        if not base:
            raise BackendError(TRANSPORT, f"{ENV_API_BASE} is not set")
        return cls(
            base_url=base,
            api_key=env.get(ENV_API_KEY, ""),
            model=env.get(ENV_MODEL, ""),
        )

    def complete(self, messages: list, params: Optional[dict] = None) -> str:
        _check_messages(messages)
        payload = {
            "model": self.model,
            "messages": [
                {"role": m["role"], "content": m["content"]} for m in messages
            ],
            "temperature": 0.0,
        }
        if params:
            payload.update(params)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.base_url}/chat/completions"

        last_error: Optional[BackendError] = None
        for attempt in range(self.attempts):
            if attempt:
                self.sleeper(self.backoff * (2 ** (attempt - 1)))
            try:
                response = self.session.post(
                    url, json=payload, headers=headers, timeout=self.timeout
                )
            except Exception as exc:  # connection/timeout errors
                last_error = BackendError(TRANSPORT, str(exc))
                log.warning("chat request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code == 429:
                last_error = BackendError(RATE_LIMITED, "HTTP 429")
                log.warning("chat request rate-limited (attempt %d)", attempt + 1)
                continue
            if response.status_code >= 500:
                last_error = BackendError(
                    TRANSPORT, f"HTTP {response.status_code}"
                )
                continue
            if response.status_code != 200:
                raise BackendError(TRANSPORT, f"HTTP {response.status_code}")
            return self._extract(response)
        assert last_error is not None
        raise last_error

    def _extract(self, response) -> str:
        try:
            body = response.json()
        except (ValueError, json.JSONDecodeError) as exc:
            raise BackendError(MALFORMED, f"response is not JSON: {exc}")
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise BackendError(
                MALFORMED, "response lacks choices[0].message.content"
            )
        if not isinstance(content, str):
            raise BackendError(MALFORMED, "message content is not a string")
        return content


@dataclass(frozen=True)
class ReplayRecord:
    phase: str
    content: str


class ReplayBackend:
    """Feeds scripted assistant replies strictly in order.

    The script is JSON-Lines, one ``{"phase": ..., "content": ...}`` object
    per reply; ``phase`` is annotation for humans and tests, consumption
    order ignores it.  Not safe to share between concurrent sessions.
    """

    def __init__(self, records: Iterable[ReplayRecord]):
        self.records = list(records)
        self.cursor = 0

    @classmethod
    def from_path(cls, path) -> "ReplayBackend":
        records = []
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{lineno}: bad JSON: {exc}")
                if "content" not in obj:
                    raise ValueError(f"{path}:{lineno}: record lacks 'content'")
                records.append(ReplayRecord(obj.get("phase", ""), obj["content"]))
        return cls(records)

    @classmethod
    def from_texts(cls, *texts: str, phase: str = "") -> "ReplayBackend":
        return cls(ReplayRecord(phase, t) for t in texts)

    @property
    def remaining(self) -> int:
        return len(self.records) - self.cursor

    def complete(self, messages: list, params: Optional[dict] = None) -> str:
        _check_messages(messages)
        if self.cursor >= len(self.records):
            raise ReplayExhausted(
                f"replay script exhausted after {len(self.records)} replies"
            )
        record = self.records[self.cursor]
        self.cursor += 1
        return record.content
