"""Chat-completion client (OpenAI-style HTTP API) plus a scripted test double.

Any model served behind the common open-source inference frameworks speaks
this wire format, so the rest of the service only ever sees the
``ModelBackend`` protocol.
"""

from __future__ import annotations

import logging
import os
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import httpx

from .errors import ModelError

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.6
DEFAULT_TOP_P = 0.9
BACKOFF_BASE_SECONDS = 0.5


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str


@dataclass
class ModelEndpointConfig:
    base_url: str
    model_name: str
    api_key_env_var: str = "TANDEM_API_KEY"
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_retries: int = 3
    request_timeout: float = 60.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.request_timeout <= 0:
            raise ValueError("request_timeout must be > 0")


class ModelBackend(Protocol):
    def complete(self, messages: Sequence[ChatMessage]) -> str: ...


class OpenAIChatBackend:
    """HTTP client for /chat/completions with exponential-backoff retries.

    Transport errors and 5xx responses are retried up to ``max_retries``
    extra attempts; any other non-2xx status fails immediately. The API key
    is read from the environment variable named in the config, never from
    the config itself.
    """

    def __init__(
        self,
        cfg: ModelEndpointConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.cfg = cfg
        self._sleep = sleep
        self._client = httpx.Client(
            base_url=cfg.base_url.rstrip("/"),
            timeout=cfg.request_timeout,
            transport=transport,
        )

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.cfg.api_key_env_var, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        body = {
            "model": self.cfg.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": self.cfg.temperature,
            "top_p": self.cfg.top_p,
        }
        last_error: Exception | None = None
        for attempt in range(self.cfg.max_retries + 1):
            if attempt:
                self._sleep(BACKOFF_BASE_SECONDS * 2 ** (attempt - 1))
            try:
                resp = self._client.post(
                    "/chat/completions", json=body, headers=self._headers()
                )
            except httpx.TransportError as exc:
                last_error = exc
                logger.warning("model transport error (attempt %d): %s", attempt, exc)
                continue
            if resp.status_code >= 500:
                last_error = ModelError(f"server error {resp.status_code}")
                logger.warning("model 5xx (attempt %d): %d", attempt, resp.status_code)
                continue
            if resp.status_code >= 400:
                raise ModelError(f"request rejected: {resp.status_code} {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise ModelError(f"malformed completion response: {exc}") from exc
        raise ModelError(f"retries exhausted: {last_error}")


class ScriptError(AssertionError):
    """A scripted backend saw an out-of-order or unexpected call."""


@dataclass
class ScriptedBackend:
    """Deterministic stand-in for a live model, driven by a transcript.

    Each step pairs a matcher (a substring the flattened prompt must contain,
    or ``"*"`` for anything) with the reply to return. In strict mode the
    steps must be consumed in order exactly once.
    """

    steps: list[tuple[str, str]]
    strict: bool = True
    calls: list[str] = field(default_factory=list)
    _cursor: int = 0

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        flat = "\n".join(m.content for m in messages)
        self.calls.append(flat)
        if self.strict:
            if self._cursor >= len(self.steps):
                raise ScriptError("scripted backend called after transcript exhausted")
            matcher, reply = self.steps[self._cursor]
            if matcher != "*" and matcher not in flat:
                raise ScriptError(
                    f"call {self._cursor} did not match {matcher!r}: {flat[:200]!r}"
                )
            self._cursor += 1
            return reply
        for matcher, reply in self.steps:
            if matcher == "*" or matcher in flat:
                return reply
        raise ScriptError(f"no scripted step matches prompt: {flat[:200]!r}")

    def assert_consumed(self) -> None:
        if self.strict and self._cursor != len(self.steps):
            raise ScriptError(
                f"transcript not fully consumed: {self._cursor}/{len(self.steps)}"
            )


class FailingBackend:
    """Backend that always raises ``ModelError`` (fallback-path tests)."""

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        raise ModelError("backend unavailable")


class TokenCounter(Protocol):
    def count(self, text: str) -> int: ...


_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class ApproxTokenCounter:
    """Whitespace-and-punctuation token counter.

    Approximate by design: per-model tokenizers plug in behind the
    ``TokenCounter`` protocol when exact counts matter.
    """

    def count(self, text: str) -> int:
        return len(_TOKEN_RE.findall(text))


def count_tokens(counter: TokenCounter, text: str) -> int:
    n = counter.count(text)
    if n < 0:
        raise ValueError("token count must be non-negative")
    return n
