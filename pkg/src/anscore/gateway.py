"""Chat-completion gateway: HTTP backend, deterministic mock, disk cache.

One uniform ``complete()`` entry point serves both component extraction and
response featurization. Results are cached on disk keyed by a
collision-resistant digest of the full request, so re-runs are free and
every stochastic draw (distinguished by ``sample_index``) is individually
replayable. Requests are throttled by an in-flight semaphore and an
optional requests-per-minute ceiling.
"""

from __future__ import annotations

import hashlib
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

from .errors import CredentialError, ProtocolError, TransportError
from .ioutil import dumps_canonical, read_json, write_json

Message = tuple[str, str]  # (role, content)


@dataclass(frozen=True)
class CompletionRequest:
    model_name: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    sample_index: int = 0
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.sample_index < 0:
            raise ValueError("sample_index must be >= 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def with_sample_index(self, sample_index: int) -> "CompletionRequest":
        return replace(self, sample_index=sample_index)


@dataclass(frozen=True)
class CompletionResult:
    text: str
    cached: bool
    backend: str  # "http" | "mock"


def cache_key(request: CompletionRequest) -> str:
    """Stable sha256 digest over every request field."""
    payload = dumps_canonical(
        {
            "model_name": request.model_name,
            "messages": [[role, content] for role, content in request.messages],
            "temperature": request.temperature,
            "sample_index": request.sample_index,
            "max_tokens": request.max_tokens,
        }
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class RetryPolicy:
    attempts: int = 5
    base_delay: float = 1.0
    max_delay: float = 30.0

    def delay(self, attempt: int) -> float:
        return min(self.max_delay, self.base_delay * (2.0**attempt))


class HttpBackend:
    """OpenAI-compatible chat-completions endpoint over HTTPS.

    The credential is read from the environment (``api_key_env``). Transient
    failures (timeouts, 429, 5xx) are retried with exponential backoff;
    401/403 fail immediately as credential errors.
    """

    name = "http"

    def __init__(
        self,
        base_url: str = "https://api.openai.com/v1",
        api_key_env: str = "OPENAI_API_KEY",
        retry: RetryPolicy | None = None,
        timeout: float = 120.0,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.retry = retry or RetryPolicy()
        self.timeout = timeout
        self._sleep = sleep
        self._session = None

    def _get_session(self):
        import requests

        if self._session is None:
            self._session = requests.Session()
        return self._session

    def complete_text(self, request: CompletionRequest) -> str:
        import requests

        api_key = os.environ.get(self.api_key_env, "")
        if not api_key:
            raise CredentialError(f"no API credential in ${self.api_key_env}")
        payload = {
            "model": request.model_name,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        url = f"{self.base_url}/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.retry.attempts):
            if attempt > 0:
                self._sleep(self.retry.delay(attempt - 1))
            try:
                resp = self._get_session().post(
                    url,
                    json=payload,
                    headers={"Authorization": f"Bearer {api_key}"},
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code in (401, 403):
                raise CredentialError(f"backend rejected credential (HTTP {resp.status_code})")
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                continue
            if resp.status_code != 200:
                raise ProtocolError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                body = resp.json()
                text = body["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ProtocolError(f"malformed completion body: {exc}")
            if not isinstance(text, str) or not text:
                raise ProtocolError("completion body has empty text")
            return text
        raise TransportError(f"exhausted {self.retry.attempts} attempts: {last_error}")


class MockBackend:
    """Offline backend: a pure function of the request.

    The handler maps a CompletionRequest to completion text. Identical
    requests always yield identical text, which makes the whole pipeline
    deterministic and cache-coherent without a network.
    """

    name = "mock"

    def __init__(self, handler: Callable[[CompletionRequest], str]) -> None:
        self._handler = handler

    def complete_text(self, request: CompletionRequest) -> str:
        text = self._handler(request)
        if not text:
            raise ProtocolError("mock handler returned empty text")
        return text


@dataclass
class GatewayStats:
    backend_calls: int = 0
    cache_hits: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, cached: bool) -> None:
        with self._lock:
            if cached:
                self.cache_hits += 1
            else:
                self.backend_calls += 1


class RateLimiter:
    """Sliding-window requests-per-minute ceiling."""

    def __init__(self, rpm: int, clock=time.monotonic, sleep=time.sleep) -> None:
        self.rpm = rpm
        self._clock = clock
        self._sleep = sleep
        self._stamps: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                while self._stamps and now - self._stamps[0] >= 60.0:
                    self._stamps.popleft()
                if len(self._stamps) < self.rpm:
                    self._stamps.append(now)
                    return
                wait = 60.0 - (now - self._stamps[0])
            self._sleep(max(wait, 0.01))


class ChatGateway:
    """Shared completion interface with persistent cache and throttling.

    Safe for concurrent callers: cache writes are atomic, at most
    ``max_in_flight`` backend requests run at once, and ``stats`` counts
    backend calls vs cache hits for instrumentation.
    """

    def __init__(
        self,
        backend: HttpBackend | MockBackend,
        cache_dir: str | Path | None = None,
        max_in_flight: int = 4,
        rpm_limit: int | None = None,
    ) -> None:
        self.backend = backend
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self._inflight = threading.Semaphore(max_in_flight)
        self._limiter = RateLimiter(rpm_limit) if rpm_limit else None
        self.stats = GatewayStats()

    def _cache_path(self, key: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{key}.json"

    def complete(self, request: CompletionRequest) -> CompletionResult:
        key = cache_key(request)
        path = self._cache_path(key)
        if path is not None and path.exists():
            record = read_json(path)
            self.stats.record(cached=True)
            return CompletionResult(text=record["text"], cached=True, backend=record["backend"])
        with self._inflight:
            if self._limiter is not None:
                self._limiter.acquire()
            text = self.backend.complete_text(request)
        self.stats.record(cached=False)
        if path is not None:
            write_json(
                path,
                {
                    "key": key,
                    "model_name": request.model_name,
                    "messages": [[r, c] for r, c in request.messages],
                    "temperature": request.temperature,
                    "sample_index": request.sample_index,
                    "max_tokens": request.max_tokens,
                    "backend": self.backend.name,
                    "text": text,
                },
            )
        return CompletionResult(text=text, cached=False, backend=self.backend.name)


def as_messages(pairs: Sequence[tuple[str, str]]) -> tuple[Message, ...]:
    return tuple((str(role), str(content)) for role, content in pairs)
