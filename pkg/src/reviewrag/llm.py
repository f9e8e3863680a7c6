"""Text generation over chat-completion services, with offline mock backends.

The gateway adds retries with exponential backoff, a requests-per-interval
rate limit, and a content-addressed on-disk response cache on top of any
backend. Everything here is safe to share between threads.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import httpx

from reviewrag.errors import (
    GenerationError,
    GenerationTimeout,
    InvalidConfig,
    RateLimited,
    ServiceError,
)
from reviewrag.prompts import AssembledPrompt

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.4
DEFAULT_MAX_TOKENS = 512

ENV_API_BASE = "REVIEWRAG_API_BASE"
ENV_API_KEY = "REVIEWRAG_API_KEY"


@dataclass(frozen=True)
class GenRequest:
    prompt: AssembledPrompt
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    model_id: str = "echo"

    def __post_init__(self):
        if self.temperature < 0:
            raise InvalidConfig(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens < 1:
            raise InvalidConfig(f"max_tokens must be >= 1, got {self.max_tokens}")

    def cache_key(self) -> str:
        payload = json.dumps(
            [self.model_id, self.prompt.system, self.prompt.text, self.temperature, self.max_tokens],
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class GenResponse:
    text: str
    latency_ms: int = 0
    usage: Optional[dict] = None
    backend: str = ""
    attempts: int = 1
    cached: bool = False
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


class TransientError(GenerationError):
    """A failure worth retrying. ``final`` is what to raise once retries run out."""

    def __init__(self, final: GenerationError, retry_after: Optional[float] = None):
        self.final = final
        self.retry_after = retry_after
        super().__init__(str(final))


# -- backends -----------------------------------------------------------------

class EchoBackend:
    name = "echo"

    def complete(self, req: GenRequest) -> tuple[str, Optional[dict]]:
        return req.prompt.text, None


class ExtractiveBackend:
    """Returns the retrieved reviews' texts, in rank order, cut to max_tokens words."""

    name = "extractive"

    def complete(self, req: GenRequest) -> tuple[str, Optional[dict]]:
        words = " ".join(req.prompt.context_texts).split()
        return " ".join(words[: req.max_tokens]), None


class HttpChatBackend:
    """OpenAI-style ``/chat/completions`` client: system + user message, one choice."""

    name = "http"

    def __init__(self, base_url: Optional[str] = None, api_key: Optional[str] = None,
                 timeout: float = 60.0, client: Optional[httpx.Client] = None):
        base_url = base_url or os.environ.get(ENV_API_BASE) or os.environ.get("OPENAI_BASE_URL")
        if not base_url:
            raise InvalidConfig(f"no API base URL; set {ENV_API_BASE}")
        api_key = api_key or os.environ.get(ENV_API_KEY) or os.environ.get("OPENAI_API_KEY")
        self.url = base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
            headers["api-key"] = api_key  # Azure-style deployments read this header
        self._client = client or httpx.Client(timeout=timeout)
        self._headers = headers

    def complete(self, req: GenRequest) -> tuple[str, Optional[dict]]:
        messages = []
        if req.prompt.system:
            messages.append({"role": "system", "content": req.prompt.system})
        messages.append({"role": "user", "content": req.prompt.text})
        body = {
            "model": req.model_id,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "n": 1,
        }
        try:
            resp = self._client.post(self.url, json=body, headers=self._headers)
        except httpx.TimeoutException as exc:
            raise TransientError(GenerationTimeout(str(exc) or "request timed out")) from exc
        except httpx.TransportError as exc:
            raise TransientError(ServiceError(None, str(exc))) from exc

        if resp.status_code == 429:
            raise TransientError(RateLimited("HTTP 429 from service"), _retry_after(resp))
        if resp.status_code >= 500:
            raise TransientError(ServiceError(resp.status_code, resp.text[:200]))
        if resp.status_code >= 400:
            raise ServiceError(resp.status_code, resp.text[:200])
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ServiceError(resp.status_code, f"malformed completion payload: {exc}") from exc
        usage = data.get("usage")
        if usage is not None:
            usage = {k: usage.get(k) for k in ("prompt_tokens", "completion_tokens")}
        return text, usage


def _retry_after(resp: httpx.Response) -> Optional[float]:
    value = resp.headers.get("retry-after")
    try:
        return float(value) if value is not None else None
    except ValueError:
        return None


def make_backend(name: str, **kwargs):
    if name == "echo":
        return EchoBackend()
    if name == "extractive":
        return ExtractiveBackend()
    if name == "http":
        return HttpChatBackend(**kwargs)
    raise InvalidConfig(f"unknown backend {name!r}; choose echo, extractive or http")


# -- gateway plumbing -----------------------------------------------------------

class RateLimiter:
    """At most ``max_calls`` acquisitions in any sliding window of ``interval`` seconds."""

    def __init__(self, max_calls: int, interval: float = 60.0,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if max_calls < 1 or interval <= 0:
            raise InvalidConfig("rate limit needs max_calls >= 1 and interval > 0")
        self.max_calls = max_calls
        self.interval = interval
        self._clock = clock
        self._sleep = sleep
        self._stamps: deque = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                while self._stamps and now - self._stamps[0] >= self.interval:
                    self._stamps.popleft()
                if len(self._stamps) < self.max_calls:
                    self._stamps.append(now)
                    return
                wait = self.interval - (now - self._stamps[0])
            self._sleep(max(wait, 0.0))


class ResponseCache:
    """Content-addressed JSON records under ``root/<key[:2]>/<key>.json``."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> Optional[dict]:
        path = self._path(key)
        try:
            with path.open(encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            return None
        except (OSError, ValueError):
            log.warning("ignoring unreadable cache record %s", path)
            return None

    def put(self, key: str, record: dict) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".{os.getpid()}.{threading.get_ident()}.tmp")
        with self._lock:
            tmp.write_text(json.dumps(record, ensure_ascii=False, sort_keys=True), encoding="utf-8")
            os.replace(tmp, path)

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("*/*.json"))


@dataclass
class GatewayStats:
    backend_calls: int = 0
    cache_hits: int = 0
    failures: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def bump(self, name: str) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + 1)


class Gateway:
    def __init__(self, backend, *, cache: Optional[ResponseCache] = None,
                 max_attempts: int = 4, backoff_base: float = 1.0, backoff_max: float = 30.0,
                 rate_limiter: Optional[RateLimiter] = None,
                 sleep: Callable[[float], None] = time.sleep):
        if max_attempts < 1:
            raise InvalidConfig("max_attempts must be >= 1")
        self.backend = backend
        self.cache = cache
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.backoff_max = backoff_max
        self.rate_limiter = rate_limiter
        self._sleep = sleep
        self.stats = GatewayStats()

    @property
    def backend_name(self) -> str:
        return getattr(self.backend, "name", type(self.backend).__name__)

    def generate(self, req: GenRequest) -> GenResponse:
        """Return the completion for one request.

        Raises RateLimited, ServiceError or GenerationTimeout once retries are
        exhausted; :meth:`generate_batch` turns those into per-sample errors.
        """
        key = req.cache_key() if self.cache is not None else None
        if key is not None:
            hit = self.cache.get(key)
            if hit is not None:
                self.stats.bump("cache_hits")
                return GenResponse(hit["text"], 0, hit.get("usage"), hit.get("backend", ""),
                                   attempts=0, cached=True)

        attempt = 0
        while True:
            attempt += 1
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            self.stats.bump("backend_calls")
            start = time.perf_counter()
            try:
                text, usage = self.backend.complete(req)
            except TransientError as exc:
                if attempt >= self.max_attempts:
                    raise exc.final from exc
                delay = min(self.backoff_base * 2 ** (attempt - 1), self.backoff_max)
                if exc.retry_after is not None:
                    delay = max(delay, exc.retry_after)
                log.info("transient failure (%s), attempt %d/%d, retrying in %.2fs",
                         exc, attempt, self.max_attempts, delay)
                self._sleep(delay)
                continue
            latency = int(round((time.perf_counter() - start) * 1000))
            break

        if key is not None:
            self.cache.put(key, {
                "model_id": req.model_id,
                "temperature": req.temperature,
                "max_tokens": req.max_tokens,
                "text": text,
                "usage": usage,
                "backend": self.backend_name,
            })
        return GenResponse(text, latency, usage, self.backend_name, attempts=attempt)

    def _safe_generate(self, req: GenRequest) -> GenResponse:
        try:
            return self.generate(req)
        except Exception as exc:  # isolate per-sample failures
            self.stats.bump("failures")
            return GenResponse("", 0, None, self.backend_name, attempts=0,
                               error=f"{type(exc).__name__}: {exc}")

    def generate_batch(self, reqs: Sequence[GenRequest], parallelism: int = 1) -> list[GenResponse]:
        """Responses are aligned with ``reqs``; at most ``parallelism`` requests in flight."""
        if parallelism < 1:
            raise InvalidConfig("parallelism must be >= 1")
        if parallelism == 1 or len(reqs) <= 1:
            return [self._safe_generate(r) for r in reqs]
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(self._safe_generate, reqs))
