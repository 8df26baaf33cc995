"""Shared access point to a chat-completion backend.

All three workloads (training rollouts, learnability scoring, mutation)
funnel through one gateway so a single serving stack can back them.
Admission is strict priority Training > Scoring > Mutation, FIFO within a
class, with a bounded number of in-flight requests.
"""
from __future__ import annotations

import heapq
import itertools
import threading
import time
from concurrent.futures import Future
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Protocol

import httpx

VALID_ROLES = frozenset({"system", "user", "assistant"})


class Priority(IntEnum):
    """Lower value dequeues first."""

    TRAINING = 0
    SCORING = 1
    MUTATION = 2


class GatewayError(Exception):
    """Base for gateway failures; catching it treats the gateway as down."""


# Callers that only care about reachability catch this alias.
GatewayUnavailable = GatewayError


class Timeout(GatewayError):
    pass


class EndpointError(GatewayError):
    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"endpoint returned status {status}: {detail}".rstrip(": "))
        self.status = status


class BackendClosed(GatewayError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion call. `seed` pins synthetic-backend randomness."""

    messages: tuple
    n: int = 1
    max_tokens: int = 1024
    temperature: float = 0.7
    priority: Priority = Priority.SCORING
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        object.__setattr__(self, "messages", tuple(dict(m) for m in self.messages))
        for m in self.messages:
            if m.get("role") not in VALID_ROLES:
                raise ValueError(f"invalid message role {m.get('role')!r}")


class Backend(Protocol):
    def complete(self, request: ChatRequest) -> list[str]: ...


class InferenceGateway:
    """Priority-scheduled front of one backend.

    Many threads may submit concurrently; `max_in_flight` worker threads
    execute against the backend. close() fails all pending requests with
    BackendClosed.
    """

    def __init__(self, backend: Backend, max_in_flight: int = 4):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self._backend = backend
        self._heap: list[tuple[int, int, ChatRequest, Future]] = []
        self._seq = itertools.count()
        self._cv = threading.Condition()
        self._closed = False
        self._workers = [
            threading.Thread(target=self._worker, daemon=True, name=f"gateway-{i}")
            for i in range(max_in_flight)
        ]
        for w in self._workers:
            w.start()

    def submit(self, request: ChatRequest) -> "Future[list[str]]":
        future: Future = Future()
        with self._cv:
            if self._closed:
                raise BackendClosed("gateway is closed")
            heapq.heappush(
                self._heap, (int(request.priority), next(self._seq), request, future)
            )
            self._cv.notify()
        return future

    def complete(self, request: ChatRequest) -> list[str]:
        """Submit and wait; returns exactly request.n completion texts."""
        return self.submit(request).result()

    def pending(self) -> int:
        with self._cv:
            return len(self._heap)

    def close(self) -> None:
        with self._cv:
            self._closed = True
            drained = list(self._heap)
            self._heap.clear()
            self._cv.notify_all()
        for _, _, _, future in drained:
            future.set_exception(BackendClosed("gateway closed before execution"))
        for w in self._workers:
            w.join(timeout=5.0)

    def __enter__(self) -> "InferenceGateway":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _worker(self) -> None:
        while True:
            with self._cv:
                while not self._heap and not self._closed:
                    self._cv.wait()
                if self._closed and not self._heap:
                    return
                _, _, request, future = heapq.heappop(self._heap)
            try:
                texts = self._backend.complete(request)
                if len(texts) != request.n:
                    raise EndpointError(
                        502, f"backend returned {len(texts)} completions for n={request.n}"
                    )
                future.set_result(texts)
            except BaseException as exc:  # worker must survive any failure
                future.set_exception(exc)


@dataclass
class RemoteBackendConfig:
    endpoint_url: str = "http://localhost:8000/v1/chat/completions"
    model: str = "default"
    timeout: float = 120.0
    max_attempts: int = 3
    backoff_base: float = 0.5


class RemoteBackend:
    """Chat-completions HTTP backend with retry and exponential backoff."""

    def __init__(self, config: RemoteBackendConfig, transport=None):
        self.config = config
        self._client = httpx.Client(timeout=config.timeout, transport=transport)

    def complete(self, request: ChatRequest) -> list[str]:
        body = {
            "model": self.config.model,
            "messages": list(request.messages),
            "n": request.n,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        last: Exception | None = None
        for attempt in range(self.config.max_attempts):
            if attempt > 0:
                time.sleep(self.config.backoff_base * 2 ** (attempt - 1))
            try:
                response = self._client.post(self.config.endpoint_url, json=body)
            except httpx.TimeoutException as exc:
                last = Timeout(str(exc))
                continue
            except httpx.HTTPError as exc:
                last = EndpointError(0, str(exc))
                continue
            if response.status_code >= 500:
                last = EndpointError(response.status_code, response.text[:200])
                continue
            if response.status_code != 200:
                raise EndpointError(response.status_code, response.text[:200])
            return self._parse(response.json(), request.n)
        assert last is not None
        raise last

    def close(self) -> None:
        self._client.close()

    @staticmethod
    def _parse(payload: dict, n: int) -> list[str]:
        try:
            texts = [choice["message"]["content"] for choice in payload["choices"]]
        except (KeyError, TypeError) as exc:
            raise EndpointError(502, f"malformed completion payload: {exc}")
        if len(texts) != n:
            raise EndpointError(502, f"expected {n} choices, got {len(texts)}")
        return texts
