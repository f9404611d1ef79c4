"""Completion-client plumbing shared by the extractor, generator, and judge.

Clients expose `complete(prompt) -> str`. The HTTP client retries transport
failures with exponential backoff and serializes calls through a bounded
semaphore; the caching wrapper memoizes responses on disk by prompt hash so
repeated runs are deterministic.
"""
from __future__ import annotations

import os
import threading
import time
from pathlib import Path
from typing import Optional, Protocol

import requests

from .errors import ConfigError, TransportError
from .util import atomic_write_text, sha256_text

ENV_LLM_ENDPOINT = "REGKG_LLM_ENDPOINT"
ENV_LLM_API_KEY = "REGKG_LLM_API_KEY"
ENV_LLM_MODEL = "REGKG_LLM_MODEL"


class CompletionClient(Protocol):
    def complete(self, prompt: str) -> str: ...


class HttpCompletionClient:
    """POSTs {model, prompt} to the configured endpoint; expects {"text": ...}."""

    def __init__(
        self,
        endpoint: Optional[str] = None,
        api_key: Optional[str] = None,
        model: Optional[str] = None,
        max_attempts: int = 3,
        backoff_seconds: float = 0.5,
        max_in_flight: int = 4,
        timeout: float = 60.0,
        context_chars: int = 6000,
    ):
        self.endpoint = endpoint or os.environ.get(ENV_LLM_ENDPOINT)
        self.api_key = api_key or os.environ.get(ENV_LLM_API_KEY)
        self.model = model or os.environ.get(ENV_LLM_MODEL, "default")
        if not self.endpoint:
            raise ConfigError(f"no completion endpoint configured ({ENV_LLM_ENDPOINT})")
        self.max_attempts = max_attempts
        self.backoff_seconds = backoff_seconds
        self.timeout = timeout
        self.context_chars = context_chars
        self._gate = threading.Semaphore(max_in_flight)

    def complete(self, prompt: str) -> str:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_seconds * (2 ** (attempt - 1)))
            try:
                with self._gate:
                    resp = requests.post(
                        self.endpoint,
                        json={"model": self.model, "prompt": prompt},
                        headers=headers,
                        timeout=self.timeout,
                    )
                resp.raise_for_status()
                body = resp.json()
                return str(body["text"])
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_error = exc
        raise TransportError(f"completion request failed after {self.max_attempts} attempts: {last_error}")


class DiskCachedClient:
    """Wraps any client with a prompt-hash keyed response cache on disk."""

    def __init__(self, inner: CompletionClient, cache_dir: Path | str):
        self.inner = inner
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.context_chars = getattr(inner, "context_chars", 6000)
        self._lock = threading.Lock()

    def _path(self, prompt: str) -> Path:
        return self.cache_dir / f"{sha256_text(prompt)}.txt"

    def complete(self, prompt: str) -> str:
        path = self._path(prompt)
        if path.exists():
            return path.read_text(encoding="utf-8")
        response = self.inner.complete(prompt)
        with self._lock:
            if not path.exists():
                atomic_write_text(path, response)
        return response


class ScriptedClient:
    """Deterministic stand-in for tests and offline runs.

    Responses are matched by substring of the prompt; unmatched prompts get
    the default response. `fail_times` simulates transport failures.
    """

    def __init__(self, responses: Optional[dict[str, str]] = None, default: str = "",
                 fail_times: int = 0, context_chars: int = 6000):
        self.responses = dict(responses or {})
        self.default = default
        self.fail_times = fail_times
        self.context_chars = context_chars
        self.calls: list[str] = []

    def complete(self, prompt: str) -> str:
        self.calls.append(prompt)
        if self.fail_times > 0:
            self.fail_times -= 1
            raise TransportError("scripted transport failure")
        for needle, response in self.responses.items():
            if needle in prompt:
                return response
        return self.default
