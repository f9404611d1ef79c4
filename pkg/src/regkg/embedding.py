"""Text embedding backends and triplet rendering.

The baseline backend is a deterministic signed feature hasher: token unigrams
and adjacent bigrams are hashed with 64-bit FNV-1a into d buckets with a sign
drawn from the hash's top bit, then L2-normalized. Token overlap between two
texts therefore shows up directly as cosine similarity, with no model weights
involved. An HTTP backend covers external embedding services; its responses
are disk-cached by text hash.
"""
from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

import numpy as np
import requests

from .errors import ConfigError, TransportError, UnembeddableTextError
from .extraction import Triplet
from .util import atomic_write_text, sha256_text

ENV_EMBED_ENDPOINT = "REGKG_EMBED_ENDPOINT"
ENV_EMBED_API_KEY = "REGKG_EMBED_API_KEY"

DEFAULT_DIM = 256
UNIT_NORM_TOLERANCE = 1e-6

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64_MASK = 0xFFFFFFFFFFFFFFFF


@dataclass
class EmbeddingVector:
    """Unit-norm embedding plus the id of the backend that produced it."""

    values: np.ndarray
    embedder_id: str

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise UnembeddableTextError("embedding contains non-finite values")
        norm = float(np.linalg.norm(self.values))
        if abs(norm - 1.0) > UNIT_NORM_TOLERANCE:
            raise UnembeddableTextError(f"embedding norm {norm} outside unit tolerance")

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


class EmbeddingBackend(Protocol):
    embedder_id: str
    dim: int

    def embed(self, text: str) -> EmbeddingVector: ...


def render_triplet(t: Triplet) -> str:
    """`{subject} {predicate} {object}` plus ` [k=v]` qualifier suffixes sorted by key."""
    base = f"{t.subject} {t.predicate} {t.object}"
    if t.qualifiers:
        base += "".join(f" [{k}={v}]" for k, v in sorted(t.qualifiers.items()))
    return base


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _U64_MASK
    return h


def _tokenize(text: str) -> list[str]:
    tokens = []
    current = []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


class HashedEmbedder:
    """Deterministic signed-hash embedder; the id is bumped on any pipeline change."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 2:
            raise ConfigError(f"embedding dimension must be >= 2, got {dim}")
        self.dim = dim
        self.embedder_id = f"hashed-fnv1a64-v1-d{dim}"

    def embed(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise UnembeddableTextError("empty text")
        tokens = _tokenize(text)
        if not tokens:
            raise UnembeddableTextError("unembeddable text")
        features = list(tokens)
        features.extend(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
        acc = np.zeros(self.dim, dtype=np.float64)
        for feature in features:
            h = fnv1a64(feature.encode("utf-8"))
            sign = 1.0 if (h >> 63) == 0 else -1.0
            acc[h % self.dim] += sign
        norm = float(np.linalg.norm(acc))
        if norm == 0.0:
            raise UnembeddableTextError("unembeddable text")
        return EmbeddingVector(acc / norm, self.embedder_id)


class ExternalEmbedder:
    """HTTP embedding service client with retry and a text-hash disk cache."""

    def __init__(
        self,
        dim: int = DEFAULT_DIM,
        endpoint: Optional[str] = None,
        api_key: Optional[str] = None,
        model: str = "default",
        cache_dir: Optional[Path | str] = None,
        max_attempts: int = 3,
        backoff_seconds: float = 0.5,
        timeout: float = 60.0,
    ):
        self.endpoint = endpoint or os.environ.get(ENV_EMBED_ENDPOINT)
        self.api_key = api_key or os.environ.get(ENV_EMBED_API_KEY)
        if not self.endpoint:
            raise ConfigError(f"no embedding endpoint configured ({ENV_EMBED_ENDPOINT})")
        self.dim = dim
        self.model = model
        self.embedder_id = f"external-{model}-d{dim}"
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.max_attempts = max_attempts
        self.backoff_seconds = backoff_seconds
        self.timeout = timeout
        self._lock = threading.Lock()

    def _cached(self, text: str) -> Optional[list[float]]:
        if not self.cache_dir:
            return None
        path = self.cache_dir / f"{sha256_text(text)}.json"
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))
        return None

    def _store(self, text: str, values: list[float]) -> None:
        if not self.cache_dir:
            return
        path = self.cache_dir / f"{sha256_text(text)}.json"
        with self._lock:
            if not path.exists():
                atomic_write_text(path, json.dumps(values))

    def embed(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise UnembeddableTextError("empty text")
        values = self._cached(text)
        if values is None:
            values = self._fetch(text)
            self._store(text, values)
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (self.dim,):
            raise TransportError(
                f"embedding service returned shape {arr.shape}, expected ({self.dim},)"
            )
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise UnembeddableTextError("unembeddable text")
        return EmbeddingVector(arr / norm, self.embedder_id)

    def _fetch(self, text: str) -> list[float]:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_seconds * (2 ** (attempt - 1)))
            try:
                resp = requests.post(
                    self.endpoint,
                    json={"model": self.model, "text": text},
                    headers=headers,
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                return list(resp.json()["embedding"])
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_error = exc
        raise TransportError(
            f"embedding request failed after {self.max_attempts} attempts: {last_error}"
        )


def get_backend(name: str = "baseline", dim: int = DEFAULT_DIM, **kwargs) -> EmbeddingBackend:
    if name == "baseline":
        return HashedEmbedder(dim=dim)
    if name == "external":
        return ExternalEmbedder(dim=dim, **kwargs)
    raise ConfigError(f"unknown embedding backend '{name}'")


def embed_text(text: str, backend: EmbeddingBackend) -> EmbeddingVector:
    return backend.embed(text)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Dot product of unit vectors."""
    return float(np.dot(a.values, b.values))
