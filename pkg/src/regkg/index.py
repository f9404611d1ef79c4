"""Immutable vector index over triplets (or sections) with exact cosine kNN."""
from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Section
from .embedding import EmbeddingBackend, EmbeddingVector, render_triplet
from .errors import (
    BackendMismatchError,
    ConfigError,
    CorruptStoreError,
    IndexBuildError,
    StoreVersionError,
    UnembeddableTextError,
)
from .graph import KnowledgeGraph
from .util import atomic_write_bytes, atomic_write_text, canonical_json

INDEX_FORMAT_VERSION = 1
_INDEX_FILE = "index.json"
_VECTORS_FILE = "vectors.npy"


@dataclass
class IndexSnapshot:
    """Vectors plus the provenance each record carried at build time."""

    keys: list[str]
    matrix: np.ndarray  # (n, dim) float64, rows unit-norm
    provenance: dict[str, list[str]]
    embedder_id: str
    graph_version: int
    kind: str = "triplets"  # or "sections"
    dim: int = 0

    def __post_init__(self) -> None:
        if self.dim == 0 and self.matrix.size:
            self.dim = int(self.matrix.shape[1])

    def size(self) -> int:
        return len(self.keys)


@dataclass
class IndexCounters:
    vectors: int = 0
    failures: list[str] = field(default_factory=list)


def index_build(g: KnowledgeGraph, backend: EmbeddingBackend) -> IndexSnapshot:
    """One vector per triplet key, rendered through render_triplet.

    A triplet with empty provenance cannot be retrieved-with-evidence, so its
    presence aborts the build, as does any embedding failure; all failing keys
    are listed.
    """
    if not g.triplets:
        raise ConfigError("cannot build an index over an empty graph")
    keys = sorted(g.triplets)
    failures: list[str] = []
    rows: list[np.ndarray] = []
    for key in keys:
        if not g.provenance.get(key):
            failures.append(f"{key} (no provenance)")
            continue
        try:
            rows.append(backend.embed(render_triplet(g.triplets[key])).values)
        except UnembeddableTextError as exc:
            failures.append(f"{key} ({exc})")
    if failures:
        raise IndexBuildError(f"index build aborted; failing keys: {failures}")
    return IndexSnapshot(
        keys=keys,
        matrix=np.vstack(rows),
        provenance={k: sorted(g.provenance[k]) for k in keys},
        embedder_id=backend.embedder_id,
        graph_version=g.version,
        kind="triplets",
    )


def build_section_index(
    sections: dict[str, Section], backend: EmbeddingBackend, graph_version: int = 0
) -> IndexSnapshot:
    """Section-text index used by the text-only retrieval condition."""
    if not sections:
        raise ConfigError("cannot build an index over an empty section set")
    keys = sorted(sections)
    failures: list[str] = []
    rows: list[np.ndarray] = []
    for key in keys:
        try:
            rows.append(backend.embed(sections[key].text).values)
        except UnembeddableTextError as exc:
            failures.append(f"{key} ({exc})")
    if failures:
        raise IndexBuildError(f"section index build aborted; failing keys: {failures}")
    return IndexSnapshot(
        keys=keys,
        matrix=np.vstack(rows),
        provenance={k: [k] for k in keys},
        embedder_id=backend.embedder_id,
        graph_version=graph_version,
        kind="sections",
    )


def index_search(
    snapshot: IndexSnapshot, query: EmbeddingVector, k: int
) -> list[tuple[str, float]]:
    """Exact top-k by cosine similarity.

    Descending score, ties broken by ascending key; returns fewer than k when
    the index is smaller. Insertion order can never change the result.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if query.embedder_id != snapshot.embedder_id:
        raise BackendMismatchError(
            f"query embedded by '{query.embedder_id}' but index expects '{snapshot.embedder_id}'"
        )
    # per-row reduction (not BLAS gemv): identical vectors must score identically
    # regardless of row position, or key tie-breaking would be unstable
    scores = np.add.reduce(snapshot.matrix * query.values, axis=1)
    order = sorted(range(len(snapshot.keys)), key=lambda i: (-scores[i], snapshot.keys[i]))
    return [(snapshot.keys[i], float(scores[i])) for i in order[:k]]


def save_snapshot(snapshot: IndexSnapshot, directory: Path | str) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    buf = io.BytesIO()
    np.save(buf, snapshot.matrix.astype(np.float64), allow_pickle=False)
    vector_bytes = buf.getvalue()
    atomic_write_bytes(directory / _VECTORS_FILE, vector_bytes)
    header = {
        "format": "regkg-index",
        "format_version": INDEX_FORMAT_VERSION,
        "kind": snapshot.kind,
        "embedder_id": snapshot.embedder_id,
        "dim": snapshot.dim,
        "graph_version": snapshot.graph_version,
        "keys": snapshot.keys,
        "provenance": snapshot.provenance,
        "vectors_sha256": hashlib.sha256(vector_bytes).hexdigest(),
    }
    atomic_write_text(directory / _INDEX_FILE, canonical_json(header) + "\n")


def load_snapshot(directory: Path | str) -> IndexSnapshot:
    directory = Path(directory)
    index_path = directory / _INDEX_FILE
    if not index_path.exists():
        raise CorruptStoreError(f"index at {directory}: missing {_INDEX_FILE}")
    header = json.loads(index_path.read_text(encoding="utf-8"))
    if header.get("format") != "regkg-index":
        raise CorruptStoreError(f"index at {directory}: wrong format header")
    if header.get("format_version") != INDEX_FORMAT_VERSION:
        raise StoreVersionError(
            f"index at {directory}: format_version {header.get('format_version')} "
            f"requires upgrade (supported: {INDEX_FORMAT_VERSION})"
        )
    vector_bytes = (directory / _VECTORS_FILE).read_bytes()
    if hashlib.sha256(vector_bytes).hexdigest() != header["vectors_sha256"]:
        raise CorruptStoreError(f"index at {directory}: checksum mismatch for {_VECTORS_FILE}")
    matrix = np.load(io.BytesIO(vector_bytes), allow_pickle=False)
    return IndexSnapshot(
        keys=list(header["keys"]),
        matrix=matrix,
        provenance={k: list(v) for k, v in header["provenance"].items()},
        embedder_id=header["embedder_id"],
        graph_version=header["graph_version"],
        kind=header.get("kind", "triplets"),
        dim=header["dim"],
    )


def snapshot_exists(directory: Path | str) -> bool:
    return (Path(directory) / _INDEX_FILE).exists()
