"""Shared fixtures: the bundled mini corpus built into stores and indexes."""
from __future__ import annotations

from pathlib import Path

import pytest

from regkg import fixture_path
from regkg.corpus import build_manifest, corpus_fingerprint, segment_corpus
from regkg.embedding import HashedEmbedder
from regkg.extraction import ExtractionConfig, extract_all
from regkg.index import index_build
from regkg.normalize import AliasTable, canonicalize_batch, merge_update
from regkg.pipeline import BuildConfig, run_build_pipeline
from regkg.store import RegStore


@pytest.fixture(scope="session")
def fixture_lines() -> list[str]:
    return fixture_path().read_text(encoding="utf-8").splitlines()


@pytest.fixture
def fixture_sections(fixture_lines):
    return segment_corpus(fixture_lines)


def build_fixture_store(directory: Path, lines: list[str]) -> RegStore:
    """Assemble the fixture store directly from module-level operations."""
    sections = segment_corpus(lines)
    by_id = {s.id: s for s in sections}
    store = RegStore(directory)
    store.init_corpus(sections, build_manifest(sections, corpus_fingerprint(lines)))
    batches = [extract_all(s, ExtractionConfig(), by_id) for s in sections]
    store.write_batches(batches)
    events = []
    for batch in batches:
        delta = merge_update(store.graph, canonicalize_batch(batch, AliasTable.empty()))
        if not delta.is_empty():
            events.append({"event": "merge", "section_id": batch.section_id, "added": delta.added})
    store.save_graph(events)
    return store


@pytest.fixture
def store(tmp_path, fixture_lines) -> RegStore:
    return build_fixture_store(tmp_path / "store", fixture_lines)


@pytest.fixture(scope="session")
def backend() -> HashedEmbedder:
    return HashedEmbedder()


@pytest.fixture
def snapshot(store, backend):
    return index_build(store.graph, backend)


@pytest.fixture
def pipeline_store(tmp_path) -> Path:
    """Fixture store built through the staged pipeline (ingest..index)."""
    store_dir = tmp_path / "pstore"
    run_build_pipeline(BuildConfig(corpus_path=fixture_path(), store_dir=store_dir))
    return store_dir
