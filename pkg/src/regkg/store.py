"""On-disk store: sections, triplets, provenance, journal, manifest.

Layout under one directory:

    manifest.json      corpus metadata, graph version, per-file checksums
    sections.jsonl     header line + one record per section (document order)
    batches.jsonl      raw extraction output awaiting normalization
    triplets.jsonl     header + one record per triplet, sorted by identity key
    provenance.jsonl   header + one record per key, sorted
    journal.jsonl      header + append-only merge/alias events

Every file starts with a {"format": ..., "format_version": ...} header line.
Writers hold an exclusive file lock; loads verify checksums and versions.
All serialization is canonical (sorted keys, fixed separators), so identical
inputs produce byte-identical stores.
"""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Optional

from filelock import FileLock

from .citations import SectionRef
from .corpus import CorpusManifest, Section
from .errors import CorruptStoreError, StoreVersionError
from .extraction import ExtractionBatch, Triplet
from .graph import KnowledgeGraph
from .util import atomic_write_text, canonical_json, sha256_text

FORMAT_VERSION = 1

_SECTION_FILE = "sections.jsonl"
_BATCH_FILE = "batches.jsonl"
_TRIPLET_FILE = "triplets.jsonl"
_PROVENANCE_FILE = "provenance.jsonl"
_JOURNAL_FILE = "journal.jsonl"
_MANIFEST_FILE = "manifest.json"

_CHECKSUMMED_FILES = (_SECTION_FILE, _BATCH_FILE, _TRIPLET_FILE, _PROVENANCE_FILE, _JOURNAL_FILE)


def _header(kind: str) -> str:
    return canonical_json({"format": f"regkg-{kind}", "format_version": FORMAT_VERSION})


def _render_jsonl(kind: str, records: Iterable[dict]) -> str:
    lines = [_header(kind)]
    lines.extend(canonical_json(r) for r in records)
    return "\n".join(lines) + "\n"


def _parse_jsonl(path: Path, kind: str) -> list[dict]:
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CorruptStoreError(f"store at {path.parent}: {path.name} is empty")
    header = json.loads(lines[0])
    if header.get("format") != f"regkg-{kind}":
        raise CorruptStoreError(f"store at {path.parent}: {path.name} has wrong format header")
    if header.get("format_version") != FORMAT_VERSION:
        raise StoreVersionError(
            f"store at {path.parent}: {path.name} format_version "
            f"{header.get('format_version')} requires upgrade (supported: {FORMAT_VERSION})"
        )
    return [json.loads(ln) for ln in lines[1:]]


def _section_record(s: Section) -> dict:
    ref = None
    if s.ref is not None:
        ref = {k: v for k, v in asdict(s.ref).items() if v is not None}
    return {
        "id": s.id,
        "ref": ref,
        "heading": s.heading,
        "text": s.text,
        "parent_id": s.parent_id,
        "metadata": s.metadata,
    }


def _section_from_record(r: dict) -> Section:
    ref = SectionRef(**r["ref"]) if r.get("ref") else None
    return Section(
        id=r["id"],
        ref=ref,
        heading=r.get("heading", ""),
        text=r["text"],
        parent_id=r.get("parent_id"),
        metadata=dict(r.get("metadata", {})),
    )


def _triplet_record(t: Triplet) -> dict:
    return {
        "key": t.key_str,
        "subject": t.subject,
        "predicate": t.predicate,
        "object": t.object,
        "qualifiers": t.qualifiers,
        "confidence": t.confidence,
        "extractor": t.extractor,
    }


def _triplet_from_record(r: dict) -> Triplet:
    return Triplet(
        subject=r["subject"],
        predicate=r["predicate"],
        object=r["object"],
        qualifiers=dict(r.get("qualifiers", {})),
        confidence=float(r.get("confidence", 1.0)),
        extractor=r.get("extractor", "structural"),
    )


class RegStore:
    """One corpus + graph rooted at a directory."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self.sections: list[Section] = []
        self.manifest: Optional[CorpusManifest] = None
        self.graph = KnowledgeGraph()
        self.alias_version: str = ""

    # -- locking ------------------------------------------------------------

    def _lock(self) -> FileLock:
        self.path.mkdir(parents=True, exist_ok=True)
        return FileLock(self.path / ".lock")

    # -- writes -------------------------------------------------------------

    def init_corpus(self, sections: list[Section], manifest: CorpusManifest) -> None:
        with self._lock():
            self.sections = sections
            self.manifest = manifest
            atomic_write_text(
                self.path / _SECTION_FILE,
                _render_jsonl("sections", (_section_record(s) for s in sections)),
            )
            self._write_graph_files()
            journal = self.path / _JOURNAL_FILE
            if not journal.exists():
                atomic_write_text(journal, _render_jsonl("journal", []))
            batches = self.path / _BATCH_FILE
            if not batches.exists():
                atomic_write_text(batches, _render_jsonl("batches", []))
            self._write_manifest()

    def write_batches(self, batches: list[ExtractionBatch]) -> None:
        records = [
            {
                "section_id": b.section_id,
                "triplets": [_triplet_record(t) for t in b.triplets],
                "extractor_versions": b.extractor_versions,
            }
            for b in batches
        ]
        with self._lock():
            atomic_write_text(self.path / _BATCH_FILE, _render_jsonl("batches", records))
            self._write_manifest()

    def read_batches(self) -> list[ExtractionBatch]:
        records = _parse_jsonl(self.path / _BATCH_FILE, "batches")
        return [
            ExtractionBatch(
                section_id=r["section_id"],
                triplets=[_triplet_from_record(tr) for tr in r["triplets"]],
                extractor_versions=dict(r.get("extractor_versions", {})),
            )
            for r in records
        ]

    def save_graph(self, journal_events: Optional[list[dict]] = None) -> None:
        """Persist the graph snapshot and append journal events atomically."""
        with self._lock():
            self._write_graph_files()
            if journal_events:
                journal = self.path / _JOURNAL_FILE
                existing = journal.read_text(encoding="utf-8") if journal.exists() else _header("journal") + "\n"
                appended = existing + "".join(canonical_json(e) + "\n" for e in journal_events)
                atomic_write_text(journal, appended)
            self._write_manifest()

    def _write_graph_files(self) -> None:
        g = self.graph
        atomic_write_text(
            self.path / _TRIPLET_FILE,
            _render_jsonl("triplets", (_triplet_record(g.triplets[k]) for k in sorted(g.triplets))),
        )
        atomic_write_text(
            self.path / _PROVENANCE_FILE,
            _render_jsonl(
                "provenance",
                ({"key": k, "sections": sorted(g.provenance[k])} for k in sorted(g.provenance)),
            ),
        )

    def _write_manifest(self) -> None:
        if self.manifest is None:
            raise CorruptStoreError(f"store at {self.path}: manifest not initialized")
        checksums = {}
        for name in _CHECKSUMMED_FILES:
            f = self.path / name
            if f.exists():
                checksums[name] = sha256_text(f.read_text(encoding="utf-8"))
        record = {
            "format": "regkg-store",
            "format_version": FORMAT_VERSION,
            "corpus_id": self.manifest.corpus_id,
            "section_count": self.manifest.section_count,
            "hierarchy_roots": self.manifest.hierarchy_roots,
            "ingest_timestamp": self.manifest.ingest_timestamp,
            "graph_version": self.graph.version,
            "alias_version": self.alias_version,
            "checksums": checksums,
        }
        atomic_write_text(self.path / _MANIFEST_FILE, canonical_json(record) + "\n")

    # -- reads --------------------------------------------------------------

    @classmethod
    def load(cls, path: Path | str) -> "RegStore":
        store = cls(path)
        manifest_path = store.path / _MANIFEST_FILE
        if not manifest_path.exists():
            raise CorruptStoreError(f"store at {store.path}: missing {_MANIFEST_FILE}")
        record = json.loads(manifest_path.read_text(encoding="utf-8"))
        if record.get("format") != "regkg-store":
            raise CorruptStoreError(f"store at {store.path}: manifest has wrong format")
        if record.get("format_version") != FORMAT_VERSION:
            raise StoreVersionError(
                f"store at {store.path}: format_version {record.get('format_version')} "
                f"requires upgrade (supported: {FORMAT_VERSION})"
            )
        for name, expected in record.get("checksums", {}).items():
            f = store.path / name
            if not f.exists():
                raise CorruptStoreError(f"store at {store.path}: missing {name}")
            actual = sha256_text(f.read_text(encoding="utf-8"))
            if actual != expected:
                raise CorruptStoreError(
                    f"store at {store.path}: checksum mismatch for {name} "
                    f"(expected {expected[:12]}…, got {actual[:12]}…)"
                )

        store.manifest = CorpusManifest(
            corpus_id=record["corpus_id"],
            section_count=record["section_count"],
            hierarchy_roots=list(record["hierarchy_roots"]),
            ingest_timestamp=record["ingest_timestamp"],
        )
        store.alias_version = record.get("alias_version", "")
        store.sections = [
            _section_from_record(r) for r in _parse_jsonl(store.path / _SECTION_FILE, "sections")
        ]

        g = KnowledgeGraph(version=record.get("graph_version", 0))
        triplet_path = store.path / _TRIPLET_FILE
        if triplet_path.exists():
            for r in _parse_jsonl(triplet_path, "triplets"):
                t = _triplet_from_record(r)
                g.triplets[t.key_str] = t
                g.entities.add(t.subject)
                g.entities.add(t.object)
        provenance_path = store.path / _PROVENANCE_FILE
        if provenance_path.exists():
            for r in _parse_jsonl(provenance_path, "provenance"):
                key, section_ids = r["key"], r["sections"]
                g.provenance[key] = set(section_ids)
                for sid in section_ids:
                    g.section_index.setdefault(sid, set()).add(key)
        store.graph = g
        return store

    # -- helpers ------------------------------------------------------------

    @property
    def sections_by_id(self) -> dict[str, Section]:
        return {s.id: s for s in self.sections}

    def store_checksum(self) -> str:
        """Checksum of the whole store (the manifest covers every payload file)."""
        return sha256_text((self.path / _MANIFEST_FILE).read_text(encoding="utf-8"))
