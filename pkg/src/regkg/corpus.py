"""Corpus ingestion: segment interchange records into citable sections.

The interchange format is UTF-8 JSON Lines, one record per line with fields
{doc_id, citation, heading, body, parent_citation, metadata}. Records with a
citation become one section each; citation-less records are split into
paragraph sections with synthetic ids "{doc_id}#p{n}".
"""
from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .citations import SectionRef, parse_citation, section_id_for
from .errors import ConfigError, DuplicateCitationError, MalformedRecordError

_PARAGRAPH_SPLIT_RE = re.compile(r"\n\s*\n")
_SPACE_RUN_RE = re.compile(r"[ \t]+")
_ISO_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}")

EPOCH_TIMESTAMP = "1970-01-01T00:00:00Z"


@dataclass
class Section:
    """Atomic citable text fragment; id is the canonical citation rendering."""

    id: str
    ref: Optional[SectionRef]
    heading: str
    text: str
    parent_id: Optional[str] = None
    metadata: dict[str, str] = field(default_factory=dict)


@dataclass
class CorpusManifest:
    corpus_id: str
    section_count: int
    hierarchy_roots: list[str]
    ingest_timestamp: str


def normalize_whitespace(text: str) -> str:
    """Collapse runs of spaces/tabs to one space; newlines are preserved."""
    return _SPACE_RUN_RE.sub(" ", text).strip()


def _require_str(record: dict, index: int, name: str, required: bool = False) -> str:
    value = record.get(name)
    if value is None:
        if required:
            raise MalformedRecordError(index, name, "missing")
        return ""
    if not isinstance(value, str):
        raise MalformedRecordError(index, name, f"expected string, got {type(value).__name__}")
    return value


def _record_metadata(record: dict, index: int) -> dict[str, str]:
    raw = record.get("metadata") or {}
    if not isinstance(raw, dict):
        raise MalformedRecordError(index, "metadata", "expected object")
    meta: dict[str, str] = {}
    for k, v in raw.items():
        if not isinstance(k, str) or not isinstance(v, str):
            raise MalformedRecordError(index, "metadata", "keys and values must be strings")
        meta[k] = v
    return meta


def segment_corpus(lines: Iterable[str], fmt: str = "jsonl") -> list[Section]:
    """Parse interchange lines into Sections, reconstructing the hierarchy.

    Deterministic: identical input bytes yield an identical section list.
    Raises MalformedRecordError naming the record index and field, and
    DuplicateCitationError listing both occurrences of a repeated citation.
    """
    if fmt != "jsonl":
        raise ConfigError(f"unsupported corpus format '{fmt}'")

    sections: list[Section] = []
    seen_ids: dict[str, int] = {}
    pending_parents: list[tuple[int, int, str]] = []  # (section idx, record idx, parent citation)

    for index, line in enumerate(lines):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(index, "<line>", f"invalid JSON: {exc}") from exc
        if not isinstance(record, dict):
            raise MalformedRecordError(index, "<line>", "record must be an object")

        doc_id = _require_str(record, index, "doc_id", required=True)
        body = normalize_whitespace(_require_str(record, index, "body", required=True))
        if not body:
            raise MalformedRecordError(index, "body", "empty after normalization")
        heading = normalize_whitespace(_require_str(record, index, "heading"))
        citation = _require_str(record, index, "citation").strip()
        parent_citation = _require_str(record, index, "parent_citation").strip()
        metadata = _record_metadata(record, index)
        metadata.setdefault("doc_id", doc_id)

        if citation:
            ref = parse_citation(citation)
            if ref is None:
                raise MalformedRecordError(index, "citation", f"unrecognized citation '{citation}'")
            sid = section_id_for(ref)
            if sid in seen_ids:
                raise DuplicateCitationError(sid, seen_ids[sid], index)
            seen_ids[sid] = index
            sections.append(Section(id=sid, ref=ref, heading=heading, text=body, metadata=metadata))
            if parent_citation:
                pending_parents.append((len(sections) - 1, index, parent_citation))
        else:
            paragraphs = [p.strip() for p in _PARAGRAPH_SPLIT_RE.split(body) if p.strip()]
            for n, para in enumerate(paragraphs, start=1):
                sid = f"{doc_id}#p{n}"
                if sid in seen_ids:
                    raise DuplicateCitationError(sid, seen_ids[sid], index)
                seen_ids[sid] = index
                sections.append(
                    Section(id=sid, ref=None, heading=heading, text=para, metadata=dict(metadata))
                )

    by_id = {s.id: s for s in sections}
    for sec_idx, rec_idx, parent_citation in pending_parents:
        parent_ref = parse_citation(parent_citation)
        if parent_ref is None:
            raise MalformedRecordError(rec_idx, "parent_citation", f"unrecognized '{parent_citation}'")
        parent_id = section_id_for(parent_ref)
        if parent_id not in by_id:
            raise MalformedRecordError(rec_idx, "parent_citation", f"unknown parent '{parent_id}'")
        sections[sec_idx].parent_id = parent_id

    return sections


def corpus_fingerprint(lines: Iterable[str]) -> str:
    h = hashlib.sha256()
    for line in lines:
        h.update(line.encode("utf-8"))
        h.update(b"\n")
    return "corpus-" + h.hexdigest()[:16]


def resolve_ingest_timestamp(sections: list[Section], explicit: Optional[str] = None) -> str:
    """Deterministic manifest timestamp: explicit arg, env override, newest
    revision_date in record metadata, or the epoch. Wall-clock time is never
    used so re-ingesting identical bytes reproduces identical store bytes."""
    if explicit:
        return explicit
    env = os.environ.get("REGKG_INGEST_TIME")
    if env:
        return env
    dates = [
        s.metadata["revision_date"]
        for s in sections
        if _ISO_DATE_RE.match(s.metadata.get("revision_date", ""))
    ]
    if dates:
        newest = max(dates)
        return newest if "T" in newest else f"{newest}T00:00:00Z"
    return EPOCH_TIMESTAMP


def build_manifest(
    sections: list[Section], corpus_id: str, ingest_timestamp: Optional[str] = None
) -> CorpusManifest:
    roots = sorted(s.id for s in sections if s.parent_id is None)
    return CorpusManifest(
        corpus_id=corpus_id,
        section_count=len(sections),
        hierarchy_roots=roots,
        ingest_timestamp=resolve_ingest_timestamp(sections, ingest_timestamp),
    )
