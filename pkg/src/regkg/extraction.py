"""Triplet extraction from sections.

Three deterministic extractors (structural hierarchy, cross-references,
timeframes) plus an optional LLM-backed extractor behind a completion-client
interface. Deterministic extractors always emit confidence 1.0 and never
invent entities that are absent from the section text or its hierarchy.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .citations import CrossReference, entity_label_for, extract_cross_references
from .corpus import Section
from .errors import ConfigError, TransportError

logger = logging.getLogger(__name__)

EXTRACTOR_ORDER = ("structural", "reference", "timeframe", "llm")
EXTRACTOR_VERSIONS = {
    "structural": "1.0",
    "reference": "1.0",
    "timeframe": "1.0",
    "llm": "1.0",
}

_TIMEFRAME_UNITS = r"(?:business days|days|months|years)"
_DURATION_TO_RE = re.compile(rf"\b(\d+)\s+({_TIMEFRAME_UNITS})\s+to\s+([^.;:,\n]+)")
_WITHIN_RE = re.compile(rf"\bwithin\s+(\d+)\s+({_TIMEFRAME_UNITS})\b")

LLM_PROMPT_TEMPLATE = (
    "Extract subject-predicate-object triplets from the regulatory text below.\n"
    "Return one triplet per line in exactly this form:\n"
    "subject|predicate|object|confidence\n"
    "Confidence is a number between 0 and 1. Output nothing else.\n"
    "\n"
    "SECTION {section_id}:\n"
    "{text}"
)


@dataclass
class Triplet:
    """One subject-predicate-object fact; (subject, predicate, object) is its identity."""

    subject: str
    predicate: str
    object: str
    qualifiers: dict[str, str] = field(default_factory=dict)
    confidence: float = 1.0
    extractor: str = "structural"

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.subject, self.predicate, self.object)

    @property
    def key_str(self) -> str:
        return f"{self.subject}|{self.predicate}|{self.object}"


@dataclass
class ExtractionBatch:
    section_id: str
    triplets: list[Triplet]
    extractor_versions: dict[str, str] = field(default_factory=dict)


@dataclass
class ExtractionConfig:
    extractors: tuple[str, ...] = ("structural", "reference", "timeframe")
    llm_required: bool = False

    def __post_init__(self) -> None:
        unknown = [e for e in self.extractors if e not in EXTRACTOR_ORDER]
        if unknown:
            raise ConfigError(f"unknown extractors: {unknown}")
        if not self.extractors:
            raise ConfigError("at least one extractor must be enabled")


def section_entity_label(section: Section) -> str:
    """Entity surface for a section: its citation label, or the raw id if synthetic."""
    if section.ref is not None:
        return entity_label_for(section.ref)
    return section.id


def _ancestor_refs(section: Section, by_id: dict[str, Section]):
    seen = {section.id}
    cur = section
    while cur.parent_id is not None and cur.parent_id in by_id and cur.parent_id not in seen:
        cur = by_id[cur.parent_id]
        seen.add(cur.id)
        if cur.ref is not None:
            yield cur.ref


def extract_structural(section: Section, by_id: dict[str, Section]) -> list[Triplet]:
    """Hierarchy triplets for one section.

    §-sections link to their subpart (inSubpart); subparts link to their part
    (partOf); parts link to their chapter and subchapter (partOf). Parents are
    taken from the parent chain first, then from the section's own citation
    fields, so containers that exist only as citation context still appear as
    entities.
    """
    ref = section.ref
    if ref is None:
        return []
    own = entity_label_for(ref)
    ancestors = list(_ancestor_refs(section, by_id))
    out: list[Triplet] = []

    if ref.kind == "section":
        subpart_label = None
        for anc in ancestors:
            if anc.kind == "subpart":
                subpart_label = entity_label_for(anc)
                break
        if subpart_label is None and ref.subpart is not None:
            subpart_label = entity_label_for(
                type(ref)(part=ref.part, subpart=ref.subpart)
            )
        if subpart_label is not None:
            out.append(Triplet(own, "inSubpart", subpart_label, extractor="structural"))
    elif ref.kind == "subpart":
        part_label = None
        for anc in ancestors:
            if anc.kind == "part":
                part_label = entity_label_for(anc)
                break
        if part_label is None and ref.part is not None:
            part_label = f"Part {ref.part}"
        if part_label is not None:
            out.append(Triplet(own, "partOf", part_label, extractor="structural"))
    elif ref.kind == "part":
        chapter = ref.chapter
        subchapter = ref.subchapter
        for anc in ancestors:
            if chapter is None and anc.kind == "chapter":
                chapter = anc.chapter
            if subchapter is None and anc.kind == "subchapter":
                subchapter = anc.subchapter
        if chapter is not None:
            out.append(Triplet(own, "partOf", f"Chapter {chapter}", extractor="structural"))
        if subchapter is not None:
            out.append(Triplet(own, "partOf", f"Subchapter {subchapter}", extractor="structural"))
    return out


def extract_references(section: Section, xrefs: Sequence[CrossReference]) -> list[Triplet]:
    """One (section, references, target) per distinct cited target, by first offset."""
    own = section_entity_label(section)
    out: list[Triplet] = []
    seen: set[str] = set()
    for xref in sorted(xrefs, key=lambda x: x.offset):
        if xref.is_self:
            continue
        target = entity_label_for(xref.ref)
        if target in seen or target == own:
            continue
        seen.add(target)
        out.append(Triplet(own, "references", target, extractor="reference"))
    return out


def extract_timeframes(section: Section) -> list[Triplet]:
    """Duration triplets: "<N> <unit> to <action>" and "within <N> <unit>"."""
    own = section_entity_label(section)
    found: list[tuple[int, Triplet]] = []
    for m in _DURATION_TO_RE.finditer(section.text):
        count, unit, action = m.group(1), m.group(2), m.group(3).strip()
        obj = f"{count} {unit} to {action}"
        found.append(
            (m.start(), Triplet(own, "hasTimeframe", obj,
                                qualifiers={"count": count, "unit": unit},
                                extractor="timeframe"))
        )
    for m in _WITHIN_RE.finditer(section.text):
        count, unit = m.group(1), m.group(2)
        obj = f"within {count} {unit}"
        found.append(
            (m.start(), Triplet(own, "hasTimeframe", obj,
                                qualifiers={"count": count, "unit": unit},
                                extractor="timeframe"))
        )
    return [t for _, t in sorted(found, key=lambda item: item[0])]


def parse_llm_lines(text: str) -> tuple[list[Triplet], int]:
    """Parse `subject|predicate|object|confidence` lines; returns (kept, dropped).

    A line must split into exactly four pipe-fields with non-empty subject,
    predicate, and object; a blank or non-numeric confidence falls back to 0.5
    and is clamped into [0, 1].
    """
    kept: list[Triplet] = []
    dropped = 0
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 4 or not parts[0] or not parts[1] or not parts[2]:
            dropped += 1
            continue
        try:
            confidence = float(parts[3]) if parts[3] else 0.5
        except ValueError:
            confidence = 0.5
        confidence = min(1.0, max(0.0, confidence))
        kept.append(
            Triplet(parts[0], parts[1], parts[2], confidence=confidence, extractor="llm")
        )
    return kept, dropped


def _split_to_budget(text: str, budget: int) -> list[str]:
    """Split on sentence boundaries into chunks no longer than budget chars."""
    if len(text) <= budget:
        return [text]
    sentences = re.split(r"(?<=[.!?])\s+", text)
    chunks: list[str] = []
    current = ""
    for sentence in sentences:
        if current and len(current) + 1 + len(sentence) > budget:
            chunks.append(current)
            current = sentence
        else:
            current = f"{current} {sentence}".strip()
        while len(current) > budget:  # pathological unbroken sentence
            chunks.append(current[:budget])
            current = current[budget:]
    if current:
        chunks.append(current)
    return chunks


def extract_llm(section: Section, client, counters: Optional[dict[str, int]] = None) -> list[Triplet]:
    """Prompt the completion client for triplets and parse its line protocol.

    The client is expected to handle retries and response caching; this
    function only owns prompting, chunking to the client's context budget,
    and line parsing.
    """
    if not section.text.strip():
        return []
    budget = getattr(client, "context_chars", 6000)
    triplets: list[Triplet] = []
    dropped_total = 0
    for chunk in _split_to_budget(section.text, budget):
        prompt = LLM_PROMPT_TEMPLATE.format(section_id=section.id, text=chunk)
        response = client.complete(prompt)
        kept, dropped = parse_llm_lines(response)
        triplets.extend(kept)
        dropped_total += dropped
    if counters is not None:
        counters["llm_dropped_lines"] = counters.get("llm_dropped_lines", 0) + dropped_total
        if not triplets:
            counters["llm_empty_responses"] = counters.get("llm_empty_responses", 0) + 1
    if not triplets:
        logger.warning("no parseable triplet lines for section %s", section.id)
    return triplets


def extract_all(
    section: Section,
    config: ExtractionConfig,
    by_id: dict[str, Section],
    client=None,
    counters: Optional[dict[str, int]] = None,
) -> ExtractionBatch:
    """Union of all enabled extractors, identity-deduplicated, in stable order."""
    enabled = [e for e in EXTRACTOR_ORDER if e in config.extractors]
    if not enabled:
        raise ConfigError("at least one extractor must be enabled")

    triplets: list[Triplet] = []
    if "structural" in enabled:
        triplets.extend(extract_structural(section, by_id))
    if "reference" in enabled:
        triplets.extend(extract_references(section, extract_cross_references(section)))
    if "timeframe" in enabled:
        triplets.extend(extract_timeframes(section))
    if "llm" in enabled:
        if client is None:
            raise ConfigError("llm extractor enabled but no completion client configured")
        try:
            triplets.extend(extract_llm(section, client, counters))
        except TransportError:
            if config.llm_required:
                raise
            logger.warning("llm extraction failed for %s; continuing without it", section.id)

    rank = {name: i for i, name in enumerate(EXTRACTOR_ORDER)}
    deduped: dict[tuple[str, str, str], Triplet] = {}
    for t in triplets:
        if t.key not in deduped:
            deduped[t.key] = t
    ordered = sorted(deduped.values(), key=lambda t: (rank[t.extractor], t.key))
    return ExtractionBatch(
        section_id=section.id,
        triplets=ordered,
        extractor_versions={e: EXTRACTOR_VERSIONS[e] for e in enabled},
    )
