"""Query answering: retrieval, story assembly, generation, extractive fallback."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Optional

from .corpus import Section
from .embedding import EmbeddingBackend, cosine, render_triplet
from .errors import TransportError, UnembeddableTextError
from .extraction import Triplet
from .index import IndexSnapshot, index_search

logger = logging.getLogger(__name__)

DEFAULT_K = 5
STORY_CHAR_CAP = 8000
NO_EVIDENCE_SENTINEL = "NO EVIDENCE RETRIEVED"
REFUSAL_TEXT = "insufficient evidence"
TRUNCATION_MARKER = "[evidence truncated]"

GENERATION_INSTRUCTION = (
    "Answer the question using only the FACTS and EVIDENCE below. "
    "Cite the ids of the EVIDENCE sections you rely on in square brackets, "
    "for example [117.264]. If the evidence is insufficient, reply exactly "
    f'"{REFUSAL_TEXT}".'
)

_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+|\n+")


@dataclass
class RetrievalBundle:
    """Top-k triplets for a query plus the evidence sections behind them.

    For bundles produced by retrieve(), evidence_sections is exactly the union
    of the hits' provenance, deduplicated and ordered by (best triplet rank,
    section id). Text-only retrieval fills evidence_sections directly and
    leaves top_triplets empty.
    """

    query: str
    top_triplets: list[tuple[Triplet, float]]
    evidence_sections: list[Section]
    k: int
    snapshot_version: int
    empty_index: bool = False


@dataclass
class Answer:
    text: str
    mode: str  # "generated" | "extractive"
    citations: list[str]
    bundle_ref: RetrievalBundle
    degraded: bool = False


def retrieve(
    query: str,
    k: int,
    snapshot: IndexSnapshot,
    sections: dict[str, Section],
    backend: EmbeddingBackend,
    triplets: dict[str, Triplet],
) -> RetrievalBundle:
    """Embed the query, run exact kNN, and resolve provenance into evidence."""
    if k < 1:
        k = DEFAULT_K
    if snapshot.size() == 0:
        return RetrievalBundle(query, [], [], k, snapshot.graph_version, empty_index=True)
    query_vec = backend.embed(query)
    hits = index_search(snapshot, query_vec, k)

    top: list[tuple[Triplet, float]] = []
    evidence_rank: dict[str, int] = {}
    for rank, (key, score) in enumerate(hits):
        top.append((triplets[key], score))
        for sid in snapshot.provenance.get(key, []):
            if sid in sections and sid not in evidence_rank:
                evidence_rank[sid] = rank
    ordered = sorted(evidence_rank.items(), key=lambda item: (item[1], item[0]))
    evidence = [sections[sid] for sid, _ in ordered]
    return RetrievalBundle(query, top, evidence, k, snapshot.graph_version)


def retrieve_sections(
    query: str,
    k: int,
    snapshot: IndexSnapshot,
    sections: dict[str, Section],
    backend: EmbeddingBackend,
) -> RetrievalBundle:
    """Text-only retrieval over a section index; no triplets involved."""
    if k < 1:
        k = DEFAULT_K
    if snapshot.size() == 0:
        return RetrievalBundle(query, [], [], k, snapshot.graph_version, empty_index=True)
    hits = index_search(snapshot, backend.embed(query), k)
    evidence = [sections[key] for key, _ in hits if key in sections]
    return RetrievalBundle(query, [], evidence, k, snapshot.graph_version)


def build_story(bundle: RetrievalBundle, char_cap: int = STORY_CHAR_CAP) -> str:
    """Deterministic narrative: FACTS (ranked triplets) then EVIDENCE blocks.

    When the story exceeds the cap, the lowest-ranked evidence is trimmed
    first and a truncation marker is appended.
    """
    if not bundle.top_triplets and not bundle.evidence_sections:
        return NO_EVIDENCE_SENTINEL

    lines = ["FACTS:"]
    for rank, (triplet, _score) in enumerate(bundle.top_triplets, start=1):
        lines.append(f"{rank}. {render_triplet(triplet)}")
    if not bundle.top_triplets:
        lines.append("(none)")
    facts = "\n".join(lines)

    blocks: list[str] = []
    for section in bundle.evidence_sections:
        heading = f" — {section.heading}" if section.heading else ""
        blocks.append(f"[SECTION {section.id}{heading}]\n{section.text}")

    story = facts + "\n\nEVIDENCE:\n" + "\n\n".join(blocks)
    while len(story) > char_cap and blocks:
        last = blocks[-1]
        overshoot = len(story) - char_cap + len(TRUNCATION_MARKER) + 1
        if len(last) > overshoot:
            blocks[-1] = last[: len(last) - overshoot] + "\n" + TRUNCATION_MARKER
        else:
            blocks.pop()
            if blocks:
                blocks[-1] = blocks[-1] + "\n" + TRUNCATION_MARKER
        story = facts + "\n\nEVIDENCE:\n" + "\n\n".join(blocks)
        if TRUNCATION_MARKER in story and len(story) <= char_cap:
            break
    if len(story) > char_cap:
        story = story[: char_cap - len(TRUNCATION_MARKER)] + TRUNCATION_MARKER
    return story


def _cited_ids(response: str, evidence: list[Section]) -> list[str]:
    """Evidence ids actually mentioned in the response, in evidence order."""
    return [s.id for s in evidence if s.id in response]


def generate_answer(
    query: str,
    bundle: RetrievalBundle,
    client,
    fallback_backend: Optional[EmbeddingBackend] = None,
) -> Answer:
    """Ask the generation client; fall back to the extractive path on transport failure.

    Citations are constrained to the bundle's evidence set: ids the model
    mentions that are not in evidence are discarded. The fallback scores
    sentences with fallback_backend (the snapshot's backend, normally).
    """
    if not bundle.evidence_sections and not bundle.top_triplets:
        return Answer(REFUSAL_TEXT, "generated", [], bundle)
    prompt = f"{GENERATION_INSTRUCTION}\n\nQUESTION: {query}\n\n{build_story(bundle)}"
    try:
        response = client.complete(prompt)
    except TransportError:
        logger.warning("generation failed; degrading to extractive answer")
        if fallback_backend is None:
            from .embedding import HashedEmbedder

            fallback_backend = HashedEmbedder()
        fallback = answer_extractive(query, bundle, fallback_backend)
        fallback.degraded = True
        return fallback
    return Answer(
        text=response.strip(),
        mode="generated",
        citations=_cited_ids(response, bundle.evidence_sections),
        bundle_ref=bundle,
    )


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_SPLIT_RE.split(text) if s.strip()]


def answer_extractive(query: str, bundle: RetrievalBundle, backend: EmbeddingBackend) -> Answer:
    """Best evidence sentence by cosine similarity to the query.

    The answer is always a verbatim substring of one evidence section; ties
    keep the earlier bundle position. Empty bundles refuse.
    """
    if not bundle.evidence_sections:
        return Answer(REFUSAL_TEXT, "extractive", [], bundle)
    try:
        query_vec = backend.embed(query)
    except UnembeddableTextError:
        return Answer(REFUSAL_TEXT, "extractive", [], bundle)

    best: Optional[tuple[float, str, str]] = None
    for section in bundle.evidence_sections:
        for sentence in split_sentences(section.text):
            try:
                score = cosine(backend.embed(sentence), query_vec)
            except UnembeddableTextError:
                continue
            # strict > keeps the earliest-seen sentence on ties (bundle order)
            if best is None or score > best[0]:
                best = (score, sentence, section.id)
    if best is None:
        return Answer(REFUSAL_TEXT, "extractive", [], bundle)
    _, sentence, section_id = best
    return Answer(sentence, "extractive", [section_id], bundle)
