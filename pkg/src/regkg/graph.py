"""In-memory knowledge graph: entities, triplet edges, and provenance maps.

`provenance` maps each triplet identity key to the section ids it was
extracted from; `section_index` is the exact inverse. Both are maintained
together by every mutation and checked by `audit`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import UnknownSectionError
from .extraction import Triplet


@dataclass
class KnowledgeGraph:
    entities: set[str] = field(default_factory=set)
    triplets: dict[str, Triplet] = field(default_factory=dict)
    provenance: dict[str, set[str]] = field(default_factory=dict)
    section_index: dict[str, set[str]] = field(default_factory=dict)
    version: int = 0

    def triplet_count(self) -> int:
        return len(self.triplets)

    def keys_of(self, section_id: str) -> set[str]:
        return set(self.section_index.get(section_id, set()))

    def triplets_of(self, section_id: str) -> list[Triplet]:
        """T(s) as a list sorted by identity key; empty when nothing was extracted."""
        return [self.triplets[k] for k in sorted(self.section_index.get(section_id, set()))]

    def add_triplet(self, triplet: Triplet, section_id: str) -> None:
        key = triplet.key_str
        self.triplets[key] = triplet
        self.entities.add(triplet.subject)
        self.entities.add(triplet.object)
        self.provenance.setdefault(key, set()).add(section_id)
        self.section_index.setdefault(section_id, set()).add(key)

    def extend_provenance(self, key: str, section_id: str) -> bool:
        """Record one more source section for an existing triplet; True if new."""
        if section_id in self.provenance[key]:
            return False
        self.provenance[key].add(section_id)
        self.section_index.setdefault(section_id, set()).add(key)
        return True

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return (
            self.entities == other.entities
            and self.triplets == other.triplets
            and self.provenance == other.provenance
            and self.section_index == other.section_index
            and self.version == other.version
        )


def triplets_of_section(
    g: KnowledgeGraph, section_id: str, known_sections: Optional[Iterable[str]] = None
) -> list[Triplet]:
    """T(s) with an existence check against the corpus section set."""
    known = set(known_sections) if known_sections is not None else None
    if known is not None:
        if section_id not in known:
            raise UnknownSectionError(f"unknown section id '{section_id}'")
    elif section_id not in g.section_index:
        raise UnknownSectionError(f"unknown section id '{section_id}'")
    return g.triplets_of(section_id)


def audit(g: KnowledgeGraph) -> list[str]:
    """Full-store consistency audit; returns human-readable violations (empty = healthy)."""
    problems: list[str] = []
    for key, sections in g.provenance.items():
        if key not in g.triplets:
            problems.append(f"provenance references unknown triplet {key!r}")
        if not sections:
            problems.append(f"triplet {key!r} has empty provenance")
        for sid in sections:
            if key not in g.section_index.get(sid, set()):
                problems.append(f"inversion broken: {key!r} missing from section_index[{sid!r}]")
    for sid, keys in g.section_index.items():
        for key in keys:
            if sid not in g.provenance.get(key, set()):
                problems.append(f"inversion broken: {sid!r} missing from provenance[{key!r}]")
    for key, triplet in g.triplets.items():
        if key not in g.provenance:
            problems.append(f"triplet {key!r} has no provenance entry")
        if triplet.subject not in g.entities:
            problems.append(f"subject of {key!r} missing from entities")
        if triplet.object not in g.entities:
            problems.append(f"object of {key!r} missing from entities")
    return problems
