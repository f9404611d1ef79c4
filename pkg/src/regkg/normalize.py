"""Entity canonicalization, alias resolution, deduplication, and store merge."""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

from .errors import ConfigError, EmptyEntityError
from .extraction import EXTRACTOR_ORDER, ExtractionBatch, Triplet
from .graph import KnowledgeGraph
from .util import sha256_text

_WS_RUN_RE = re.compile(r"\s+")
# "Sec. 117.264" / "Section 117.264" / "§§ 117.257" / "§ 117.264" all become "§117.264"
_SECTION_MARK_RE = re.compile(r"(?i)(?:§§?|\bsecs?\.|\bsections?\b\.?)\s*(?=\d)")
_UNIT_KEYWORD_RE = re.compile(r"(?i)\b(title|chapter|subchapter|part|subpart)\b")
_EXTRACTOR_RANK = {name: i for i, name in enumerate(EXTRACTOR_ORDER)}


def canonical_surface(raw: str) -> str:
    """Alias-free canonical form: trim, collapse whitespace, unify section
    markers to a glued "§", and uppercase hierarchy-unit keywords."""
    text = _WS_RUN_RE.sub(" ", raw.strip())
    text = _SECTION_MARK_RE.sub("§", text)
    text = _UNIT_KEYWORD_RE.sub(lambda m: m.group(1).upper(), text)
    return text


@dataclass
class AliasTable:
    """Maps canonical entity strings to their alias sets.

    Alias sets are pairwise disjoint and no alias may equal a different
    canonical form; lookups are case-insensitive, output is case-preserving.
    """

    entries: dict[str, set[str]] = field(default_factory=dict)
    version: str = ""

    _lookup: dict[str, str] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        normalized: dict[str, set[str]] = {}
        for canonical, aliases in self.entries.items():
            normalized[canonical_surface(canonical)] = {canonical_surface(a) for a in aliases}
        self.entries = normalized

        lookup: dict[str, str] = {}
        canonical_lower = {c.lower(): c for c in self.entries}
        for canonical, aliases in sorted(self.entries.items()):
            lookup[canonical.lower()] = canonical
            for alias in sorted(aliases):
                low = alias.lower()
                if low in canonical_lower and canonical_lower[low] != canonical:
                    raise ConfigError(
                        f"alias '{alias}' collides with canonical form '{canonical_lower[low]}'"
                    )
                if low in lookup and lookup[low] != canonical:
                    raise ConfigError(f"alias '{alias}' appears under two canonical forms")
                lookup[low] = canonical
        self._lookup = lookup
        if not self.version:
            payload = ";".join(
                f"{c}={','.join(sorted(a))}" for c, a in sorted(self.entries.items())
            )
            self.version = sha256_text(payload)[:12]

    def resolve(self, surface: str) -> str:
        return self._lookup.get(surface.lower(), surface)

    @classmethod
    def empty(cls) -> "AliasTable":
        return cls()

    @classmethod
    def load(cls, path: Path | str) -> "AliasTable":
        """Parse `canonical: alias1; alias2` lines; '#' starts a comment."""
        entries: dict[str, set[str]] = {}
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if ":" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'canonical: alias; alias'")
            canonical, _, alias_part = line.partition(":")
            aliases = {a.strip() for a in alias_part.split(";") if a.strip()}
            entries.setdefault(canonical.strip(), set()).update(aliases)
        return cls(entries=entries)


def canonicalize_entity(raw: str, aliases: Optional[AliasTable] = None) -> str:
    """Deterministic, idempotent entity canonicalization with alias resolution."""
    surface = canonical_surface(raw)
    if not surface:
        raise EmptyEntityError("empty entity")
    if aliases is None:
        return surface
    return aliases.resolve(surface)


def canonicalize_predicate(raw: str) -> str:
    """Normalize predicate surface to lowerCamel; no synonym resolution."""
    words = _WS_RUN_RE.sub(" ", raw.strip()).split(" ")
    words = [w.lower() if w.isupper() else w for w in words if w]
    if not words:
        raise EmptyEntityError("empty predicate")
    head = words[0][0].lower() + words[0][1:]
    tail = [w[0].upper() + w[1:] for w in words[1:]]
    return "".join([head, *tail])


def canonicalize_triplet(t: Triplet, aliases: Optional[AliasTable] = None) -> Triplet:
    return replace(
        t,
        subject=canonicalize_entity(t.subject, aliases),
        predicate=canonicalize_predicate(t.predicate),
        object=canonicalize_entity(t.object, aliases),
        qualifiers={k.strip(): v.strip() for k, v in t.qualifiers.items()},
    )


def canonicalize_batch(batch: ExtractionBatch, aliases: Optional[AliasTable] = None) -> ExtractionBatch:
    return ExtractionBatch(
        section_id=batch.section_id,
        triplets=dedupe([canonicalize_triplet(t, aliases) for t in batch.triplets]),
        extractor_versions=dict(batch.extractor_versions),
    )


def _merge_group(group: list[Triplet]) -> Triplet:
    """Collapse same-key triplets: max confidence wins; qualifiers union with
    higher-confidence values preferred and lexicographic tie-break."""
    best = max(
        enumerate(group),
        key=lambda item: (
            item[1].confidence,
            -_EXTRACTOR_RANK.get(item[1].extractor, len(EXTRACTOR_ORDER)),
            -item[0],
        ),
    )[1]
    qualifiers: dict[str, tuple[float, str]] = {}
    for t in group:
        for k, v in t.qualifiers.items():
            if k not in qualifiers:
                qualifiers[k] = (t.confidence, v)
                continue
            held_conf, held_val = qualifiers[k]
            if t.confidence > held_conf or (t.confidence == held_conf and v < held_val):
                qualifiers[k] = (t.confidence, v)
    return replace(
        best,
        confidence=max(t.confidence for t in group),
        qualifiers={k: v for k, (_, v) in sorted(qualifiers.items())},
    )


def dedupe(batch: Iterable[Triplet]) -> list[Triplet]:
    """One triplet per identity key, in stable key order."""
    groups: dict[tuple[str, str, str], list[Triplet]] = {}
    for t in batch:
        groups.setdefault(t.key, []).append(t)
    return [_merge_group(groups[k]) for k in sorted(groups)]


@dataclass
class MergeDelta:
    added: list[str] = field(default_factory=list)
    merged: list[tuple[str, str]] = field(default_factory=list)
    provenance_extended: list[tuple[str, list[str]]] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.added or self.merged or self.provenance_extended)


def merge_update(store: KnowledgeGraph, batch: ExtractionBatch) -> MergeDelta:
    """Merge a canonicalized, deduped batch into the graph.

    New identity keys are added; existing keys gain the batch's section in
    their provenance (provenance only ever grows). Idempotent: re-merging the
    same batch yields an empty delta and leaves the store untouched.
    """
    delta = MergeDelta()
    for t in batch.triplets:
        key = t.key_str
        if key in store.triplets:
            if store.extend_provenance(key, batch.section_id):
                delta.provenance_extended.append((key, [batch.section_id]))
        else:
            store.add_triplet(t, batch.section_id)
            delta.added.append(key)
    delta.added.sort()
    delta.provenance_extended.sort()
    if not delta.is_empty():
        store.version += 1
    return delta


def apply_alias_table(store: KnowledgeGraph, aliases: AliasTable) -> MergeDelta:
    """Re-canonicalize every stored triplet under a (new) alias table.

    Keys that collapse together are merged; the delta's `merged` pairs map
    each vanished key to its survivor, and keys whose canonical form is new
    to the store are reported as added.
    """
    old_keys = sorted(store.triplets)
    rewritten: dict[str, list[tuple[str, Triplet]]] = {}
    for key in old_keys:
        new_triplet = canonicalize_triplet(store.triplets[key], aliases)
        rewritten.setdefault(new_triplet.key_str, []).append((key, new_triplet))

    delta = MergeDelta()
    changed = False
    new_triplets: dict[str, Triplet] = {}
    new_provenance: dict[str, set[str]] = {}
    for new_key in sorted(rewritten):
        sources = rewritten[new_key]
        merged_triplet = _merge_group([t for _, t in sources])
        provenance: set[str] = set()
        for old_key, _ in sources:
            provenance |= store.provenance[old_key]
        new_triplets[new_key] = merged_triplet
        new_provenance[new_key] = provenance
        old_of_new = [old for old, _ in sources]
        if new_key not in store.triplets:
            delta.added.append(new_key)
            changed = True
        for old_key in old_of_new:
            if old_key != new_key:
                delta.merged.append((old_key, new_key))
                changed = True

    if changed:
        store.triplets = new_triplets
        store.provenance = new_provenance
        store.entities = {t.subject for t in new_triplets.values()} | {
            t.object for t in new_triplets.values()
        }
        store.section_index = {}
        for key, sections in new_provenance.items():
            for sid in sections:
                store.section_index.setdefault(sid, set()).add(key)
        store.version += 1
    delta.added.sort()
    delta.merged.sort()
    return delta
