"""Hierarchical citation parsing, rendering, and cross-reference scanning.

Recognized citation forms (case-sensitive, matching how regulations print them):
"§ 117.264", "§§ 117.257, 117.260", "Sec. 117.264", "Section 117.264",
"Part 117", "Part 117, Subpart E", "Subpart E of Part 117", "Chapter I",
"Subchapter B", "Subchapter B of Chapter I", "Title 21", and comma-joined
compounds such as "Chapter I, Subchapter B, Part 117".
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Optional

_ROMAN = r"[IVXLCDM]+"
_LETTER = r"[A-Z]{1,2}"
_SECTION_NUM = r"\d+\.\d+"

# Longest/most-specific alternatives first so compounds are consumed whole.
_UNIT_RE = re.compile(
    rf"(?P<ss_list>§§\s*{_SECTION_NUM}(?:\s*(?:,|;|&|\band\b|\bor\b|\bthrough\b)\s*{_SECTION_NUM})*)"
    rf"|(?P<section>(?:§|\bSecs?\.|\bSection)\s*(?P<section_num>{_SECTION_NUM}))(?:\([a-z0-9]+\))*"
    rf"|(?P<subpart_of_part>\bSubpart\s+(?P<sp1>{_LETTER})\s+of\s+Part\s+(?P<sp1_part>\d+)\b)"
    rf"|(?P<part_subpart>\bPart\s+(?P<sp2_part>\d+),\s*Subpart\s+(?P<sp2>{_LETTER})\b)"
    rf"|(?P<part>\bPart\s+(?P<part_num>\d+)\b)"
    rf"|(?P<subpart>\bSubpart\s+(?P<subpart_letter>{_LETTER})\b)"
    rf"|(?P<subchapter_of_chapter>\bSubchapter\s+(?P<sc1>{_LETTER})\s+of\s+Chapter\s+(?P<sc1_chap>{_ROMAN})\b)"
    rf"|(?P<subchapter>\bSubchapter\s+(?P<subchapter_letter>{_LETTER})\b)"
    rf"|(?P<chapter>\bChapter\s+(?P<chapter_roman>{_ROMAN})\b)"
    rf"|(?P<title>\bTitle\s+(?P<title_num>\d+)\b)"
)

_SECTION_ITEM_RE = re.compile(_SECTION_NUM)


@dataclass(frozen=True)
class SectionRef:
    """Reference into the regulatory hierarchy; at least one field populated.

    `section` is the "part.number" string (e.g. "117.257"); when present its
    part prefix must agree with `part`, and `part` is derived from the prefix
    if absent.
    """

    title: Optional[int] = None
    chapter: Optional[str] = None
    subchapter: Optional[str] = None
    part: Optional[int] = None
    subpart: Optional[str] = None
    section: Optional[str] = None

    def __post_init__(self) -> None:
        if not any(
            v is not None
            for v in (self.title, self.chapter, self.subchapter, self.part, self.subpart, self.section)
        ):
            raise ValueError("SectionRef requires at least one populated field")
        if self.section is not None:
            prefix = int(self.section.split(".", 1)[0])
            if self.part is None:
                object.__setattr__(self, "part", prefix)
            elif self.part != prefix:
                raise ValueError(
                    f"section '{self.section}' prefix conflicts with part {self.part}"
                )

    @property
    def kind(self) -> str:
        """Most specific populated level."""
        for name in ("section", "subpart", "part", "subchapter", "chapter", "title"):
            if getattr(self, name) is not None:
                return name
        raise AssertionError("unreachable: empty SectionRef")


def render_citation(ref: SectionRef) -> str:
    """Canonical citation text; parse_citation(render_citation(r)) == r."""
    pieces: list[str] = []
    if ref.title is not None:
        pieces.append(f"Title {ref.title}")
    if ref.chapter is not None:
        pieces.append(f"Chapter {ref.chapter}")
    if ref.subchapter is not None:
        pieces.append(f"Subchapter {ref.subchapter}")
    if ref.section is not None:
        pieces.append(f"§ {ref.section}")
    elif ref.part is not None and ref.subpart is not None:
        pieces.append(f"Part {ref.part}, Subpart {ref.subpart}")
    elif ref.part is not None:
        pieces.append(f"Part {ref.part}")
    elif ref.subpart is not None:
        pieces.append(f"Subpart {ref.subpart}")
    return ", ".join(pieces)


def section_id_for(ref: SectionRef) -> str:
    """Stable store id for the unit a ref points at (e.g. "117.257", "Part117/SubpartE")."""
    if ref.section is not None:
        return ref.section
    if ref.subpart is not None:
        if ref.part is not None:
            return f"Part{ref.part}/Subpart{ref.subpart}"
        return f"Subpart{ref.subpart}"
    if ref.part is not None:
        return f"Part{ref.part}"
    if ref.subchapter is not None:
        if ref.chapter is not None:
            return f"Chapter{ref.chapter}/Subchapter{ref.subchapter}"
        return f"Subchapter{ref.subchapter}"
    if ref.chapter is not None:
        return f"Chapter{ref.chapter}"
    return f"Title{ref.title}"


def entity_label_for(ref: SectionRef) -> str:
    """Graph entity surface form for the unit a ref points at (e.g. "§117.257")."""
    if ref.section is not None:
        return f"§{ref.section}"
    if ref.subpart is not None:
        if ref.part is not None:
            return f"Part {ref.part} Subpart {ref.subpart}"
        return f"Subpart {ref.subpart}"
    if ref.part is not None:
        return f"Part {ref.part}"
    if ref.subchapter is not None:
        return f"Subchapter {ref.subchapter}"
    if ref.chapter is not None:
        return f"Chapter {ref.chapter}"
    return f"Title {ref.title}"


def _ref_from_match(m: re.Match) -> list[tuple[SectionRef, int]]:
    """Expand one scanner match into (ref, offset) pairs; §§ lists yield one per item."""
    kind = m.lastgroup
    if m.group("ss_list"):
        out = []
        for i, item in enumerate(_SECTION_ITEM_RE.finditer(m.group("ss_list"))):
            offset = m.start() if i == 0 else m.start() + item.start()
            out.append((SectionRef(section=item.group()), offset))
        return out
    if m.group("section"):
        return [(SectionRef(section=m.group("section_num")), m.start())]
    if m.group("subpart_of_part"):
        return [(SectionRef(part=int(m.group("sp1_part")), subpart=m.group("sp1")), m.start())]
    if m.group("part_subpart"):
        return [(SectionRef(part=int(m.group("sp2_part")), subpart=m.group("sp2")), m.start())]
    if m.group("part"):
        return [(SectionRef(part=int(m.group("part_num"))), m.start())]
    if m.group("subpart"):
        return [(SectionRef(subpart=m.group("subpart_letter")), m.start())]
    if m.group("subchapter_of_chapter"):
        return [(SectionRef(chapter=m.group("sc1_chap"), subchapter=m.group("sc1")), m.start())]
    if m.group("subchapter"):
        return [(SectionRef(subchapter=m.group("subchapter_letter")), m.start())]
    if m.group("chapter"):
        return [(SectionRef(chapter=m.group("chapter_roman")), m.start())]
    if m.group("title"):
        return [(SectionRef(title=int(m.group("title_num"))), m.start())]
    raise AssertionError(f"unhandled citation match kind {kind!r}")


def scan_citations(text: str) -> Iterator[tuple[SectionRef, int]]:
    """All citation occurrences in document order with character offsets."""
    for m in _UNIT_RE.finditer(text):
        yield from _ref_from_match(m)


def parse_citation(text: str) -> Optional[SectionRef]:
    """Parse a citation string into the most specific single SectionRef.

    Compound strings accumulate fields ("Chapter I, Subchapter B, Part 117");
    for each field the first occurrence wins, so a "§§" list resolves to its
    first item (use parse_citation_list for all of them). Unrecognized text is
    a no-match (None), not an error.
    """
    fields: dict[str, object] = {}
    for ref, _ in scan_citations(text):
        for name in ("title", "chapter", "subchapter", "part", "subpart", "section"):
            value = getattr(ref, name)
            if value is not None and name not in fields:
                fields[name] = value
    if not fields:
        return None
    return SectionRef(**fields)  # type: ignore[arg-type]


def parse_citation_list(text: str) -> list[SectionRef]:
    """Every citation occurrence in the string, in document order."""
    return [ref for ref, _ in scan_citations(text)]


@dataclass(frozen=True)
class CrossReference:
    ref: SectionRef
    offset: int
    is_self: bool = False


def extract_cross_references(section) -> list[CrossReference]:
    """Each citation occurrence in section.text, in order, with its offset.

    Self-references (resolving to the section's own id) are included and
    flagged so downstream relation extraction can skip them.
    """
    if not section.text:
        raise ValueError("section.text must be non-empty")
    out = []
    for ref, offset in scan_citations(section.text):
        out.append(
            CrossReference(ref=ref, offset=offset, is_self=section_id_for(ref) == section.id)
        )
    return out
