"""Citation parsing, rendering round-trips, and cross-reference scanning."""
from __future__ import annotations

import pytest
from hypothesis import assume, given, strategies as st

from regkg.citations import (
    SectionRef,
    extract_cross_references,
    parse_citation,
    parse_citation_list,
    render_citation,
    section_id_for,
)
from regkg.corpus import Section


def test_parse_single_section():
    ref = parse_citation("§ 117.264")
    assert ref == SectionRef(part=117, section="117.264")


def test_parse_chapter():
    assert parse_citation("Chapter I") == SectionRef(chapter="I")


def test_parse_non_citation_is_no_match():
    assert parse_citation("the previous paragraph") is None
    assert parse_citation("") is None


def test_parse_subpart_of_part():
    ref = parse_citation("Subpart E of Part 117")
    assert ref == SectionRef(part=117, subpart="E")


def test_parse_compound_accumulates_fields():
    ref = parse_citation("Chapter I, Subchapter B, Part 117")
    assert ref == SectionRef(chapter="I", subchapter="B", part=117)


def test_parse_list_returns_each_item():
    refs = parse_citation_list("§§ 117.257, 117.260")
    assert [r.section for r in refs] == ["117.257", "117.260"]


def test_parse_citation_on_list_returns_first_most_specific():
    ref = parse_citation("§§ 117.257, 117.260")
    assert ref.section == "117.257"


def test_sec_dot_form():
    assert parse_citation("Sec. 117.264").section == "117.264"
    assert parse_citation("Section 117.264").section == "117.264"


def test_section_part_prefix_conflict_rejected():
    with pytest.raises(ValueError):
        SectionRef(part=118, section="117.264")


def test_empty_ref_rejected():
    with pytest.raises(ValueError):
        SectionRef()


def test_section_ids():
    assert section_id_for(SectionRef(section="117.257")) == "117.257"
    assert section_id_for(SectionRef(part=117, subpart="E")) == "Part117/SubpartE"
    assert section_id_for(SectionRef(part=117)) == "Part117"
    assert section_id_for(SectionRef(chapter="I")) == "ChapterI"
    assert section_id_for(SectionRef(chapter="I", subchapter="B")) == "ChapterI/SubchapterB"


@given(
    title=st.one_of(st.none(), st.integers(min_value=1, max_value=50)),
    chapter=st.one_of(st.none(), st.sampled_from(["I", "II", "III", "IX", "XL"])),
    subchapter=st.one_of(st.none(), st.sampled_from(["A", "B", "L", "AB"])),
    part=st.one_of(st.none(), st.integers(min_value=1, max_value=9999)),
    subpart=st.one_of(st.none(), st.sampled_from(["A", "E", "M", "ZZ"])),
)
def test_render_parse_round_trip(title, chapter, subchapter, part, subpart):
    assume(any(v is not None for v in (title, chapter, subchapter, part, subpart)))
    ref = SectionRef(title=title, chapter=chapter, subchapter=subchapter, part=part, subpart=subpart)
    assert parse_citation(render_citation(ref)) == ref


@given(st.integers(min_value=1, max_value=999), st.integers(min_value=1, max_value=999))
def test_render_parse_round_trip_sections(part, num):
    ref = SectionRef(part=part, section=f"{part}.{num}")
    assert parse_citation(render_citation(ref)) == ref


def _section(text: str, sid: str = "117.257") -> Section:
    return Section(id=sid, ref=parse_citation(f"§ {sid}"), heading="", text=text)


def test_xref_offset_points_at_marker():
    text = "Reinstated as provided in § 117.264, unless stated otherwise."
    xrefs = extract_cross_references(_section(text))
    assert len(xrefs) == 1
    assert xrefs[0].offset == text.index("§")
    assert xrefs[0].ref.section == "117.264"
    assert not xrefs[0].is_self


def test_xref_no_matches_is_empty():
    assert extract_cross_references(_section("No citations appear here.")) == []


def test_xref_list_two_refs_in_order():
    text = "See §§ 117.264 and 117.267 for appeal procedures."
    xrefs = extract_cross_references(_section(text))
    assert [x.ref.section for x in xrefs] == ["117.264", "117.267"]
    assert xrefs[0].offset < xrefs[1].offset
    assert xrefs[0].offset == text.index("§§")


def test_xref_self_reference_flagged():
    xrefs = extract_cross_references(_section("Refer back to § 117.257 as needed."))
    assert len(xrefs) == 1 and xrefs[0].is_self


def test_xref_document_order():
    text = "Part 117 governs; see § 117.264 and then Subpart E of Part 117."
    offsets = [x.offset for x in extract_cross_references(_section(text))]
    assert offsets == sorted(offsets)
