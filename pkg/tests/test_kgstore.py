"""Section graph derivation, connectivity stats vs a BFS oracle, k-hop
subgraphs, and store persistence round-trips."""
from __future__ import annotations

import random
from collections import deque

import pytest

from regkg.corpus import Section
from regkg.errors import ConfigError, CorruptStoreError, StoreVersionError, UnknownSectionError, UnknownSeedError
from regkg.extraction import Triplet
from regkg.graph import KnowledgeGraph, audit, triplets_of_section
from regkg.kgstore import (
    EdgeLabel,
    SectionGraph,
    build_section_graph,
    graph_stats,
    k_hop_subgraph,
)
from regkg.normalize import canonicalize_batch, merge_update
from regkg.extraction import ExtractionBatch
from regkg.store import RegStore

REF_257_264 = "§117.257|references|§117.264"
REF_260_267 = "§117.260|references|§117.267"
REF_267_264 = "§117.267|references|§117.264"


class TestTripletsOfSection:
    def test_fixture_257(self, store):
        out = triplets_of_section(store.graph, "117.257", store.sections_by_id)
        assert {t.predicate for t in out} == {"inSubpart", "references"}
        assert len(out) == 2

    def test_section_without_extractions_is_empty(self, store):
        g = store.graph
        known = set(store.sections_by_id) | {"doc1#p1"}
        assert triplets_of_section(g, "doc1#p1", known) == []

    def test_unknown_section_raises(self, store):
        with pytest.raises(UnknownSectionError):
            triplets_of_section(store.graph, "999.999", store.sections_by_id)

    def test_multi_provenance_sum_exceeds_triplet_count(self):
        g = KnowledgeGraph()
        batch = canonicalize_batch(
            ExtractionBatch("sec1", [Triplet("a", "relatesTo", "b")])
        )
        merge_update(g, batch)
        merge_update(g, canonicalize_batch(ExtractionBatch("sec2", [Triplet("a", "relatesTo", "b")])))
        total = sum(len(g.triplets_of(s)) for s in g.section_index)
        assert total > len(g.triplets)  # oracle: direct count over the two-section store


class TestSectionGraph:
    def test_fixture_reference_edge(self, store):
        sg = build_section_graph(store.graph, "with_triplets", store.sections_by_id)
        assert ("117.257", "117.264") in sg.edges
        labels = sg.edges[("117.257", "117.264")]
        assert EdgeLabel("linking", REF_257_264) in labels

    def test_single_section_graph(self):
        section = Section(id="solo#p1", ref=None, heading="", text="alone")
        g = KnowledgeGraph()
        sg = build_section_graph(g, "with_triplets", {"solo#p1": section})
        assert sg.nodes == ["solo#p1"] and sg.edges == {}

    def test_with_triplets_superset_of_text_only(self, store):
        with_graph = build_section_graph(store.graph, "with_triplets", store.sections_by_id)
        text_graph = build_section_graph(store.graph, "text_only", store.sections_by_id)
        assert set(text_graph.edges) <= set(with_graph.edges)

    def test_no_self_loops(self, store):
        for mode in ("with_triplets", "text_only"):
            sg = build_section_graph(store.graph, mode, store.sections_by_id)
            assert all(a != b for a, b in sg.edges)

    def test_with_triplets_labels_nonempty(self, store):
        sg = build_section_graph(store.graph, "with_triplets", store.sections_by_id)
        assert all(sg.edges[pair] for pair in sg.edges)

    def test_shared_triplet_edge(self):
        g = KnowledgeGraph()
        merge_update(g, canonicalize_batch(ExtractionBatch("a#p1", [Triplet("x", "relatesTo", "y")])))
        merge_update(g, canonicalize_batch(ExtractionBatch("b#p1", [Triplet("x", "relatesTo", "y")])))
        sections = {
            "a#p1": Section(id="a#p1", ref=None, heading="", text="x"),
            "b#p1": Section(id="b#p1", ref=None, heading="", text="y"),
        }
        sg = build_section_graph(g, "with_triplets", sections)
        assert ("a#p1", "b#p1") in sg.edges
        assert EdgeLabel("shared", "x|relatesTo|y") in sg.edges[("a#p1", "b#p1")]

    def test_unknown_mode(self, store):
        with pytest.raises(ConfigError):
            build_section_graph(store.graph, "sideways", store.sections_by_id)


def _fake_graph(nodes: list[str], edges: list[tuple[str, str]]) -> SectionGraph:
    return SectionGraph(
        nodes=list(nodes),
        edges={(min(a, b), max(a, b)): [EdgeLabel("citation")] for a, b in edges},
        mode="text_only",
    )


def _oracle_stats(nodes: list[str], edges: list[tuple[str, str]]):
    """Independent all-pairs BFS over an adjacency-list representation."""
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    seen = set()
    for a, b in edges:
        pair = (min(a, b), max(a, b))
        if pair in seen or a == b:
            continue
        seen.add(pair)
        adj[a].append(b)
        adj[b].append(a)
    degree_sum = sum(len(v) for v in adj.values())
    avg_degree = degree_sum / len(nodes) if nodes else 0.0
    isolated = sum(1 for n in nodes if not adj[n])

    comp_of: dict[str, int] = {}
    comp = 0
    for n in nodes:
        if n in comp_of:
            continue
        queue = deque([n])
        comp_of[n] = comp
        while queue:
            cur = queue.popleft()
            for nxt in adj[cur]:
                if nxt not in comp_of:
                    comp_of[nxt] = comp
                    queue.append(nxt)
        comp += 1

    total = 0
    pairs = 0
    for i, src in enumerate(nodes):
        dist = {src: 0}
        queue = deque([src])
        while queue:
            cur = queue.popleft()
            for nxt in adj[cur]:
                if nxt not in dist:
                    dist[nxt] = dist[cur] + 1
                    queue.append(nxt)
        for other in nodes[i + 1 :]:
            if other in dist:
                total += dist[other]
                pairs += 1
    avg_path = total / pairs if pairs else 0.0
    return avg_degree, comp, isolated, avg_path, pairs > 0


class TestGraphStats:
    def test_path_graph_closed_form(self):
        sg = _fake_graph(["A", "B", "C"], [("A", "B"), ("B", "C")])
        stats = graph_stats(sg)
        assert stats.avg_degree == pytest.approx(4 / 3)
        assert stats.avg_shortest_path == pytest.approx(4 / 3)
        assert stats.component_count == 1
        assert stats.unconnected_sections == 0

    def test_two_isolated_nodes(self):
        stats = graph_stats(_fake_graph(["A", "B"], []))
        assert stats.unconnected_sections == 2
        assert stats.avg_shortest_path == 0.0
        assert not stats.avg_shortest_path_defined

    def test_empty_graph(self):
        stats = graph_stats(_fake_graph([], []))
        assert stats.avg_degree == 0.0 and stats.component_count == 0

    def test_random_graphs_match_oracle(self):
        rng = random.Random(7)
        for _ in range(40):
            n = rng.randint(1, 60)
            nodes = [f"n{i}" for i in range(n)]
            edges = [
                (nodes[rng.randrange(n)], nodes[rng.randrange(n)])
                for _ in range(rng.randint(0, 2 * n))
            ]
            edges = [(a, b) for a, b in edges if a != b]
            stats = graph_stats(_fake_graph(nodes, edges))
            deg, comp, isolated, path, defined = _oracle_stats(nodes, edges)
            assert stats.avg_degree == deg
            assert stats.component_count == comp
            assert stats.unconnected_sections == isolated
            assert stats.avg_shortest_path == path
            assert stats.avg_shortest_path_defined == defined

    def test_sampled_mode_deterministic(self):
        rng = random.Random(3)
        n = 2500
        nodes = [f"n{i}" for i in range(n)]
        edges = [(f"n{i}", f"n{(i + 1) % n}") for i in range(n)]
        edges += [
            (nodes[rng.randrange(n)], nodes[rng.randrange(n)]) for _ in range(500)
        ]
        edges = [(a, b) for a, b in edges if a != b]
        sg = _fake_graph(nodes, edges)
        first = graph_stats(sg, path_sample=200, seed=11)
        second = graph_stats(sg, path_sample=200, seed=11)
        assert first == second
        assert first.sampled


class TestKHopSubgraph:
    def test_hop1_reaches_timeframe(self, store):
        sub = k_hop_subgraph(store.graph, [REF_257_264], 1, sections=store.sections_by_id)
        assert any(t.predicate == "hasTimeframe" for t in sub.edges)

    def test_hop0_exactly_seeds(self, store):
        sub = k_hop_subgraph(store.graph, [REF_257_264], 0, sections=store.sections_by_id)
        assert [t.key_str for t in sub.edges] == [REF_257_264]
        assert {n.id for n in sub.nodes} == {"§117.257", "§117.264"}

    @pytest.mark.parametrize("seed", [REF_257_264, REF_260_267, REF_267_264])
    def test_hop2_converges_on_all_sections(self, store, seed):
        sub = k_hop_subgraph(store.graph, [seed], 2, sections=store.sections_by_id)
        ids = {n.id for n in sub.nodes}
        assert {"§117.257", "§117.260", "§117.264", "§117.267"} <= ids

    def test_monotonicity_in_hops(self, store):
        previous: set[str] = set()
        for hops in range(0, 4):
            sub = k_hop_subgraph(store.graph, [REF_260_267], hops, sections=store.sections_by_id)
            nodes = {n.id for n in sub.nodes}
            assert previous <= nodes
            previous = nodes

    def test_unknown_seed_listed(self, store):
        with pytest.raises(UnknownSeedError) as err:
            k_hop_subgraph(store.graph, ["a|b|c"], 1)
        assert "a|b|c" in str(err.value)

    def test_hops_out_of_range(self, store):
        with pytest.raises(ConfigError):
            k_hop_subgraph(store.graph, [REF_257_264], 5)

    def test_empty_seeds(self, store):
        with pytest.raises(ConfigError):
            k_hop_subgraph(store.graph, [], 1)

    def test_node_cap_truncates(self, store):
        sub = k_hop_subgraph(store.graph, [REF_257_264], 2, node_cap=3,
                             sections=store.sections_by_id)
        assert sub.truncated
        assert len(sub.nodes) <= 3

    def test_node_kinds(self, store):
        sub = k_hop_subgraph(store.graph, [REF_267_264], 1, sections=store.sections_by_id)
        kinds = {n.id: n.kind for n in sub.nodes}
        assert kinds["§117.264"] == "section"
        assert kinds["15 days to appeal the order"] == "entity"


class TestPersistence:
    def test_empty_graph_round_trip(self, tmp_path, fixture_lines):
        from regkg.corpus import build_manifest, corpus_fingerprint, segment_corpus

        sections = segment_corpus(fixture_lines)
        store = RegStore(tmp_path / "s")
        store.init_corpus(sections, build_manifest(sections, corpus_fingerprint(fixture_lines)))
        loaded = RegStore.load(tmp_path / "s")
        assert loaded.graph == store.graph
        assert loaded.sections == store.sections

    def test_fixture_round_trip_byte_identical(self, store):
        loaded = RegStore.load(store.path)
        assert loaded.graph == store.graph
        before = {p.name: p.read_bytes() for p in store.path.iterdir() if p.is_file()}
        loaded.save_graph()
        after = {p.name: p.read_bytes() for p in store.path.iterdir() if p.is_file()}
        assert before == after

    def test_tampered_byte_detected(self, store):
        path = store.path / "triplets.jsonl"
        data = path.read_bytes()
        path.write_bytes(data[:-5] + b"X" + data[-4:])
        with pytest.raises(CorruptStoreError):
            RegStore.load(store.path)

    def test_version_mismatch_requires_upgrade(self, store):
        manifest = store.path / "manifest.json"
        manifest.write_text(manifest.read_text().replace('"format_version":1', '"format_version":99'))
        with pytest.raises(StoreVersionError):
            RegStore.load(store.path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(CorruptStoreError):
            RegStore.load(tmp_path / "nowhere")

    def test_audit_clean_after_build(self, store):
        assert audit(store.graph) == []
