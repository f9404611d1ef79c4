"""Derived graph structure: section-level graph, connectivity stats, k-hop subgraphs."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .citations import entity_label_for, section_id_for
from .corpus import Section
from .errors import ConfigError, UnknownSeedError
from .extraction import Triplet
from .graph import KnowledgeGraph
from .normalize import canonical_surface
from .rng import XorShift64Star

EXACT_PATH_NODE_LIMIT = 2000
DEFAULT_PATH_SAMPLE = 1000
DEFAULT_SUBGRAPH_NODE_CAP = 200


@dataclass(frozen=True)
class EdgeLabel:
    rule: str  # "shared" | "linking" | "citation"
    key: Optional[str] = None


@dataclass
class SectionGraph:
    nodes: list[str]
    edges: dict[tuple[str, str], list[EdgeLabel]]
    mode: str  # "with_triplets" | "text_only"


@dataclass
class SubgraphNode:
    id: str
    kind: str  # "section" | "entity"


@dataclass
class Subgraph:
    nodes: list[SubgraphNode]
    edges: list[Triplet]
    seed_keys: list[str]
    hop_limit: int
    truncated: bool = False


@dataclass
class GraphStats:
    avg_degree: float
    component_count: int
    unconnected_sections: int
    avg_shortest_path: float
    avg_shortest_path_defined: bool = True
    sampled: bool = False

    def as_dict(self) -> dict:
        return {
            "avg_degree": self.avg_degree,
            "component_count": self.component_count,
            "unconnected_sections": self.unconnected_sections,
            "avg_shortest_path": self.avg_shortest_path,
            "avg_shortest_path_defined": self.avg_shortest_path_defined,
            "sampled": self.sampled,
        }


def section_label_map(sections: dict[str, Section]) -> dict[str, str]:
    """Canonical entity label -> section id, for resolving triplet endpoints."""
    out: dict[str, str] = {}
    for sid, section in sections.items():
        if section.ref is not None:
            out[canonical_surface(entity_label_for(section.ref))] = sid
        out.setdefault(canonical_surface(sid), sid)
    return out


def _add_edge(
    edges: dict[tuple[str, str], list[EdgeLabel]], a: str, b: str, label: EdgeLabel
) -> None:
    if a == b:
        return
    pair = (a, b) if a < b else (b, a)
    labels = edges.setdefault(pair, [])
    if label not in labels:
        labels.append(label)


def build_section_graph(
    g: KnowledgeGraph, mode: str, sections: dict[str, Section]
) -> SectionGraph:
    """Derive the graph over sections.

    with_triplets: sections are joined when they share a triplet (same identity
    key in both provenance sets) or when a triplet extracted from one has a
    subject/object resolving to the other (linking). text_only: sections are
    joined only by explicit citations found in their text.
    """
    if mode not in ("with_triplets", "text_only"):
        raise ConfigError(f"unknown section-graph mode '{mode}'")
    edges: dict[tuple[str, str], list[EdgeLabel]] = {}

    if mode == "with_triplets":
        labels = section_label_map(sections)
        for key in sorted(g.triplets):
            sources = sorted(s for s in g.provenance.get(key, set()) if s in sections)
            for i, a in enumerate(sources):
                for b in sources[i + 1 :]:
                    _add_edge(edges, a, b, EdgeLabel("shared", key))
            triplet = g.triplets[key]
            for endpoint in (triplet.subject, triplet.object):
                target = labels.get(canonical_surface(endpoint))
                if target is None:
                    continue
                for src in sources:
                    _add_edge(edges, src, target, EdgeLabel("linking", key))
    else:
        from .citations import extract_cross_references

        for sid in sorted(sections):
            for xref in extract_cross_references(sections[sid]):
                if xref.is_self:
                    continue
                target = section_id_for(xref.ref)
                if target in sections:
                    _add_edge(edges, sid, target, EdgeLabel("citation"))

    return SectionGraph(nodes=sorted(sections), edges=edges, mode=mode)


def _adjacency(sg: SectionGraph) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {n: set() for n in sg.nodes}
    for a, b in sg.edges:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def _bfs_distances(adj: dict[str, set[str]], start: str) -> dict[str, int]:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in adj[node]:
            if nxt not in dist:
                dist[nxt] = dist[node] + 1
                queue.append(nxt)
    return dist


def _components(adj: dict[str, set[str]]) -> dict[str, int]:
    comp: dict[str, int] = {}
    next_id = 0
    for node in sorted(adj):
        if node in comp:
            continue
        comp[node] = next_id
        queue = deque([node])
        while queue:
            cur = queue.popleft()
            for nxt in adj[cur]:
                if nxt not in comp:
                    comp[nxt] = next_id
                    queue.append(nxt)
        next_id += 1
    return comp


def graph_stats(
    sg: SectionGraph, path_sample: Optional[int] = None, seed: int = 0
) -> GraphStats:
    """Degree, component, isolation, and mean shortest-path statistics.

    The path average is over connected node pairs only (disconnected pairs are
    excluded, flagged via avg_shortest_path_defined when none exist). Exact
    all-pairs BFS up to 2000 nodes; beyond that a seeded sample of connected
    pairs is measured instead.
    """
    adj = _adjacency(sg)
    n = len(sg.nodes)
    if n == 0:
        return GraphStats(0.0, 0, 0, 0.0, avg_shortest_path_defined=False)
    avg_degree = 2 * len(sg.edges) / n
    comp = _components(adj)
    component_count = len(set(comp.values()))
    isolated = sum(1 for node in sg.nodes if not adj[node])

    nodes = sorted(sg.nodes)
    if n <= EXACT_PATH_NODE_LIMIT:
        total = 0
        pairs = 0
        for i, node in enumerate(nodes):
            dist = _bfs_distances(adj, node)
            for other, d in dist.items():
                if other > node:
                    total += d
                    pairs += 1
        if pairs == 0:
            return GraphStats(avg_degree, component_count, isolated, 0.0,
                              avg_shortest_path_defined=False)
        return GraphStats(avg_degree, component_count, isolated, total / pairs)

    sample = path_sample or DEFAULT_PATH_SAMPLE
    rng = XorShift64Star(seed)
    total = 0
    pairs = 0
    dist_cache: dict[str, dict[str, int]] = {}
    attempts = 0
    while pairs < sample and attempts < 50 * sample:
        attempts += 1
        a = nodes[rng.below(n)]
        b = nodes[rng.below(n)]
        if a == b or comp[a] != comp[b]:
            continue
        if a not in dist_cache:
            dist_cache[a] = _bfs_distances(adj, a)
        total += dist_cache[a][b]
        pairs += 1
    if pairs == 0:
        return GraphStats(avg_degree, component_count, isolated, 0.0,
                          avg_shortest_path_defined=False, sampled=True)
    return GraphStats(avg_degree, component_count, isolated, total / pairs, sampled=True)


def k_hop_subgraph(
    g: KnowledgeGraph,
    seeds: list[str],
    hops: int,
    node_cap: int = DEFAULT_SUBGRAPH_NODE_CAP,
    sections: Optional[dict[str, Section]] = None,
) -> Subgraph:
    """Neighborhood of the seed triplets over entity adjacency.

    BFS starts from the seed triplets' endpoints and collects every triplet
    whose endpoints both fall within `hops` of a seed endpoint. Expansion is
    level-by-level in sorted entity order, so the node cap truncates
    deterministically.
    """
    if not seeds:
        raise ConfigError("at least one seed triplet key is required")
    if not 0 <= hops <= 4:
        raise ConfigError(f"hops must be in [0, 4], got {hops}")
    unknown = sorted(k for k in seeds if k not in g.triplets)
    if unknown:
        raise UnknownSeedError(f"unknown seed keys: {unknown}")

    adj: dict[str, set[str]] = {}
    for triplet in g.triplets.values():
        adj.setdefault(triplet.subject, set()).add(triplet.object)
        adj.setdefault(triplet.object, set()).add(triplet.subject)

    frontier = sorted({e for k in seeds for e in (g.triplets[k].subject, g.triplets[k].object)})
    visited: set[str] = set()
    truncated = False
    for node in frontier:
        if len(visited) >= node_cap:
            truncated = True
            break
        visited.add(node)
    for _ in range(hops):
        if truncated:
            break
        nxt = sorted({n for cur in frontier for n in adj.get(cur, set())} - visited)
        if not nxt:
            break
        accepted = []
        for node in nxt:
            if len(visited) >= node_cap:
                truncated = True
                break
            visited.add(node)
            accepted.append(node)
        frontier = accepted

    edge_keys = set(seeds)
    for key in g.triplets:
        t = g.triplets[key]
        if t.subject in visited and t.object in visited:
            edge_keys.add(key)

    label_to_section = section_label_map(sections) if sections else {}
    nodes = [
        SubgraphNode(id=e, kind="section" if canonical_surface(e) in label_to_section else "entity")
        for e in sorted(visited)
    ]
    return Subgraph(
        nodes=nodes,
        edges=[g.triplets[k] for k in sorted(edge_keys)],
        seed_keys=sorted(seeds),
        hop_limit=hops,
        truncated=truncated,
    )
