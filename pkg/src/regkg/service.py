"""HTTP service over a built store: query answering, subgraphs, sections, stats.

The service reads one immutable LoadedStore; POST /admin/reload swaps in a
freshly loaded snapshot atomically. Every response carries the
snapshot_version it was served from. If REGKG_API_TOKEN is set, all endpoints
except /healthz require `Authorization: Bearer <token>`.
"""
from __future__ import annotations

import os
import threading
from typing import Optional
from urllib.parse import urlencode

from fastapi import Depends, FastAPI, HTTPException, Query, Request

from .errors import ConfigError, RegkgError, UnknownSeedError
from .extraction import Triplet
from .kgstore import Subgraph, build_section_graph, graph_stats, k_hop_subgraph
from .pipeline import LoadedStore, QueryOptions, run_query_pipeline

ENV_API_TOKEN = "REGKG_API_TOKEN"

_STATS_MODES = {"with": "with_triplets", "without": "text_only"}


class ServiceState:
    def __init__(self, store_dir: str):
        self.store_dir = store_dir
        self._lock = threading.Lock()
        self._loaded = LoadedStore.open(store_dir)

    @property
    def loaded(self) -> LoadedStore:
        with self._lock:
            return self._loaded

    def reload(self) -> int:
        fresh = LoadedStore.open(self.store_dir)
        with self._lock:
            self._loaded = fresh
        return fresh.snapshot.graph_version


def _triplet_payload(t: Triplet, score: Optional[float], sections: list[str]) -> dict:
    payload = {
        "key": t.key_str,
        "s": t.subject,
        "p": t.predicate,
        "o": t.object,
        "qualifiers": t.qualifiers,
        "confidence": t.confidence,
        "extractor": t.extractor,
        "sections": sections,
    }
    if score is not None:
        payload["score"] = score
    return payload


def _subgraph_payload(sub: Subgraph, loaded: LoadedStore) -> dict:
    provenance = loaded.store.graph.provenance
    return {
        "nodes": [{"id": n.id, "kind": n.kind} for n in sub.nodes],
        "edges": [
            _triplet_payload(t, None, sorted(provenance.get(t.key_str, set())))
            for t in sub.edges
        ],
        "seed_keys": sub.seed_keys,
        "hop_limit": sub.hop_limit,
        "truncated": sub.truncated,
    }


def create_app(store_dir: str) -> FastAPI:
    state = ServiceState(store_dir)
    app = FastAPI(title="regkg", version="0.1.0")
    app.state.service = state

    async def check_token(request: Request) -> None:
        token = os.environ.get(ENV_API_TOKEN)
        if not token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="invalid or missing API token")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "snapshot_version": state.loaded.snapshot.graph_version}

    @app.post("/query", dependencies=[Depends(check_token)])
    def query(body: dict) -> dict:
        question = (body or {}).get("question", "")
        if not isinstance(question, str) or not question.strip():
            raise HTTPException(status_code=422, detail="field 'question' is required")
        k = body.get("k", 5)
        hops = body.get("hops", 1)
        mode = body.get("mode", "extractive")
        if mode not in ("extractive", "generated"):
            raise HTTPException(status_code=422, detail=f"unknown mode '{mode}'")
        loaded = state.loaded
        try:
            options = QueryOptions(k=int(k), mode=mode, hops=int(hops))
            answer, subgraph = run_query_pipeline(question, loaded, options)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except RegkgError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        provenance = loaded.store.graph.provenance
        bundle = answer.bundle_ref
        seeds = [t.key_str for t, _ in bundle.top_triplets]
        subgraph_ref = ""
        if seeds:
            params = [("seed", s) for s in seeds] + [("hops", "1")]
            subgraph_ref = f"/subgraph?{urlencode(params)}"
        return {
            "answer": answer.text,
            "mode": answer.mode,
            "degraded": answer.degraded,
            "citations": answer.citations,
            "triplets": [
                _triplet_payload(t, score, sorted(provenance.get(t.key_str, set())))
                for t, score in bundle.top_triplets
            ],
            "evidence": [s.id for s in bundle.evidence_sections],
            "subgraph": _subgraph_payload(subgraph, loaded),
            "subgraph_ref": subgraph_ref,
            "snapshot_version": loaded.snapshot.graph_version,
        }

    @app.get("/subgraph", dependencies=[Depends(check_token)])
    def subgraph(
        seed: list[str] = Query(default=[]), hops: int = Query(default=1)
    ) -> dict:
        loaded = state.loaded
        try:
            sub = k_hop_subgraph(
                loaded.store.graph, seed, hops, sections=loaded.store.sections_by_id
            )
        except (UnknownSeedError, ConfigError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        payload = _subgraph_payload(sub, loaded)
        payload["snapshot_version"] = loaded.snapshot.graph_version
        return payload

    @app.get("/section/{section_id:path}", dependencies=[Depends(check_token)])
    def section(section_id: str) -> dict:
        loaded = state.loaded
        sec = loaded.store.sections_by_id.get(section_id)
        if sec is None:
            raise HTTPException(status_code=404, detail=f"unknown section id '{section_id}'")
        return {
            "id": sec.id,
            "heading": sec.heading,
            "text": sec.text,
            "parent_id": sec.parent_id,
            "metadata": sec.metadata,
            "snapshot_version": loaded.snapshot.graph_version,
        }

    @app.get("/stats", dependencies=[Depends(check_token)])
    def stats(mode: str = Query(default="with")) -> dict:
        if mode not in _STATS_MODES:
            raise HTTPException(status_code=422, detail=f"mode must be one of {sorted(_STATS_MODES)}")
        loaded = state.loaded
        sg = build_section_graph(
            loaded.store.graph, _STATS_MODES[mode], loaded.store.sections_by_id
        )
        payload = graph_stats(sg).as_dict()
        payload["mode"] = mode
        payload["snapshot_version"] = loaded.snapshot.graph_version
        return payload

    @app.post("/admin/reload", dependencies=[Depends(check_token)])
    def reload() -> dict:
        try:
            version = state.reload()
        except RegkgError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        return {"status": "reloaded", "snapshot_version": version}

    return app


def serve(store_dir: str, host: str = "127.0.0.1", port: int = 8899) -> None:
    import uvicorn

    uvicorn.run(create_app(store_dir), host=host, port=port, log_level="warning")
