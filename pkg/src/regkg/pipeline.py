"""Staged build and query pipelines with resumable checkpoints.

The build pipeline runs ingest -> extract -> normalize -> index. Each stage
checkpoints its status into job.json next to the store; re-running resumes at
the first stage that is not done. The job file carries wall-clock timestamps
and is control state only — the store and index files themselves stay
byte-deterministic for identical inputs.
"""
from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import yaml

from .corpus import build_manifest, corpus_fingerprint, segment_corpus
from .embedding import DEFAULT_DIM, EmbeddingBackend, get_backend
from .errors import ConfigError, IndexNotBuiltError, RegkgError
from .extraction import ExtractionConfig, extract_all
from .graph import audit
from .index import IndexSnapshot, index_build, load_snapshot, save_snapshot, snapshot_exists
from .kgstore import Subgraph, k_hop_subgraph
from .llm import DiskCachedClient, HttpCompletionClient
from .normalize import AliasTable, apply_alias_table, canonicalize_batch, merge_update
from .qa import DEFAULT_K, Answer, answer_extractive, generate_answer, retrieve
from .store import RegStore
from .util import atomic_write_text, canonical_json

BUILD_STAGES = ("ingest", "extract", "normalize", "index")
_JOB_FILE = "job.json"
INDEX_DIR = "index"


@dataclass
class StageState:
    name: str
    status: str = "pending"  # pending | running | done | failed
    started: Optional[float] = None
    finished: Optional[float] = None
    counters: dict[str, int] = field(default_factory=dict)
    error: Optional[str] = None


@dataclass
class PipelineJob:
    job_id: str
    store_path: str
    stages: list[StageState]

    def stage(self, name: str) -> StageState:
        for st in self.stages:
            if st.name == name:
                return st
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "store_path": self.store_path,
            "stages": [
                {
                    "name": s.name,
                    "status": s.status,
                    "started": s.started,
                    "finished": s.finished,
                    "counters": s.counters,
                    "error": s.error,
                }
                for s in self.stages
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineJob":
        return cls(
            job_id=data["job_id"],
            store_path=data["store_path"],
            stages=[
                StageState(
                    name=s["name"],
                    status=s["status"],
                    started=s.get("started"),
                    finished=s.get("finished"),
                    counters=dict(s.get("counters", {})),
                    error=s.get("error"),
                )
                for s in data["stages"]
            ],
        )


def load_job(store_dir: Path | str) -> Optional[PipelineJob]:
    path = Path(store_dir) / _JOB_FILE
    if not path.exists():
        return None
    return PipelineJob.from_dict(json.loads(path.read_text(encoding="utf-8")))


def _save_job(job: PipelineJob) -> None:
    atomic_write_text(Path(job.store_path) / _JOB_FILE, canonical_json(job.to_dict()) + "\n")


def _fresh_job(store_dir: Path | str) -> PipelineJob:
    return PipelineJob(
        job_id=uuid.uuid4().hex[:12],
        store_path=str(store_dir),
        stages=[StageState(name=name) for name in BUILD_STAGES],
    )


@dataclass
class BuildConfig:
    corpus_path: Path | str
    store_dir: Path | str
    extractors: tuple[str, ...] = ("structural", "reference", "timeframe")
    aliases_path: Optional[Path | str] = None
    backend_name: str = "baseline"
    dim: int = DEFAULT_DIM
    ingest_timestamp: Optional[str] = None
    llm_client: object = None
    llm_required: bool = False


def _stage_ingest(config: BuildConfig, stage: StageState) -> None:
    if not str(config.corpus_path):
        raise ConfigError("corpus path required (ingest has not run for this store)")
    lines = Path(config.corpus_path).read_text(encoding="utf-8").splitlines()
    sections = segment_corpus(lines)
    manifest = build_manifest(sections, corpus_fingerprint(lines), config.ingest_timestamp)
    store = RegStore(config.store_dir)
    store.init_corpus(sections, manifest)
    stage.counters["sections"] = len(sections)


def _stage_extract(config: BuildConfig, stage: StageState) -> None:
    store = RegStore.load(config.store_dir)
    by_id = store.sections_by_id
    extraction = ExtractionConfig(extractors=config.extractors, llm_required=config.llm_required)
    client = config.llm_client
    if "llm" in config.extractors and client is None:
        client = DiskCachedClient(HttpCompletionClient(), Path(config.store_dir) / "llm-cache")
    counters: dict[str, int] = {}
    batches = [
        extract_all(section, extraction, by_id, client=client, counters=counters)
        for section in store.sections
    ]
    store.write_batches(batches)
    stage.counters["batches"] = len(batches)
    stage.counters["raw_triplets"] = sum(len(b.triplets) for b in batches)
    stage.counters.update(counters)


def _stage_normalize(config: BuildConfig, stage: StageState) -> None:
    store = RegStore.load(config.store_dir)
    aliases = AliasTable.load(config.aliases_path) if config.aliases_path else AliasTable.empty()
    events: list[dict] = []
    added = 0
    extended = 0
    for batch in store.read_batches():
        delta = merge_update(store.graph, canonicalize_batch(batch, aliases))
        added += len(delta.added)
        extended += len(delta.provenance_extended)
        if not delta.is_empty():
            events.append(
                {
                    "event": "merge",
                    "section_id": batch.section_id,
                    "added": delta.added,
                    "provenance_extended": [[k, ids] for k, ids in delta.provenance_extended],
                    "version": store.graph.version,
                }
            )
    problems = audit(store.graph)
    if problems:
        raise RegkgError(f"graph audit failed after merge: {problems[:3]}")
    store.alias_version = aliases.version
    store.save_graph(events)
    stage.counters["triplets_added"] = added
    stage.counters["provenance_extended"] = extended
    stage.counters["triplets"] = store.graph.triplet_count()


def _stage_index(config: BuildConfig, stage: StageState) -> None:
    store = RegStore.load(config.store_dir)
    backend = get_backend(config.backend_name, dim=config.dim)
    snapshot = index_build(store.graph, backend)
    save_snapshot(snapshot, Path(config.store_dir) / INDEX_DIR)
    stage.counters["vectors"] = snapshot.size()


_STAGE_RUNNERS: dict[str, Callable[[BuildConfig, StageState], None]] = {
    "ingest": _stage_ingest,
    "extract": _stage_extract,
    "normalize": _stage_normalize,
    "index": _stage_index,
}


def run_build_pipeline(config: BuildConfig, only: Optional[str] = None, force: bool = False) -> PipelineJob:
    """Run (or resume) the build stages in order.

    A done stage is never re-executed unless force is set; a failed stage
    leaves later stages pending. `only` runs the pipeline up to and including
    the named stage.
    """
    store_dir = Path(config.store_dir)
    store_dir.mkdir(parents=True, exist_ok=True)
    job = load_job(store_dir)
    if job is None or force:
        job = _fresh_job(store_dir)

    wanted = BUILD_STAGES
    if only is not None:
        if only not in BUILD_STAGES:
            raise ConfigError(f"unknown stage '{only}'")
        wanted = BUILD_STAGES[: BUILD_STAGES.index(only) + 1]

    for name in wanted:
        stage = job.stage(name)
        if stage.status == "done":
            continue
        stage.status = "running"
        stage.started = time.time()
        stage.error = None
        _save_job(job)
        try:
            _STAGE_RUNNERS[name](config, stage)
        except Exception as exc:
            stage.status = "failed"
            stage.finished = time.time()
            stage.error = str(exc)
            _save_job(job)
            raise
        stage.status = "done"
        stage.finished = time.time()
        _save_job(job)
    return job


def apply_aliases(store_dir: Path | str, aliases_path: Path | str) -> dict:
    """Re-canonicalize an already-built graph under a new alias table."""
    store = RegStore.load(store_dir)
    aliases = AliasTable.load(aliases_path)
    delta = apply_alias_table(store.graph, aliases)
    store.alias_version = aliases.version
    events = []
    if not delta.is_empty():
        events.append(
            {
                "event": "recanonicalize",
                "alias_version": aliases.version,
                "added": delta.added,
                "merged": [[a, b] for a, b in delta.merged],
                "version": store.graph.version,
            }
        )
    store.save_graph(events)
    return {"added": delta.added, "merged": delta.merged}


@dataclass
class QueryOptions:
    k: int = DEFAULT_K
    mode: str = "extractive"  # or "generated"
    hops: int = 1
    generator_client: object = None


@dataclass
class LoadedStore:
    """Everything the query path needs, loaded once and treated as immutable."""

    store: RegStore
    snapshot: IndexSnapshot
    backend: EmbeddingBackend

    @classmethod
    def open(cls, store_dir: Path | str) -> "LoadedStore":
        store = RegStore.load(store_dir)
        index_dir = Path(store_dir) / INDEX_DIR
        if not snapshot_exists(index_dir):
            raise IndexNotBuiltError(f"index not built under {store_dir}")
        snapshot = load_snapshot(index_dir)
        if snapshot.embedder_id.startswith("hashed-fnv1a64-v1-d"):
            backend = get_backend("baseline", dim=snapshot.dim)
        else:
            backend = get_backend("external", dim=snapshot.dim)
        return cls(store=store, snapshot=snapshot, backend=backend)


def run_query_pipeline(
    question: str, loaded: LoadedStore, options: Optional[QueryOptions] = None
) -> tuple[Answer, Subgraph]:
    """retrieve -> story/answer -> neighborhood subgraph of the hit triplets."""
    options = options or QueryOptions()
    sections = loaded.store.sections_by_id
    bundle = retrieve(
        question, options.k, loaded.snapshot, sections, loaded.backend, loaded.store.graph.triplets
    )
    if options.mode == "generated":
        if options.generator_client is None:
            raise ConfigError("generated mode requires a generator client")
        answer = generate_answer(question, bundle, options.generator_client, loaded.backend)
    else:
        answer = answer_extractive(question, bundle, loaded.backend)
    seeds = [t.key_str for t, _ in bundle.top_triplets]
    if seeds:
        subgraph = k_hop_subgraph(
            loaded.store.graph, seeds, options.hops, sections=sections
        )
    else:
        subgraph = Subgraph(nodes=[], edges=[], seed_keys=[], hop_limit=options.hops)
    return answer, subgraph


def load_config_file(path: Path | str) -> dict:
    """YAML config with sections {corpus, extractors, embedder, retrieval, eval, service}."""
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    return data
