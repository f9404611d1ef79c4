"""Evaluation harness: sampling, ground truth, overlap, judging, and the
cross-section navigation metric, reported for retrieval with and without
triplets."""
from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .corpus import Section
from .embedding import EmbeddingBackend, EmbeddingVector, cosine
from .errors import ConfigError, GenerationError, TransportError, UnknownSectionError
from .extraction import section_entity_label
from .index import IndexSnapshot, build_section_index, index_build
from .kgstore import build_section_graph, graph_stats, section_label_map
from .normalize import canonical_surface
from .qa import RetrievalBundle, answer_extractive, generate_answer, retrieve, retrieve_sections, split_sentences
from .rng import sample_without_replacement
from .store import RegStore
from .util import canonical_json, sha256_text

logger = logging.getLogger(__name__)

DEFAULT_THETAS = (0.50, 0.60, 0.75)
F1_BINARY_CUT = 0.6
JUDGE_SCALE_BINARY_CUT = 4

_HIERARCHY_UNIT_RE = re.compile(r"^(?:TITLE|CHAPTER|SUBCHAPTER|PART|SUBPART)\b")
_TOKEN_RE = re.compile(r"[a-z0-9]+")
_SCALE_RE = re.compile(r"[1-5]")

QA_PROMPT_TEMPLATE = (
    "Write {m} question and answer pairs answerable strictly from the story below.\n"
    "Format them as alternating lines:\n"
    "Q: <question>\n"
    "A: <answer>\n"
    "\n"
    "STORY:\n"
    "{story}"
)

JUDGE_PROMPT_TEMPLATE = (
    "Rate how factually correct and consistent the candidate answer is with the\n"
    "reference answer and the story, on a scale of 1 (wrong) to 5 (fully correct).\n"
    "Reply with the single digit only.\n"
    "\n"
    "STORY:\n{story}\n\nREFERENCE ANSWER: {reference}\n\nCANDIDATE ANSWER: {candidate}"
)


# -- sampling and ground truth -----------------------------------------------


def sample_sections(store: RegStore, k: int, seed: int) -> list[str]:
    """Uniform sample of section ids without replacement, deterministic per seed."""
    ids = sorted(s.id for s in store.sections)
    if k > len(ids):
        raise ConfigError(f"sample size {k} exceeds section count {len(ids)}")
    return sample_without_replacement(ids, k, seed)


def _resolve_endpoint(label_map: dict[str, str], entity: str) -> Optional[str]:
    return label_map.get(canonical_surface(entity))


def build_mentions(store: RegStore, target: str) -> set[str]:
    """Sections linked to the target by an explicit cross-reference in either
    direction or by a shared non-hierarchy entity, one hop out."""
    sections = store.sections_by_id
    if target not in sections:
        raise UnknownSectionError(f"unknown section id '{target}'")
    g = store.graph
    label_map = section_label_map(sections)
    mentions: set[str] = set()

    for key, triplet in g.triplets.items():
        if triplet.predicate != "references":
            continue
        subj = _resolve_endpoint(label_map, triplet.subject)
        obj = _resolve_endpoint(label_map, triplet.object)
        if subj == target and obj is not None:
            mentions.add(obj)
        elif obj == target and subj is not None:
            mentions.add(subj)

    entity_sections: dict[str, set[str]] = {}
    for key, section_ids in g.provenance.items():
        triplet = g.triplets[key]
        for entity in (triplet.subject, triplet.object):
            if _HIERARCHY_UNIT_RE.match(canonical_surface(entity)):
                continue
            entity_sections.setdefault(entity, set()).update(section_ids)
    for key in g.section_index.get(target, set()):
        triplet = g.triplets[key]
        for entity in (triplet.subject, triplet.object):
            mentions |= entity_sections.get(entity, set())

    mentions.discard(target)
    return {m for m in mentions if m in sections}


@dataclass
class GroundTruthItem:
    target: str
    mentions: set[str]
    retold_story: str = ""
    qa_pairs: list[tuple[str, str]] = field(default_factory=list)


def build_retold_story(store: RegStore, item: GroundTruthItem) -> str:
    """Target text first, then mention texts sorted by id, each under a
    header line naming the section."""
    sections = store.sections_by_id
    blocks = [f"[SECTION {item.target}]\n{sections[item.target].text}"]
    for sid in sorted(item.mentions):
        blocks.append(f"[SECTION {sid}]\n{sections[sid].text}")
    return "\n\n".join(blocks)


def build_ground_truth(store: RegStore, target: str) -> GroundTruthItem:
    item = GroundTruthItem(target=target, mentions=build_mentions(store, target))
    item.retold_story = build_retold_story(store, item)
    return item


# -- question generation ------------------------------------------------------


def parse_qa_lines(text: str) -> tuple[list[tuple[str, str]], int]:
    """Parse alternating `Q:`/`A:` lines; a Q without a following A is dropped."""
    pairs: list[tuple[str, str]] = []
    dropped = 0
    pending_q: Optional[str] = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.lower().startswith("q:"):
            if pending_q is not None:
                dropped += 1
            pending_q = line[2:].strip()
        elif line.lower().startswith("a:"):
            if pending_q is None:
                dropped += 1
                continue
            answer = line[2:].strip()
            if pending_q and answer:
                pairs.append((pending_q, answer))
            else:
                dropped += 1
            pending_q = None
    if pending_q is not None:
        dropped += 1
    return pairs, dropped


def generate_qa(item: GroundTruthItem, client, m: int = 3) -> list[tuple[str, str]]:
    """Ask the generation client for m QA pairs grounded in the retold story."""
    if not item.retold_story.strip():
        raise ConfigError(f"empty retold story for target {item.target}")
    prompt = QA_PROMPT_TEMPLATE.format(m=m, story=item.retold_story)
    response = client.complete(prompt)
    pairs, dropped = parse_qa_lines(response)
    if dropped:
        logger.warning("dropped %d malformed QA pair(s) for %s", dropped, item.target)
    if not pairs:
        raise GenerationError(f"no parseable QA pairs for target {item.target}")
    return pairs[:m]


def build_qa_deterministic(store: RegStore, item: GroundTruthItem, m: int = 3) -> list[tuple[str, str]]:
    """LLM-free QA pairs derived from the target section's own triplets and text."""
    if not item.retold_story.strip():
        raise ConfigError(f"empty retold story for target {item.target}")
    section = store.sections_by_id[item.target]
    label = section_entity_label(section)
    sentences = split_sentences(section.text)
    first = sentences[0] if sentences else section.text
    triplets = store.graph.triplets_of(item.target)
    refs = sorted(t.object for t in triplets if t.predicate == "references")
    times = sorted(t.object for t in triplets if t.predicate == "hasTimeframe")
    pairs = [
        (f"What does {label} {section.heading} require?".strip(), first),
        (f"Which sections does {label} reference?", ", ".join(refs) if refs else first),
        (f"What timeframes apply under {label}?", "; ".join(times) if times else first),
    ]
    return pairs[:m]


# -- scoring -------------------------------------------------------------------


def overlap_score(retrieved: Sequence[str], truth: set[str]) -> float:
    """|retrieved ∩ truth| / |retrieved| by exact id equality; empty retrieval is 0."""
    unique = list(dict.fromkeys(retrieved))
    if not unique:
        return 0.0
    hits = sum(1 for sid in unique if sid in truth)
    return hits / len(unique)


def overlap_score_theta(
    retrieved: Sequence[Section],
    truth: Sequence[Section],
    theta: float,
    backend: EmbeddingBackend,
) -> float:
    """Overlap with similarity-thresholded matching.

    A retrieved section counts (once) when its text embeds within cosine >=
    theta of some truth section's text; unembeddable sections count as
    non-matching with a warning.
    """
    if not 0.0 <= theta <= 1.0:
        raise ConfigError(f"theta must be in [0, 1], got {theta}")
    unique: list[Section] = []
    seen: set[str] = set()
    for section in retrieved:
        if section.id not in seen:
            seen.add(section.id)
            unique.append(section)
    if not unique:
        return 0.0

    truth_vecs: list[EmbeddingVector] = []
    for section in truth:
        try:
            truth_vecs.append(backend.embed(section.text))
        except Exception:
            logger.warning("unembeddable truth section %s", section.id)
    hits = 0
    for section in unique:
        try:
            vec = backend.embed(section.text)
        except Exception:
            logger.warning("unembeddable retrieved section %s; counted as non-matching", section.id)
            continue
        if any(cosine(vec, tv) >= theta for tv in truth_vecs):
            hits += 1
    return hits / len(unique)


# -- judging -------------------------------------------------------------------


def _f1_tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def token_f1(candidate: str, reference: str) -> float:
    """Token-multiset F1, symmetric under argument swap."""
    cand = Counter(_f1_tokens(candidate))
    ref = Counter(_f1_tokens(reference))
    overlap = sum((cand & ref).values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(cand.values())
    recall = overlap / sum(ref.values())
    return 2 * precision * recall / (precision + recall)


@dataclass
class JudgeResult:
    score: float
    binary: int
    judge_id: str
    degraded: bool = False


class DeterministicJudge:
    judge_id = "token-f1"

    def judge(self, candidate: str, reference: str, story: str) -> JudgeResult:
        f1 = token_f1(candidate, reference)
        return JudgeResult(score=f1, binary=1 if f1 >= F1_BINARY_CUT else 0, judge_id=self.judge_id)


class ExternalJudge:
    """LLM judge on a 1-5 scale, mapped affinely onto [0, 1] with a binary cut
    at 4; falls back to the deterministic judge on transport failure."""

    judge_id = "llm-scale-1-5"

    def __init__(self, client):
        self.client = client
        self._fallback = DeterministicJudge()

    def judge(self, candidate: str, reference: str, story: str) -> JudgeResult:
        prompt = JUDGE_PROMPT_TEMPLATE.format(story=story, reference=reference, candidate=candidate)
        try:
            response = self.client.complete(prompt)
        except TransportError:
            logger.warning("external judge failed; using deterministic fallback")
            result = self._fallback.judge(candidate, reference, story)
            result.degraded = True
            return result
        m = _SCALE_RE.search(response)
        if not m:
            result = self._fallback.judge(candidate, reference, story)
            result.degraded = True
            return result
        n = int(m.group())
        return JudgeResult(
            score=(n - 1) / 4,
            binary=1 if n >= JUDGE_SCALE_BINARY_CUT else 0,
            judge_id=self.judge_id,
        )


def judge_answer(candidate: str, reference: str, story: str, judge=None) -> JudgeResult:
    if judge is None:
        judge = DeterministicJudge()
    return judge.judge(candidate, reference, story)


# -- navigation metric ----------------------------------------------------------


def nav_metric(store: RegStore, sample: Sequence[str], mode: str = "shared_or_linked") -> float:
    """Sample-averaged Jaccard overlap of per-section triplet sets.

    strict_shared counts only identical identity keys in the intersection;
    shared_or_linked additionally counts triplets whose subject resolves to
    one section and object to the other. A target whose denominator is zero
    contributes zero.
    """
    if mode not in ("strict_shared", "shared_or_linked"):
        raise ConfigError(f"unknown nav mode '{mode}'")
    if not sample:
        raise ConfigError("nav metric requires a non-empty sample")
    g = store.graph
    sections = store.sections_by_id
    label_map = section_label_map(sections)

    def linked(keys: set[str], a: str, b: str) -> set[str]:
        out = set()
        for key in keys:
            t = g.triplets[key]
            ends = {_resolve_endpoint(label_map, t.subject), _resolve_endpoint(label_map, t.object)}
            if ends == {a, b}:
                out.add(key)
        return out

    total = 0.0
    for target in sample:
        mentions = build_mentions(store, target)
        t_target = g.keys_of(target)
        numerator = 0
        denominator = 0
        for mention in sorted(mentions):
            t_mention = g.keys_of(mention)
            union = t_target | t_mention
            inter = t_target & t_mention
            if mode == "shared_or_linked":
                inter = inter | linked(union, target, mention)
            numerator += len(inter)
            denominator += len(union)
        total += numerator / denominator if denominator else 0.0
    return total / len(sample)


# -- full run --------------------------------------------------------------------


@dataclass
class EvalConfig:
    store: RegStore
    backend: EmbeddingBackend
    sample_k: int = 2
    seed: int = 1
    thetas: tuple[float, ...] = DEFAULT_THETAS
    retrieval_k: int = 5
    m_questions: int = 3
    judge: object = None  # defaults to DeterministicJudge
    qa_client: object = None  # None -> deterministic QA pairs
    generator_client: object = None  # None -> extractive answers
    nav_mode: str = "shared_or_linked"
    snapshot: Optional[IndexSnapshot] = None
    path_sample: Optional[int] = None

    def fingerprint(self) -> str:
        judge = self.judge or DeterministicJudge()
        payload = {
            "sample_k": self.sample_k,
            "seed": self.seed,
            "thetas": list(self.thetas),
            "retrieval_k": self.retrieval_k,
            "m_questions": self.m_questions,
            "judge": getattr(judge, "judge_id", "custom"),
            "qa": "client" if self.qa_client else "deterministic",
            "answers": "generated" if self.generator_client else "extractive",
            "nav_mode": self.nav_mode,
            "backend": self.backend.embedder_id,
            "graph_version": self.store.graph.version,
        }
        return sha256_text(canonical_json(payload))[:16]


@dataclass
class EvalReport:
    per_question: list[dict] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    config_fingerprint: str = ""
    failed_stages: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_question": self.per_question,
            "aggregates": self.aggregates,
            "config_fingerprint": self.config_fingerprint,
            "failed_stages": self.failed_stages,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def run_eval(config: EvalConfig) -> EvalReport:
    """Full evaluation: sample, ground truth, QA, both retrieval conditions,
    thresholded overlap, judging, navigation metric, and graph statistics.

    Deterministic substitutes (template QA, extractive answers, token-F1
    judge) make the whole run bit-reproducible for a fixed seed; any stage
    failure is recorded in failed_stages and later stages are skipped."""
    store = config.store
    backend = config.backend
    judge = config.judge or DeterministicJudge()
    report = EvalReport(config_fingerprint=config.fingerprint())

    try:
        sample = sample_sections(store, config.sample_k, config.seed)
    except Exception as exc:
        report.failed_stages["sample"] = str(exc)
        return report

    try:
        items = [build_ground_truth(store, target) for target in sample]
    except Exception as exc:
        report.failed_stages["ground_truth"] = str(exc)
        return report

    try:
        for item in items:
            if config.qa_client is not None:
                item.qa_pairs = generate_qa(item, config.qa_client, config.m_questions)
            else:
                item.qa_pairs = build_qa_deterministic(store, item, config.m_questions)
    except Exception as exc:
        report.failed_stages["qa_generation"] = str(exc)
        return report

    sections = store.sections_by_id
    try:
        triplet_snapshot = config.snapshot or index_build(store.graph, backend)
        section_snapshot = build_section_index(sections, backend, store.graph.version)
    except Exception as exc:
        report.failed_stages["index"] = str(exc)
        return report

    overlaps: dict[tuple[str, float], list[float]] = {}
    judge_scores: dict[str, list[float]] = {"with_triplets": [], "without_triplets": []}
    judge_binaries: dict[str, list[int]] = {"with_triplets": [], "without_triplets": []}
    try:
        for item in items:
            truth_ids = {item.target} | item.mentions
            truth_sections = [sections[sid] for sid in sorted(truth_ids)]
            for question, reference in item.qa_pairs:
                bundles: dict[str, RetrievalBundle] = {
                    "with_triplets": retrieve(
                        question, config.retrieval_k, triplet_snapshot, sections, backend,
                        store.graph.triplets,
                    ),
                    "without_triplets": retrieve_sections(
                        question, config.retrieval_k, section_snapshot, sections, backend
                    ),
                }
                for condition, bundle in bundles.items():
                    retrieved = bundle.evidence_sections
                    if config.generator_client is not None:
                        answer = generate_answer(question, bundle, config.generator_client, backend)
                    else:
                        answer = answer_extractive(question, bundle, backend)
                    verdict = judge_answer(answer.text, reference, item.retold_story, judge)
                    judge_scores[condition].append(verdict.score)
                    judge_binaries[condition].append(verdict.binary)
                    for theta in config.thetas:
                        value = overlap_score_theta(retrieved, truth_sections, theta, backend)
                        overlaps.setdefault((condition, theta), []).append(value)
                        report.per_question.append(
                            {
                                "question": question,
                                "target": item.target,
                                "condition": condition,
                                "theta": theta,
                                "overlap": value,
                                "judge_score": verdict.score,
                                "judge_verdict": verdict.binary,
                                "answer_mode": answer.mode,
                            }
                        )
    except Exception as exc:
        report.failed_stages["questions"] = str(exc)
        return report

    aggregates: dict = {
        "mean_overlap": {
            condition: {
                f"{theta:.2f}": _mean(overlaps.get((condition, theta), []))
                for theta in config.thetas
            }
            for condition in ("with_triplets", "without_triplets")
        },
        "mean_judge_score": {c: _mean(v) for c, v in judge_scores.items()},
        "judge_binary_rate": {
            c: _mean([float(b) for b in v]) for c, v in judge_binaries.items()
        },
    }

    try:
        aggregates["nav"] = nav_metric(store, sample, config.nav_mode)
    except Exception as exc:
        report.failed_stages["nav"] = str(exc)
    try:
        with_graph = build_section_graph(store.graph, "with_triplets", sections)
        without_graph = build_section_graph(store.graph, "text_only", sections)
        aggregates["stats_with"] = graph_stats(
            with_graph, config.path_sample, config.seed
        ).as_dict()
        aggregates["stats_without"] = graph_stats(
            without_graph, config.path_sample, config.seed
        ).as_dict()
    except Exception as exc:
        report.failed_stages["stats"] = str(exc)

    report.aggregates = aggregates
    return report
