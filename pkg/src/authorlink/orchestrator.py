"""Method orchestration: one entry point to judge a batch of candidate pairs.

Five method configurations share the same contract: take a dataset and a
pair list, return one decision per pair plus run accounting. The escalation
pipeline chains the cheap citation-overlap stage with the language-model
judge: pairs at or above the overlap threshold are accepted outright, and
only the remainder costs a model call, with the overlap and co-authorship
signals injected into the prompt as hints.

Decisions come back sorted by (record_id, auid) no matter how many workers
ran, so output files are byte-stable across schedules.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import bibcoupling as bc
from . import labelspread as ls
from .ingest import Dataset
from .llmjudge import (BcEvidence, CallStats, ChatClient, EnrichmentEvidence, LsEvidence,
                       PromptConfig, judge)
from .model import CandidatePair, Decision, Method, Verdict
from .taxonomy import Granularity, Taxonomy, load_taxonomy, parse_rf

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = bc.TimeWindow(2016, 2023)


class PrerequisiteError(RuntimeError):
    """A method was asked to run without an artifact it depends on."""


@dataclass(frozen=True)
class BcOnly:
    """Citation-overlap thresholding alone."""

    threshold: float = 0.15
    window: bc.TimeWindow = DEFAULT_WINDOW


@dataclass(frozen=True)
class LsOnly:
    """Label spreading over the co-authorship graph alone."""

    granularity: Granularity = Granularity.SA
    params: ls.SpreadParams = ls.SpreadParams()


@dataclass(frozen=True)
class LlmOnly:
    """Plain language-model judging of every pair."""

    prompt: PromptConfig = PromptConfig()


@dataclass(frozen=True)
class LlmEnriched:
    """Language-model judging of every pair, with evidence in the prompt."""

    prompt: PromptConfig = PromptConfig(include_bc=True)
    window: bc.TimeWindow = DEFAULT_WINDOW


@dataclass(frozen=True)
class Lead:
    """Two-stage escalation: overlap screen first, model judge for the rest."""

    threshold: float = 0.15
    window: bc.TimeWindow = DEFAULT_WINDOW
    prompt: PromptConfig = PromptConfig(include_bc=True, include_ls=True)


MethodConfig = BcOnly | LsOnly | LlmOnly | LlmEnriched | Lead


def config_name(config: MethodConfig) -> str:
    return {BcOnly: "bc", LsOnly: "ls", LlmOnly: "llm",
            LlmEnriched: "llm_enriched", Lead: "lead"}[type(config)]


@dataclass(frozen=True)
class RunResult:
    """Decisions plus accounting for one method run.

    llm_calls counts judged pairs (not retry attempts); escalated_pairs lists
    the (record_id, auid) pairs the escalation pipeline sent to the model.
    """

    decisions: tuple[Decision, ...]
    elapsed_seconds: float
    llm_calls: int
    escalated_pairs: tuple[tuple[str, str], ...]
    call_stats: tuple[tuple[str, str, int, float], ...] = ()


class _BcArtifacts:
    """Per-field corpora with candidate self-exclusion handled lazily."""

    def __init__(self, dataset: Dataset, window: bc.TimeWindow,
                 cache_dir: str | Path | None):
        if not dataset.seeds:
            raise PrerequisiteError("seed alignments are required to build field corpora")
        self.dataset = dataset
        self.window = window
        self.cache_dir = cache_dir
        self.seed_auids: dict[str, list[str]] = {}
        for seed in dataset.seeds:
            lst = self.seed_auids.setdefault(str(seed.rf), [])
            if seed.auid not in lst:
                lst.append(seed.auid)
        self._corpora: dict[tuple[str, str | None], bc.FieldCorpus] = {}

    def corpus_for(self, rf_code, candidate_auid: str) -> bc.FieldCorpus:
        rf_str = str(rf_code)
        auids = self.seed_auids.get(rf_str, [])
        exclude = candidate_auid if candidate_auid in auids else None
        key = (rf_str, exclude)
        if key not in self._corpora:
            if not auids:
                logger.warning("no seed authors for field %s; corpus is empty", rf_str)
            profiles = [self.dataset.profiles[a] for a in auids]
            self._corpora[key] = bc.fetch_or_build_corpus(
                profiles, rf_code, self.window, cache_dir=self.cache_dir, exclude_auid=exclude)
        return self._corpora[key]

    def score(self, pair: CandidatePair) -> bc.OverlapResult:
        profile = self.dataset.profiles.get(pair.auid)
        if profile is None:
            raise PrerequisiteError(f"no author profile for auid {pair.auid}")
        candidate = bc.candidate_reference_set(profile, self.window)
        return bc.overlap(candidate, self.corpus_for(pair.record.rf, pair.auid))


class _LsArtifacts:
    """Graph, seed labels and spread shared by every pair in a run."""

    def __init__(self, dataset: Dataset, granularity: Granularity,
                 params: ls.SpreadParams = ls.SpreadParams()):
        if not dataset.seeds:
            raise PrerequisiteError("seed alignments are required to seed label spreading")
        self.granularity = granularity
        self.graph = ls.build_graph(dataset.profiles.values())
        self.labels = ls.build_seed_labels(self.graph, dataset.seeds, granularity,
                                           records=dataset.records)
        self.soft = ls.spread(ls.normalize(self.graph.W), self.labels.Y, params)

    def classify(self, pair: CandidatePair) -> Decision:
        return ls.ls_classify(pair.record, pair.auid, self.graph, self.labels,
                              self.soft, self.granularity)

    def evidence_for(self, auid: str, taxonomy: Taxonomy) -> LsEvidence | None:
        """Field-level classification projected upward, None when the graph abstains."""
        if auid not in self.graph.index:
            return None
        inference = ls.infer_class(self.soft.F, self.labels.classes, self.graph.index[auid])
        if inference.class_id is None:
            return None
        try:
            code = parse_rf(inference.class_id)
        except ValueError:
            logger.warning("cannot project class %r for evidence; skipping", inference.class_id)
            return None
        rf_str, rfg, area = str(code), code.rfg, code.area
        return LsEvidence(
            field_code=rf_str, field_label=taxonomy.rf_labels.get(rf_str, rf_str),
            group_code=rfg, group_label=taxonomy.rfg_labels.get(rfg, rfg),
            area_code=area, area_label=taxonomy.sa_labels.get(area, area),
        )


def _require_client(client: ChatClient | None) -> ChatClient:
    if client is None:
        raise PrerequisiteError("this method needs a model client (endpoint or mock)")
    return client


def lead_decide(pair: CandidatePair, overlap: bc.OverlapResult, config: Lead,
                client: ChatClient, dataset: Dataset, taxonomy: Taxonomy,
                ls_artifacts: "_LsArtifacts | None",
                max_retries: int = 3) -> tuple[Decision, CallStats | None]:
    """Decide one pair under the escalation rule.

    At or above the threshold the overlap stage answers yes by itself; it
    never answers no. Anything below escalates to the model judge with the
    configured evidence in the prompt, and the decision keeps the overlap
    ratio as its score either way.
    """
    if bc.bc_classify(overlap, config.threshold) is Verdict.YES:
        decision = Decision(
            record_id=pair.record.record_id, auid=pair.auid, verdict=Verdict.YES,
            method=Method.LEAD_BC_STAGE, score=overlap.ratio,
            evidence={"bc": BcEvidence.from_overlap(overlap).to_dict()},
        )
        return decision, None
    evidence = EnrichmentEvidence(
        bc=BcEvidence.from_overlap(overlap) if config.prompt.include_bc else None,
        ls=(ls_artifacts.evidence_for(pair.auid, taxonomy)
            if config.prompt.include_ls and ls_artifacts is not None else None),
    )
    profile = dataset.profiles.get(pair.auid)
    if profile is None:
        raise PrerequisiteError(f"no author profile for auid {pair.auid}")
    decision, stats = judge(pair.record, profile, config.prompt, client, taxonomy,
                            evidence=evidence, method=Method.LEAD_LLM_STAGE,
                            max_retries=max_retries)
    return dataclasses.replace(decision, score=overlap.ratio), stats


def run(dataset: Dataset, config: MethodConfig, *,
        pairs: Sequence[CandidatePair] | None = None,
        client: ChatClient | None = None,
        taxonomy: Taxonomy | None = None,
        jobs: int = 1,
        cache_dir: str | Path | None = None,
        max_retries: int = 3) -> RunResult:
    """Judge every pair under one method configuration.

    Pairs default to the dataset's gold list. Results are sorted by
    (record_id, auid); `jobs` only affects wall time.
    """
    t0 = time.perf_counter()
    worklist = list(pairs if pairs is not None else dataset.gold)
    tax = taxonomy if taxonomy is not None else load_taxonomy()
    for pair in worklist:
        if pair.auid not in dataset.profiles:
            raise PrerequisiteError(f"no author profile for auid {pair.auid}")

    stats_by_pair: dict[tuple[str, str], CallStats] = {}

    if isinstance(config, BcOnly):
        artifacts = _BcArtifacts(dataset, config.window, cache_dir)

        def work(pair: CandidatePair) -> Decision:
            result = artifacts.score(pair)
            return Decision(record_id=pair.record.record_id, auid=pair.auid,
                            verdict=bc.bc_classify(result, config.threshold),
                            method=Method.BC, score=result.ratio,
                            evidence={"bc": BcEvidence.from_overlap(result).to_dict()})

    elif isinstance(config, LsOnly):
        artifacts_ls = _LsArtifacts(dataset, config.granularity, config.params)

        def work(pair: CandidatePair) -> Decision:
            return artifacts_ls.classify(pair)

    elif isinstance(config, LlmOnly):
        the_client = _require_client(client)

        def work(pair: CandidatePair) -> Decision:
            profile = dataset.profiles[pair.auid]
            decision, stats = judge(pair.record, profile, config.prompt, the_client, tax,
                                    method=Method.LLM, max_retries=max_retries)
            stats_by_pair[(decision.record_id, decision.auid)] = stats
            return decision

    elif isinstance(config, LlmEnriched):
        the_client = _require_client(client)
        bc_artifacts = _BcArtifacts(dataset, config.window, cache_dir) if config.prompt.include_bc else None
        ls_artifacts = _LsArtifacts(dataset, Granularity.RF) if config.prompt.include_ls else None

        def work(pair: CandidatePair) -> Decision:
            profile = dataset.profiles[pair.auid]
            evidence = EnrichmentEvidence(
                bc=BcEvidence.from_overlap(bc_artifacts.score(pair)) if bc_artifacts is not None else None,
                ls=ls_artifacts.evidence_for(pair.auid, tax) if ls_artifacts is not None else None,
            )
            decision, stats = judge(pair.record, profile, config.prompt, the_client, tax,
                                    evidence=evidence, method=Method.LLM_ENRICHED,
                                    max_retries=max_retries)
            stats_by_pair[(decision.record_id, decision.auid)] = stats
            return decision

    elif isinstance(config, Lead):
        the_client = _require_client(client)
        bc_artifacts = _BcArtifacts(dataset, config.window, cache_dir)
        ls_artifacts = _LsArtifacts(dataset, Granularity.RF) if config.prompt.include_ls else None

        def work(pair: CandidatePair) -> Decision:
            result = bc_artifacts.score(pair)
            decision, stats = lead_decide(pair, result, config, the_client, dataset, tax,
                                          ls_artifacts, max_retries=max_retries)
            if stats is not None:
                stats_by_pair[(decision.record_id, decision.auid)] = stats
            return decision

    else:
        raise TypeError(f"unknown method config {config!r}")

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            decisions = list(executor.map(work, worklist))
    else:
        decisions = [work(pair) for pair in worklist]

    decisions.sort(key=lambda d: (d.record_id, d.auid))
    escalated = sorted((d.record_id, d.auid) for d in decisions
                       if d.method is Method.LEAD_LLM_STAGE)
    llm_calls = len(stats_by_pair)
    call_stats = tuple(sorted(
        (rid, auid, s.attempts, s.seconds) for (rid, auid), s in stats_by_pair.items()))
    return RunResult(decisions=tuple(decisions),
                     elapsed_seconds=time.perf_counter() - t0,
                     llm_calls=llm_calls,
                     escalated_pairs=tuple(escalated),
                     call_stats=call_stats)


def write_decisions(result: RunResult, path: str | Path) -> None:
    """One JSON object per line, already in (record_id, auid) order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for decision in result.decisions:
            fh.write(json.dumps(decision.to_json_dict()) + "\n")


def _jsonable(value):
    if isinstance(value, enum.Enum):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(value).items()}
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def build_manifest(config: MethodConfig, result: RunResult, *,
                   endpoint: str = "none", mock_fixture: str | None = None,
                   dataset_paths: dict[str, str] | None = None,
                   jobs: int = 1) -> dict:
    """Everything needed to reproduce the run bit-for-bit with a mock client."""
    return {
        "method": config_name(config),
        "config": _jsonable(config),
        "endpoint": endpoint,
        "mock_fixture": mock_fixture,
        "dataset": dataset_paths or {},
        "jobs": jobs,
        "n_decisions": len(result.decisions),
        "llm_calls": result.llm_calls,
        "n_escalated": len(result.escalated_pairs),
        "elapsed_seconds": result.elapsed_seconds,
        "per_call": [
            {"record_id": rid, "auid": auid, "attempts": attempts, "seconds": seconds}
            for rid, auid, attempts, seconds in result.call_stats
        ],
    }


def write_manifest(manifest: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
