"""Language-model adjudication of candidate pairs.

The judge receives a researcher description built from the registry record
and a candidate block built from the author profile, and must answer yes or
no in a fixed JSON schema. An enriched variant of the prompt additionally
presents machine-computed signals (citation overlap, co-authorship
classification) as explicitly fallible hints.

Rendering is pure: same record, profile, config and evidence always produce
byte-identical prompts, including the pseudo-random paper sample, which is
seeded per author.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

import requests

from .bibcoupling import OverlapResult
from .model import AuthorProfile, Decision, Method, RegistryRecord, Verdict, round_half_up
from .taxonomy import Taxonomy

logger = logging.getLogger(__name__)


class NoJsonFound(ValueError):
    """Model output contains no JSON object."""


class MissingField(ValueError):
    """Verdict JSON lacks a required field."""


class InvalidMatchValue(ValueError):
    """Verdict "match" field is neither yes nor no."""


class EndpointError(RuntimeError):
    """Transport-level failure talking to the model endpoint."""


class MetadataMode:
    """How much publication metadata the candidate block exposes."""

    KEYWORDS = "keywords"
    KEYWORDS_TITLES = "keywords_titles"
    KEYWORDS_TITLES_ABSTRACTS = "keywords_titles_abstracts"

    ALL = (KEYWORDS, KEYWORDS_TITLES, KEYWORDS_TITLES_ABSTRACTS)


@dataclass(frozen=True)
class PromptConfig:
    """Prompt-shape settings.

    sample_size None means all publications; otherwise up to `sample_size`
    papers are drawn with an RNG seeded from (rng_seed, auid) and re-sorted
    chronologically. include_bc / include_ls select which enrichment blocks
    an enriched prompt presents.
    """

    metadata_mode: str = MetadataMode.KEYWORDS_TITLES
    sample_size: int | None = 10
    rng_seed: int = 0
    include_bc: bool = False
    include_ls: bool = False

    def __post_init__(self) -> None:
        if self.metadata_mode not in MetadataMode.ALL:
            raise ValueError(f"unknown metadata mode {self.metadata_mode!r}")
        if self.sample_size is not None and self.sample_size < 1:
            raise ValueError("sample_size must be positive or None for all papers")


@dataclass(frozen=True)
class EndpointConfig:
    """Connection and decoding settings for a chat-completion endpoint."""

    base_url: str
    model_name: str
    top_k: int = 1
    max_length: int = 700
    timeout: float = 120.0
    max_retries: int = 3
    max_concurrent: int = 4
    api_token: str | None = None


@dataclass(frozen=True)
class Prompt:
    system: str
    user: str


@dataclass(frozen=True)
class BcEvidence:
    """Citation-overlap stats shown to the judge."""

    n_papers: int
    n_cited: int
    n_shared: int
    ratio: float

    @classmethod
    def from_overlap(cls, result: OverlapResult) -> "BcEvidence":
        return cls(n_papers=result.n_papers, n_cited=result.n_cited,
                   n_shared=result.n_shared, ratio=result.ratio)

    @property
    def percent(self) -> float:
        return round_half_up(self.ratio * 100.0, 1)

    def to_dict(self) -> dict:
        return {"overlap_pct": self.percent, "n_papers": self.n_papers,
                "n_cited": self.n_cited, "n_matches": self.n_shared}


@dataclass(frozen=True)
class LsEvidence:
    """Co-authorship classification shown to the judge, at three levels."""

    field_code: str
    field_label: str
    group_code: str
    group_label: str
    area_code: str
    area_label: str

    def to_dict(self) -> dict:
        return {"field_code": self.field_code, "field_label": self.field_label,
                "group_code": self.group_code, "group_label": self.group_label,
                "area_code": self.area_code, "area_label": self.area_label}


@dataclass(frozen=True)
class EnrichmentEvidence:
    """Optional evidence blocks; either may be absent."""

    bc: BcEvidence | None = None
    ls: LsEvidence | None = None

    def to_dict(self) -> dict:
        out: dict = {}
        if self.bc is not None:
            out["bc"] = self.bc.to_dict()
        if self.ls is not None:
            out["ls"] = self.ls.to_dict()
        return out


SYSTEM_PROMPT = ("Your task is to evaluate the candidate to determine if they match "
                 "the specified researcher profile.")

_QUESTION = ("Is the following candidate a match for the researcher {first} {last}, "
             "affiliated with {university}, working in the Italian academic field of {field}?")

_CLOSING = ('Based on the provided information, do you believe this candidate is the best match?\n'
            '\n'
            'Please respond with "yes" or "no" and a brief explanation.\n'
            '\n'
            'Respond only in JSON format as follows:\n'
            '\n'
            '{{\n'
            '  "cerca_univ_id": "{record_id}",\n'
            '  "scopus_candidate_id": "{auid}",\n'
            '  "match": "yes" or "no",\n'
            '  "explanation": "Your explanation here."\n'
            '}}')

_EXTRA_INFO_HEADER = ("You also have additional information obtained through automated methods, "
                      "which may contain inaccuracies. Please use this information critically "
                      "to support your evaluation:")

_BC_SENTENCE = ("An analysis of citations through a citation network has shown that {pct}% of "
                "the citations in the candidate's {n_papers} papers (which cite a total of "
                "{n_cited} papers) align with those of the academic community, with {n_matches} "
                "relevant citations found in the network.")

_LS_HEADER = "A method based on a co-authorship network has predicted the following academic classification:"


def _sample_indices(n_pubs: int, config: PromptConfig, auid: str) -> list[int]:
    """Pick which publications the block shows, in chronological position order."""
    if config.sample_size is None or n_pubs <= config.sample_size:
        return list(range(n_pubs))
    digest = hashlib.sha256(f"{config.rng_seed}:{auid}".encode("utf-8")).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    return sorted(rng.sample(range(n_pubs), config.sample_size))


def render_candidate_block(profile: AuthorProfile, config: PromptConfig) -> str:
    """Identity lines plus one bullet per selected publication, oldest first."""
    name = profile.full_name or profile.given_name
    lines = [
        f"Author ID: {profile.auid}",
        f"Name: {name}",
        f"Surname: {profile.surname}",
        f"Initials: {profile.initials}",
        f"Affiliations: {'; '.join(profile.affiliations)}",
        "",
        "Publications (chronological order):",
    ]
    for i in _sample_indices(len(profile.publications), config, profile.auid):
        pub = profile.publications[i]
        parts = [f"[{pub.year}]"]
        if config.metadata_mode != MetadataMode.KEYWORDS:
            parts.append(pub.title)
        if pub.keywords:
            parts.append(f"Keywords: {', '.join(pub.keywords)}")
        if config.metadata_mode == MetadataMode.KEYWORDS_TITLES_ABSTRACTS and pub.abstract:
            parts.append(f"Abstract: {pub.abstract}")
        lines.append("- " + " - ".join(parts))
    return "\n".join(lines)


def render_prompt(record: RegistryRecord, profile: AuthorProfile, config: PromptConfig,
                  taxonomy: Taxonomy) -> Prompt:
    """Plain judging prompt: question, candidate block, yes/no JSON instructions."""
    question = _QUESTION.format(first=record.first_name, last=record.last_name,
                                university=record.university,
                                field=taxonomy.describe_field(rf=record.rf, ad=record.ad))
    block = render_candidate_block(profile, config)
    closing = _CLOSING.format(record_id=record.record_id, auid=profile.auid)
    user = f"{question}\n\nHere is the candidate:\n{block}\n\n{closing}"
    return Prompt(system=SYSTEM_PROMPT, user=user)


def _render_evidence_items(evidence: EnrichmentEvidence) -> list[str]:
    items: list[str] = []
    if evidence.bc is not None:
        bc = evidence.bc
        items.append(_BC_SENTENCE.format(pct=f"{bc.percent:.1f}", n_papers=bc.n_papers,
                                         n_cited=bc.n_cited, n_matches=bc.n_shared))
    if evidence.ls is not None:
        ls = evidence.ls
        items.append(
            f"{_LS_HEADER}\n"
            f"   - Recruitment field: {ls.field_code} - {ls.field_label}\n"
            f"   - Macro recruitment field: {ls.group_code} - {ls.group_label}\n"
            f"   - Area: {ls.area_code} - {ls.area_label}"
        )
    return items


def render_enriched_prompt(record: RegistryRecord, profile: AuthorProfile, config: PromptConfig,
                           taxonomy: Taxonomy, evidence: EnrichmentEvidence) -> Prompt:
    """Judging prompt carrying machine-computed hints, numbered in order.

    With both evidence blocks absent this degrades to the plain prompt (the
    hint section would be empty), which is logged.
    """
    items = _render_evidence_items(evidence)
    if not items:
        logger.warning("enriched prompt requested without any evidence; using the plain prompt")
        return render_prompt(record, profile, config, taxonomy)
    question = _QUESTION.format(first=record.first_name, last=record.last_name,
                                university=record.university,
                                field=taxonomy.describe_field(rf=record.rf, ad=record.ad))
    numbered = "\n\n".join(f"{k}. {text}" for k, text in enumerate(items, start=1))
    block = render_candidate_block(profile, config)
    closing = _CLOSING.format(record_id=record.record_id, auid=profile.auid)
    user = (f"{question}\n\n{_EXTRA_INFO_HEADER}\n\n{numbered}\n\n"
            f"Here is the candidate:\n{block}\n\n{closing}")
    return Prompt(system=SYSTEM_PROMPT, user=user)


@dataclass(frozen=True)
class LlmVerdict:
    """Parsed model answer."""

    cerca_univ_id: str
    scopus_candidate_id: str
    match: bool
    explanation: str

    def to_json(self) -> str:
        return json.dumps({
            "cerca_univ_id": self.cerca_univ_id,
            "scopus_candidate_id": self.scopus_candidate_id,
            "match": "yes" if self.match else "no",
            "explanation": self.explanation,
        })


def parse_verdict(raw: str) -> LlmVerdict:
    """Extract the first well-formed JSON object from model output.

    Tolerates prose before and after the object. The match field must be the
    string "yes" or "no" (any casing); every schema field must be present.

    Raises
    ------
    NoJsonFound, MissingField, InvalidMatchValue
    """
    decoder = json.JSONDecoder()
    obj = None
    for i, ch in enumerate(raw):
        if ch != "{":
            continue
        try:
            candidate, _ = decoder.raw_decode(raw, i)
        except json.JSONDecodeError:
            continue
        if isinstance(candidate, dict):
            obj = candidate
            break
    if obj is None:
        raise NoJsonFound("no JSON object in model output")
    for fname in ("cerca_univ_id", "scopus_candidate_id", "match", "explanation"):
        if fname not in obj:
            raise MissingField(fname)
    match_raw = obj["match"]
    if not isinstance(match_raw, str) or match_raw.strip().casefold() not in ("yes", "no"):
        raise InvalidMatchValue(f"match must be yes or no, got {match_raw!r}")
    return LlmVerdict(
        cerca_univ_id=str(obj["cerca_univ_id"]),
        scopus_candidate_id=str(obj["scopus_candidate_id"]),
        match=match_raw.strip().casefold() == "yes",
        explanation=str(obj["explanation"]),
    )


class ChatClient(Protocol):
    """Anything able to answer one (system, user) exchange for a given pair."""

    def complete(self, system: str, user: str, pair: tuple[str, str]) -> str: ...


class HttpChatClient:
    """Thin chat-completion client over HTTP.

    Sends {model, messages, top_k, max_tokens}; concurrent calls are capped
    by a semaphore so a large worker pool cannot stampede the endpoint.
    """

    def __init__(self, config: EndpointConfig):
        self.config = config
        self._session = requests.Session()
        self._gate = threading.Semaphore(config.max_concurrent)

    def complete(self, system: str, user: str, pair: tuple[str, str]) -> str:
        body = {
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "top_k": self.config.top_k,
            "max_tokens": self.config.max_length,
        }
        headers = {}
        if self.config.api_token:
            headers["Authorization"] = f"Bearer {self.config.api_token}"
        with self._gate:
            try:
                resp = self._session.post(self.config.base_url, json=body,
                                          headers=headers, timeout=self.config.timeout)
                resp.raise_for_status()
                data = resp.json()
            except (requests.RequestException, ValueError) as exc:
                raise EndpointError(f"endpoint failure for pair {pair}: {exc}") from exc
        try:
            choice = data["choices"][0]
            if "message" in choice:
                return str(choice["message"]["content"])
            return str(choice["text"])
        except (KeyError, IndexError, TypeError):
            if isinstance(data, dict) and isinstance(data.get("content"), str):
                return data["content"]
            raise EndpointError(f"unrecognized endpoint response shape for pair {pair}")


class MockClient:
    """Replays canned responses keyed by (record_id, auid).

    Used for offline runs and tests; a missing key behaves like a transport
    failure so retry handling is exercised the same way.
    """

    def __init__(self, responses: dict[tuple[str, str], str]):
        self.responses = dict(responses)
        self.calls: list[tuple[str, str]] = []
        self._lock = threading.Lock()

    @classmethod
    def from_fixture(cls, path: str | Path) -> "MockClient":
        """Load a JSONL fixture of {record_id, auid, response_text} lines."""
        responses: dict[tuple[str, str], str] = {}
        with open(path, encoding="utf-8") as fh:
            for line, raw in enumerate(fh, start=1):
                raw = raw.strip()
                if not raw:
                    continue
                doc = json.loads(raw)
                try:
                    responses[(str(doc["record_id"]), str(doc["auid"]))] = doc["response_text"]
                except KeyError as exc:
                    raise ValueError(f"{path}:{line}: fixture line missing {exc}") from exc
        return cls(responses)

    @classmethod
    def from_gold(cls, pairs: Iterable, error_rate: float = 0.0, rng_seed: int = 0) -> "MockClient":
        """Answer according to the gold label, optionally flipping a seeded fraction."""
        rng = random.Random(rng_seed)
        responses: dict[tuple[str, str], str] = {}
        for pair in pairs:
            if pair.gold is None:
                continue
            answer = pair.gold
            if error_rate > 0 and rng.random() < error_rate:
                answer = not answer
            verdict = LlmVerdict(
                cerca_univ_id=pair.record.record_id,
                scopus_candidate_id=pair.auid,
                match=answer,
                explanation="mock verdict from gold label",
            )
            responses[(pair.record.record_id, pair.auid)] = verdict.to_json()
        return cls(responses)

    def complete(self, system: str, user: str, pair: tuple[str, str]) -> str:
        with self._lock:
            self.calls.append(pair)
        if pair not in self.responses:
            raise EndpointError(f"no mock response for pair {pair}")
        return self.responses[pair]


def write_gold_fixture(pairs: Iterable, path: str | Path, error_rate: float = 0.0,
                       rng_seed: int = 0) -> None:
    """Write a replayable JSONL fixture answering each gold pair."""
    client = MockClient.from_gold(pairs, error_rate=error_rate, rng_seed=rng_seed)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for (record_id, auid), text in sorted(client.responses.items()):
            fh.write(json.dumps({"record_id": record_id, "auid": auid,
                                 "response_text": text}) + "\n")


@dataclass(frozen=True)
class CallStats:
    """Bookkeeping for one judged pair."""

    attempts: int
    seconds: float


def judge(record: RegistryRecord, profile: AuthorProfile, config: PromptConfig,
          client: ChatClient, taxonomy: Taxonomy,
          evidence: EnrichmentEvidence | None = None,
          method: Method | None = None, max_retries: int = 3) -> tuple[Decision, CallStats]:
    """Render, call, parse; retry transport and parse failures.

    After `max_retries` failed attempts the pair is answered no, with the
    annotated failure in the explanation, rather than raising: one bad pair
    must not sink a batch run.
    """
    if evidence is not None and (evidence.bc is not None or evidence.ls is not None):
        prompt = render_enriched_prompt(record, profile, config, taxonomy, evidence)
        resolved_method = method or Method.LLM_ENRICHED
    else:
        prompt = render_prompt(record, profile, config, taxonomy)
        resolved_method = method or Method.LLM
    pair = (record.record_id, profile.auid)
    evidence_dict = evidence.to_dict() if evidence is not None else None
    score = evidence.bc.ratio if evidence is not None and evidence.bc is not None else None

    start = time.perf_counter()
    last_error: Exception | None = None
    for attempt in range(1, max_retries + 1):
        try:
            raw = client.complete(prompt.system, prompt.user, pair)
            verdict = parse_verdict(raw)
        except (EndpointError, NoJsonFound, MissingField, InvalidMatchValue) as exc:
            last_error = exc
            logger.warning("attempt %d/%d for pair %s failed: %s", attempt, max_retries, pair, exc)
            continue
        if (verdict.cerca_univ_id, verdict.scopus_candidate_id) != pair:
            logger.warning("model echoed ids %s for pair %s",
                           (verdict.cerca_univ_id, verdict.scopus_candidate_id), pair)
        elapsed = time.perf_counter() - start
        decision = Decision(record_id=record.record_id, auid=profile.auid,
                            verdict=Verdict.YES if verdict.match else Verdict.NO,
                            method=resolved_method, score=score,
                            explanation=verdict.explanation, evidence=evidence_dict)
        return decision, CallStats(attempts=attempt, seconds=elapsed)

    elapsed = time.perf_counter() - start
    annotation = (f"unusable model output after {max_retries} attempts: "
                  f"{type(last_error).__name__}: {last_error}")
    decision = Decision(record_id=record.record_id, auid=profile.auid, verdict=Verdict.NO,
                        method=resolved_method, score=score,
                        explanation=annotation, evidence=evidence_dict)
    return decision, CallStats(attempts=max_retries, seconds=elapsed)
