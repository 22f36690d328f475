"""Bibliographic coupling between a candidate author and a field's literature.

For each recruitment field, the union of references cited by that field's
seed authors inside a time window forms the field corpus. A candidate is
scored by the share of their own in-window references that fall inside the
corpus; at or above the threshold the candidate is accepted as belonging to
the field.

Corpora are cheap to rebuild but repetitive across runs, so they can be
cached on disk, keyed by (field, window, seed set).
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .model import AuthorProfile, Verdict, round_half_up
from .taxonomy import RFCode

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeWindow:
    """Inclusive publication-year window, e.g. 2016..2023."""

    start_year: int
    end_year: int

    def __post_init__(self) -> None:
        if self.start_year > self.end_year:
            raise ValueError(f"window start {self.start_year} after end {self.end_year}")

    def contains(self, year: int) -> bool:
        return self.start_year <= year <= self.end_year

    def __str__(self) -> str:
        return f"{self.start_year}:{self.end_year}"

    @classmethod
    def parse(cls, text: str) -> "TimeWindow":
        """Parse the "start:end" form used on the command line."""
        try:
            start, _, end = text.partition(":")
            return cls(int(start), int(end))
        except ValueError as exc:
            raise ValueError(f"expected start:end window, got {text!r}") from exc


def seed_set_hash(seed_auids: Iterable[str]) -> str:
    """Stable digest of a seed author set, independent of input order."""
    digest = hashlib.sha256()
    for auid in sorted(set(seed_auids)):
        digest.update(auid.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()


@dataclass(frozen=True)
class FieldCorpus:
    """Union of references cited by a field's seed authors within a window.

    `is_empty` flags a degenerate corpus (no seed authors or none of their
    papers fall in the window); classification against it always says no.
    """

    rf: RFCode
    window: TimeWindow
    n_seed_authors: int
    n_papers: int
    references: frozenset[str]
    seed_hash: str

    @property
    def is_empty(self) -> bool:
        return not self.references


@dataclass(frozen=True)
class CandidateRefs:
    """A candidate's distinct in-window references plus the paper count behind them."""

    n_papers: int
    references: frozenset[str]


@dataclass(frozen=True)
class OverlapResult:
    """Outcome of scoring one candidate against one field corpus.

    ratio = n_shared / n_cited over distinct references. A candidate with no
    in-window references cannot be scored; such results carry ratio 0.0 and
    degenerate=True.
    """

    n_papers: int
    n_cited: int
    n_shared: int
    ratio: float
    degenerate: bool = False

    @property
    def percent_shared(self) -> float:
        """Display form of the ratio: percent, half-up to one decimal."""
        return round_half_up(self.ratio * 100.0, 1)


def build_field_corpus(seed_profiles: Iterable[AuthorProfile], rf: RFCode,
                       window: TimeWindow, exclude_auid: str | None = None) -> FieldCorpus:
    """Build the field corpus from seed author profiles.

    `exclude_auid` drops one seed author before the union, so a candidate who
    is also a seed never matches against their own citations. An empty seed
    list yields a corpus flagged via `is_empty` rather than an error.
    """
    refs: set[str] = set()
    pub_ids: set[str] = set()
    n_authors = 0
    for profile in seed_profiles:
        if exclude_auid is not None and profile.auid == exclude_auid:
            continue
        n_authors += 1
        for pub in profile.publications:
            if window.contains(pub.year):
                pub_ids.add(pub.pub_id)
                refs.update(pub.references)
    corpus = FieldCorpus(
        rf=rf, window=window, n_seed_authors=n_authors, n_papers=len(pub_ids),
        references=frozenset(refs),
        seed_hash=seed_set_hash(p.auid for p in seed_profiles
                                if exclude_auid is None or p.auid != exclude_auid),
    )
    if corpus.is_empty:
        logger.warning("field corpus %s %s is empty (%d seed authors)", rf, window, n_authors)
    return corpus


def candidate_reference_set(profile: AuthorProfile, window: TimeWindow) -> CandidateRefs:
    """Collect a candidate's distinct references across in-window publications."""
    refs: set[str] = set()
    n_papers = 0
    for pub in profile.publications:
        if window.contains(pub.year):
            n_papers += 1
            refs.update(pub.references)
    return CandidateRefs(n_papers=n_papers, references=frozenset(refs))


def overlap(candidate: CandidateRefs, corpus: FieldCorpus) -> OverlapResult:
    """Score the candidate's reference overlap against the corpus."""
    n_cited = len(candidate.references)
    if n_cited == 0:
        return OverlapResult(n_papers=candidate.n_papers, n_cited=0, n_shared=0,
                             ratio=0.0, degenerate=True)
    n_shared = len(candidate.references & corpus.references)
    return OverlapResult(n_papers=candidate.n_papers, n_cited=n_cited,
                         n_shared=n_shared, ratio=n_shared / n_cited)


def bc_classify(result: OverlapResult, threshold: float) -> Verdict:
    """Threshold rule: yes when the raw ratio reaches the threshold.

    Equality counts as a match; degenerate results never do.
    """
    if result.degenerate:
        return Verdict.NO
    return Verdict.YES if result.ratio >= threshold else Verdict.NO


# ---------------------------------------------------------------------------
# Disk cache. One text file per (field, window, seed set): a JSON header line
# carrying the identity and counts, then one canonical reference per line,
# sorted, so identical corpora produce identical bytes.

def _corpus_filename(rf: RFCode, window: TimeWindow, seed_hash: str) -> str:
    return f"corpus_{rf.area}{rf.group}{rf.field}_{window.start_year}-{window.end_year}_{seed_hash[:12]}.txt"


def save_corpus(corpus: FieldCorpus, cache_dir: str | Path) -> Path:
    """Write the corpus to the cache directory; returns the file path."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / _corpus_filename(corpus.rf, corpus.window, corpus.seed_hash)
    header = {
        "rf": str(corpus.rf),
        "start_year": corpus.window.start_year,
        "end_year": corpus.window.end_year,
        "n_seed_authors": corpus.n_seed_authors,
        "n_papers": corpus.n_papers,
        "n_references": len(corpus.references),
        "seed_hash": corpus.seed_hash,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for ref in sorted(corpus.references):
            fh.write(ref + "\n")
    return path


def load_corpus(path: str | Path) -> FieldCorpus:
    """Read a corpus file written by `save_corpus`."""
    from .taxonomy import parse_rf

    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: corrupt corpus header: {exc}") from exc
        refs = frozenset(line.rstrip("\n") for line in fh if line.strip())
    corpus = FieldCorpus(
        rf=parse_rf(header["rf"]),
        window=TimeWindow(header["start_year"], header["end_year"]),
        n_seed_authors=header["n_seed_authors"],
        n_papers=header["n_papers"],
        references=refs,
        seed_hash=header["seed_hash"],
    )
    if len(refs) != header["n_references"]:
        raise ValueError(f"{path}: header claims {header['n_references']} references, file has {len(refs)}")
    return corpus


def fetch_or_build_corpus(seed_profiles: list[AuthorProfile], rf: RFCode, window: TimeWindow,
                          cache_dir: str | Path | None = None,
                          exclude_auid: str | None = None) -> FieldCorpus:
    """Return the cached corpus when present and identical in identity, else build (and cache)."""
    effective = [p.auid for p in seed_profiles if exclude_auid is None or p.auid != exclude_auid]
    if cache_dir is not None:
        path = Path(cache_dir) / _corpus_filename(rf, window, seed_set_hash(effective))
        if path.exists():
            return load_corpus(path)
    corpus = build_field_corpus(seed_profiles, rf, window, exclude_auid=exclude_auid)
    if cache_dir is not None:
        save_corpus(corpus, cache_dir)
    return corpus
