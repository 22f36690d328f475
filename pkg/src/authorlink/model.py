"""Core domain types shared across the package.

Two record universes are linked here: registry rows describing researchers
employed at Italian universities, and bibliographic author profiles keyed by
an author identifier (auid). Every other module builds on these types, so
they are all immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .taxonomy import RFCode


class InvalidReference(ValueError):
    """Raised when a reference identifier is empty after canonicalization."""


def canonicalize_reference(raw: str) -> str:
    """Canonicalize a cited-work identifier.

    Whitespace is trimmed and the identifier is case-folded so that the same
    work cited with different casing collapses to one key. The function is
    idempotent: applying it twice equals applying it once.

    Parameters
    ----------
    raw : str
        Reference identifier as found in the source data.

    Returns
    -------
    str
        Canonical form used for all set arithmetic.

    Raises
    ------
    InvalidReference
        If the identifier is empty or whitespace-only.
    """
    canonical = raw.strip().casefold()
    if not canonical:
        raise InvalidReference(f"empty reference identifier: {raw!r}")
    return canonical


def round_half_up(value: float, ndigits: int = 1) -> float:
    """Round with ties away from zero, the convention used for reported figures.

    Built-in round() ties to even (96.25 -> 96.2); reported percentages tie
    upward (96.25 -> 96.3). Rounding happens at display time only; raw
    fractions stay untouched everywhere else.
    """
    q = Decimal(1).scaleb(-ndigits)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


def dedupe_references(raws: list[str] | tuple[str, ...]) -> tuple[str, ...]:
    """Canonicalize a reference list and drop duplicates, keeping first-seen order."""
    seen: set[str] = set()
    out: list[str] = []
    for raw in raws:
        ref = canonicalize_reference(raw)
        if ref not in seen:
            seen.add(ref)
            out.append(ref)
    return tuple(out)


class Verdict(str, enum.Enum):
    """Outcome of judging one (registry record, candidate auid) pair."""

    YES = "yes"
    NO = "no"
    ABSTAIN = "abstain"


class Method(str, enum.Enum):
    """Which decision procedure produced a verdict.

    The two LEAD_* tags mark the stage of the escalation pipeline that
    settled the pair: the cheap citation-overlap stage, or the language-model
    stage that below-threshold pairs escalate to.
    """

    BC = "BC"
    LS = "LS"
    LLM = "LLM"
    LLM_ENRICHED = "LLM_ENRICHED"
    LEAD_BC_STAGE = "LEAD_BC_STAGE"
    LEAD_LLM_STAGE = "LEAD_LLM_STAGE"


@dataclass(frozen=True)
class RegistryRecord:
    """One researcher row from the university staff registry.

    Attributes
    ----------
    record_id : str
        Registry-side identifier, unique within a dataset.
    first_name, last_name : str
        Name as recorded by the registry.
    role : str
        Academic role (researcher, associate, full professor, ...).
    gender : str or None
        Optional; empty in many exports.
    rf : RFCode
        Recruitment field (e.g. "09/E3"), parsed.
    ad : str
        Academic discipline code (e.g. "ING-INF/01"). Opaque key.
    university : str
        Employing institution.
    department : str or None
        Optional department name.
    year : int
        Registry snapshot year; the registry is post-2000.
    """

    record_id: str
    first_name: str
    last_name: str
    role: str
    rf: RFCode
    ad: str
    university: str
    year: int
    gender: str | None = None
    department: str | None = None

    def __post_init__(self) -> None:
        if self.year < 2000:
            raise ValueError(f"registry year {self.year} predates the registry")


@dataclass(frozen=True)
class Publication:
    """One paper inside an author profile.

    References are stored canonicalized and deduplicated; `coauthor_auids`
    lists the other author identifiers on the paper, when known.
    """

    pub_id: str
    year: int
    title: str
    keywords: tuple[str, ...] = ()
    references: tuple[str, ...] = ()
    coauthor_auids: tuple[str, ...] = ()
    abstract: str | None = None

    def __post_init__(self) -> None:
        if self.year <= 1900:
            raise ValueError(f"implausible publication year {self.year}")
        object.__setattr__(self, "keywords", tuple(self.keywords))
        object.__setattr__(self, "references", dedupe_references(self.references))
        object.__setattr__(self, "coauthor_auids", tuple(self.coauthor_auids))


@dataclass(frozen=True)
class AuthorProfile:
    """A bibliographic author profile: identity attributes plus publications.

    Publications are kept sorted ascending by year (ties keep input order),
    which is the order prompts and overlap scans rely on.
    """

    auid: str
    given_name: str = ""
    surname: str = ""
    initials: str = ""
    full_name: str = ""
    affiliations: tuple[str, ...] = ()
    publications: tuple[Publication, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "affiliations", tuple(self.affiliations))
        pubs = tuple(sorted(self.publications, key=lambda p: p.year))
        object.__setattr__(self, "publications", pubs)


@dataclass(frozen=True)
class CandidatePair:
    """A (registry record, candidate auid) pair to be judged.

    `gold` carries the manually verified answer when known: True for a
    correct match, False for an incorrect one, None when unlabeled.
    """

    record: RegistryRecord
    auid: str
    gold: bool | None = None


@dataclass(frozen=True)
class Decision:
    """Verdict for one pair, with provenance.

    `score` is the citation-overlap ratio whenever the method consulted it;
    `evidence` carries the structured enrichment block (bc/ls stats) that was
    shown to, or computed for, the judge.
    """

    record_id: str
    auid: str
    verdict: Verdict
    method: Method
    score: float | None = None
    explanation: str | None = None
    evidence: dict | None = None

    def to_json_dict(self) -> dict:
        """Wire form for decisions.jsonl; optional fields omitted when absent."""
        out: dict = {
            "record_id": self.record_id,
            "auid": self.auid,
            "verdict": self.verdict.value,
            "method": self.method.value,
        }
        if self.score is not None:
            out["score"] = self.score
        if self.explanation is not None:
            out["explanation"] = self.explanation
        if self.evidence is not None:
            out["evidence"] = self.evidence
        return out
