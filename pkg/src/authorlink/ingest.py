"""File loaders and dataset assembly.

Four inputs make a dataset:

* ``registry.csv``   one row per registry record
* ``profiles.jsonl`` one author profile per line
* ``seeds.csv``      verified (record_id, auid, rf) alignments used as
                     anchors by the graph methods
* ``gold.csv``       manually labeled candidate pairs for evaluation

Loaders validate shape eagerly and report the offending line number; cross-
file referential checks happen once, in `build_dataset`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

from .model import AuthorProfile, CandidatePair, Publication, RegistryRecord
from .taxonomy import InvalidRFCode, RFCode, parse_rf


class SchemaError(ValueError):
    """A row or line that violates the expected file schema."""

    def __init__(self, path: str | Path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = str(path)
        self.line = line
        self.reason = reason


class DuplicateAuid(SchemaError):
    """Two profile lines claim the same author identifier."""


class IntegrityError(ValueError):
    """A cross-file reference does not resolve."""


@dataclass(frozen=True)
class SeedAlignment:
    """A trusted record-to-author alignment used to anchor field corpora and seed labels."""

    record_id: str
    auid: str
    rf: RFCode


REGISTRY_COLUMNS = ["record_id", "first_name", "last_name", "role", "gender",
                    "rf", "ad", "university", "department", "year"]
SEED_COLUMNS = ["record_id", "auid", "rf"]
GOLD_COLUMNS = ["record_id", "first_name", "last_name", "rf", "ad",
                "university", "auid", "correct"]


def _open_csv(path: str | Path, required: list[str], column_map: dict[str, str] | None = None):
    """Yield (line_number, row_dict) pairs with columns renamed to canonical names."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        mapping = column_map or {}
        actual = {canonical: mapping.get(canonical, canonical) for canonical in required}
        missing = [col for col in actual.values() if col not in fields]
        if missing:
            raise SchemaError(path, 1, f"missing columns {missing} (have {fields})")
        for i, row in enumerate(reader, start=2):
            yield i, {canonical: row.get(col, "") or "" for canonical, col in actual.items()}


def load_registry(path: str | Path) -> list[RegistryRecord]:
    """Load registry records; duplicate record ids and bad rows are schema errors."""
    records: list[RegistryRecord] = []
    seen: set[str] = set()
    for line, row in _open_csv(path, REGISTRY_COLUMNS):
        if not row["record_id"]:
            raise SchemaError(path, line, "empty record_id")
        if row["record_id"] in seen:
            raise SchemaError(path, line, f"duplicate record_id {row['record_id']}")
        seen.add(row["record_id"])
        try:
            rf = parse_rf(row["rf"])
        except InvalidRFCode as exc:
            raise SchemaError(path, line, str(exc)) from exc
        try:
            year = int(row["year"])
        except ValueError as exc:
            raise SchemaError(path, line, f"year {row['year']!r} is not an integer") from exc
        try:
            records.append(RegistryRecord(
              record_id=row["record_id"], first_name=row["first_name"],
              last_name=row["last_name"], role=row["role"],
              gender=row["gender"] or None, rf=rf, ad=row["ad"],
              university=row["university"], department=row["department"] or None,
              year=year,
            ))
        except ValueError as exc:
            raise SchemaError(path, line, str(exc)) from exc
    return records


def load_profiles(path: str | Path) -> list[AuthorProfile]:
    """Load author profiles from JSON Lines.

    Publication lists come back sorted ascending by year and with references
    canonicalized; a repeated auid raises DuplicateAuid.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    profiles: list[AuthorProfile] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(path, line, f"invalid JSON: {exc}") from exc
            if not isinstance(doc, dict) or not doc.get("auid"):
                raise SchemaError(path, line, "profile object must carry an auid")
            auid = str(doc["auid"])
            if auid in seen:
                raise DuplicateAuid(path, line, f"duplicate auid {auid}")
            seen.add(auid)
            try:
                pubs = tuple(
                    Publication(
                        pub_id=str(p["pub_id"]),
                        year=int(p["year"]),
                        title=p.get("title", ""),
                        keywords=tuple(p.get("keywords", ())),
                        references=tuple(p.get("references", ())),
                        coauthor_auids=tuple(str(a) for a in p.get("coauthor_auids", ())),
                        abstract=p.get("abstract"),
                    )
                    for p in doc.get("publications", ())
                )
                profiles.append(AuthorProfile(
                    auid=auid,
                    given_name=doc.get("given_name", ""),
                    surname=doc.get("surname", ""),
                    initials=doc.get("initials", ""),
                    full_name=doc.get("full_name", ""),
                    affiliations=tuple(doc.get("affiliations", ())),
                    publications=pubs,
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(path, line, f"bad publication entry: {exc}") from exc
    return profiles


def load_seeds(path: str | Path) -> list[SeedAlignment]:
    """Load seed alignments; rf must parse, ids must be non-empty."""
    seeds: list[SeedAlignment] = []
    for line, row in _open_csv(path, SEED_COLUMNS):
        if not row["record_id"] or not row["auid"]:
            raise SchemaError(path, line, "seed rows need both record_id and auid")
        try:
            rf = parse_rf(row["rf"])
        except InvalidRFCode as exc:
            raise SchemaError(path, line, str(exc)) from exc
        seeds.append(SeedAlignment(record_id=row["record_id"], auid=row["auid"], rf=rf))
    return seeds


def load_gold(path: str | Path, column_map: dict[str, str] | None = None,
              default_year: int = 2000) -> list[CandidatePair]:
    """Load labeled candidate pairs.

    The correct column must be exactly "0" or "1". Gold rows carry a
    denormalized copy of the record fields; `build_dataset` later swaps in
    the canonical registry record. `column_map` renames expected columns to
    whatever the file actually uses (canonical name -> actual name).
    """
    pairs: list[CandidatePair] = []
    for line, row in _open_csv(path, GOLD_COLUMNS, column_map=column_map):
        if row["correct"] not in ("0", "1"):
            raise SchemaError(path, line, f"correct must be 0 or 1, got {row['correct']!r}")
        try:
            rf = parse_rf(row["rf"])
        except InvalidRFCode as exc:
            raise SchemaError(path, line, str(exc)) from exc
        record = RegistryRecord(
            record_id=row["record_id"], first_name=row["first_name"],
            last_name=row["last_name"], role="", rf=rf, ad=row["ad"],
            university=row["university"], year=default_year,
        )
        pairs.append(CandidatePair(record=record, auid=row["auid"], gold=row["correct"] == "1"))
    return pairs


@dataclass(frozen=True)
class Dataset:
    """All inputs cross-checked and indexed.

    records/profiles preserve file order in their dict values; gold pairs
    reference the canonical registry record objects.
    """

    records: dict[str, RegistryRecord]
    profiles: dict[str, AuthorProfile]
    seeds: tuple[SeedAlignment, ...]
    gold: tuple[CandidatePair, ...]


def build_dataset(records: list[RegistryRecord], profiles: list[AuthorProfile],
                  seeds: list[SeedAlignment], gold: list[CandidatePair]) -> Dataset:
    """Assemble and validate a dataset.

    Raises
    ------
    IntegrityError
        On duplicate ids, dangling record_id/auid references, or duplicate
        (record_id, auid) gold entries.
    """
    rec_index: dict[str, RegistryRecord] = {}
    for rec in records:
        if rec.record_id in rec_index:
            raise IntegrityError(f"duplicate record_id {rec.record_id}")
        rec_index[rec.record_id] = rec
    prof_index: dict[str, AuthorProfile] = {}
    for prof in profiles:
        if prof.auid in prof_index:
            raise IntegrityError(f"duplicate auid {prof.auid}")
        prof_index[prof.auid] = prof
    for seed in seeds:
        if seed.record_id not in rec_index:
            raise IntegrityError(f"seed record_id {seed.record_id} has no registry record")
        if seed.auid not in prof_index:
            raise IntegrityError(f"seed auid {seed.auid} has no profile")
    seen_pairs: set[tuple[str, str]] = set()
    resolved: list[CandidatePair] = []
    for pair in gold:
        rid = pair.record.record_id
        if rid not in rec_index:
            raise IntegrityError(f"gold record_id {rid} has no registry record")
        if pair.auid not in prof_index:
            raise IntegrityError(f"gold auid {pair.auid} has no profile")
        key = (rid, pair.auid)
        if key in seen_pairs:
            raise IntegrityError(f"duplicate gold pair {key}")
        seen_pairs.add(key)
        resolved.append(replace(pair, record=rec_index[rid]))
    return Dataset(records=rec_index, profiles=prof_index,
                   seeds=tuple(seeds), gold=tuple(resolved))


def load_dataset(registry_path: str | Path, profiles_path: str | Path,
                 seeds_path: str | Path, gold_path: str | Path,
                 gold_column_map: dict[str, str] | None = None) -> Dataset:
    """Load all four files and assemble a validated Dataset."""
    return build_dataset(
        load_registry(registry_path),
        load_profiles(profiles_path),
        load_seeds(seeds_path),
        load_gold(gold_path, column_map=gold_column_map),
    )
