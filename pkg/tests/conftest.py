"""Shared builders for compact in-memory datasets."""

from __future__ import annotations

import pytest

from authorlink.ingest import Dataset, SeedAlignment
from authorlink.model import AuthorProfile, CandidatePair, Publication, RegistryRecord
from authorlink.taxonomy import load_taxonomy, parse_rf


def make_pub(pub_id: str, year: int = 2020, refs=(), coauthors=(), title=None,
             keywords=("kw",), abstract=None) -> Publication:
    return Publication(pub_id=pub_id, year=year, title=title or f"Title {pub_id}",
                       keywords=tuple(keywords), references=tuple(refs),
                       coauthor_auids=tuple(coauthors), abstract=abstract)


def make_profile(auid: str, pubs=(), given="Anna", surname="Bianchi",
                 university="University of Pisa") -> AuthorProfile:
    return AuthorProfile(auid=auid, given_name=given, surname=surname,
                         initials=given[0] + ".", full_name=f"{surname}, {given}",
                         affiliations=(university,), publications=tuple(pubs))


def make_record(record_id: str, rf="09/E3", ad="ING-INF/01", first="Anna",
                last="Bianchi", university="University of Pisa",
                year=2022) -> RegistryRecord:
    return RegistryRecord(record_id=record_id, first_name=first, last_name=last,
                          role="RU", rf=parse_rf(rf), ad=ad, university=university,
                          year=year)


@pytest.fixture(scope="session")
def taxonomy():
    return load_taxonomy()


@pytest.fixture
def two_field_dataset() -> Dataset:
    """Two fields with planted separation and one homonym candidate.

    Field 09/E3 seeds cite a1..a6; field 01/B1 seed cites b1..b3. Candidate
    c_true shares field-A references and a co-author; c_homonym looks like
    field B while its registry record claims field A.
    """
    rf_a, rf_b = "09/E3", "01/B1"
    profiles = {
        "s1": make_profile("s1", [make_pub("p1", 2020, ["a1", "a2", "a3"], ["c_true"])],
                           given="Marco", surname="Verdi"),
        "s2": make_profile("s2", [make_pub("p2", 2021, ["a4", "a5", "a6"], [])],
                           given="Elena", surname="Greco"),
        "s3": make_profile("s3", [make_pub("p3", 2020, ["b1", "b2", "b3"], ["c_homonym"])],
                           given="Luca", surname="Neri"),
        "c_true": make_profile("c_true", [make_pub("p4", 2021, ["a1", "a4", "x1", "x2"], ["s1"])],
                               given="Paola", surname="Russo"),
        "c_homonym": make_profile("c_homonym", [make_pub("p5", 2022, ["b1", "y1", "y2", "y3"], ["s3"])],
                                  given="Paola", surname="Russo"),
    }
    rec = make_record("r1", rf=rf_a, first="Paola", last="Russo")
    seeds = (SeedAlignment("sr1", "s1", parse_rf(rf_a)),
             SeedAlignment("sr2", "s2", parse_rf(rf_a)),
             SeedAlignment("sr3", "s3", parse_rf(rf_b)))
    gold = (CandidatePair(rec, "c_true", gold=True),
            CandidatePair(rec, "c_homonym", gold=False))
    return Dataset(records={"r1": rec}, profiles=profiles, seeds=seeds, gold=gold)
