"""Seeded generator for synthetic registry/profile datasets.

The generator plants an unambiguous signal: every field gets a disjoint
reference pool, true candidates cite papers their field's seed authors also
cite, and homonyms are built from a different field's literature while
keeping the registry record in the claimed field. With the noise knob at
zero, citation overlap separates the two populations perfectly, which gives
tests a known-answer dataset of any size.

Same parameters, same bytes: all randomness flows from one seeded generator
and rows are emitted in a fixed order.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path

from .taxonomy import Taxonomy, load_taxonomy

FIRST_NAMES = ("Alessandro", "Beatrice", "Carlo", "Daniela", "Enrico", "Francesca",
               "Giorgio", "Ilaria", "Lorenzo", "Martina", "Nicola", "Ornella",
               "Paolo", "Roberta", "Stefano", "Valentina")
LAST_NAMES = ("Amato", "Barbieri", "Caruso", "De Luca", "Esposito", "Ferrari",
              "Gallo", "Leone", "Marini", "Pellegrini", "Ricci", "Santoro",
              "Testa", "Vitale")
UNIVERSITIES = ("University of Bologna", "Sapienza University of Rome",
                "University of Padua", "Polytechnic of Milan", "University of Naples",
                "University of Turin", "University of Pisa", "University of Florence")
ROLES = ("PO", "PA", "RU")
KEYWORD_STEMS = ("models", "networks", "analysis", "systems", "methods",
                 "dynamics", "estimation", "optimization", "structures", "signals")


class ParamError(ValueError):
    """Generator parameters are out of range or inconsistent."""


@dataclass(frozen=True)
class SynthParams:
    """Knobs for one synthetic dataset.

    homonym_rate is the probability a candidate is a namesake from another
    field; cross_field_ref_noise swaps that fraction of every candidate's
    references for out-of-field ones, eroding the planted separation.
    """

    rng_seed: int = 0
    n_fields: int = 4
    seeds_per_field: int = 3
    candidates_per_field: int = 6
    homonym_rate: float = 0.3
    papers_per_author: int = 5
    refs_per_paper: int = 12
    field_pool_size: int = 400
    cross_field_ref_noise: float = 0.0
    coauthor_degree: int = 2
    start_year: int = 2016
    end_year: int = 2023

    def __post_init__(self) -> None:
        if self.n_fields < 2:
            raise ParamError("n_fields must be at least 2 so homonyms have a source field")
        for name in ("seeds_per_field", "candidates_per_field", "papers_per_author",
                     "refs_per_paper", "field_pool_size"):
            if getattr(self, name) < 1:
                raise ParamError(f"{name} must be positive")
        for name in ("homonym_rate", "cross_field_ref_noise"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParamError(f"{name} must be in [0, 1], got {value}")
        if self.coauthor_degree < 0:
            raise ParamError("coauthor_degree must be nonnegative")
        if self.refs_per_paper > self.field_pool_size:
            raise ParamError("refs_per_paper cannot exceed field_pool_size")
        if self.start_year > self.end_year:
            raise ParamError("start_year must not exceed end_year")


@dataclass
class _Author:
    auid: str
    first: str
    last: str
    university: str
    field_idx: int
    pubs: list[dict]


def _person_name(rng: random.Random) -> tuple[str, str]:
    return rng.choice(FIRST_NAMES), rng.choice(LAST_NAMES)


def _make_pubs(rng: random.Random, auid: str, n_pubs: int, refs_per_paper: int,
               ref_source: list[str], coauthors: list[str],
               params: SynthParams, noise_pools: list[list[str]]) -> list[dict]:
    pubs = []
    for j in range(n_pubs):
        refs = rng.sample(ref_source, min(refs_per_paper, len(ref_source)))
        if params.cross_field_ref_noise > 0 and noise_pools:
            refs = [rng.choice(rng.choice(noise_pools))
                    if rng.random() < params.cross_field_ref_noise else ref
                    for ref in refs]
        chosen_coauthors = rng.sample(coauthors, min(params.coauthor_degree, len(coauthors)))
        pubs.append({
            "pub_id": f"{auid}-p{j}",
            "year": rng.randint(params.start_year, params.end_year),
            "title": f"{rng.choice(KEYWORD_STEMS).capitalize()} study {auid}-{j}",
            "keywords": rng.sample(KEYWORD_STEMS, 3),
            "references": sorted(set(refs)),
            "coauthor_auids": sorted(chosen_coauthors),
        })
    return pubs


def generate(params: SynthParams, out_dir: str | Path,
             taxonomy: Taxonomy | None = None) -> dict:
    """Write registry.csv, profiles.jsonl, seeds.csv, gold.csv, manifest.json.

    Returns the manifest dict. Output is byte-identical for equal params.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tax = taxonomy if taxonomy is not None else load_taxonomy()
    rng = random.Random(params.rng_seed)

    rf_codes = sorted(tax.rf_labels)
    if params.n_fields > len(rf_codes):
        raise ParamError(f"n_fields {params.n_fields} exceeds the {len(rf_codes)} known fields")
    fields = rng.sample(rf_codes, params.n_fields)
    ads_by_rf = {rf: sorted(ad for ad, owner in tax.ad_to_rf.items() if owner == rf)
                 for rf in fields}

    pools = [[f"ref F{idx:02d} {j:04d}" for j in range(params.field_pool_size)]
             for idx in range(params.n_fields)]

    next_auid = 1000000
    next_record = 1
    registry_rows: list[dict] = []
    seed_rows: list[dict] = []
    gold_rows: list[dict] = []
    authors: list[_Author] = []

    seeds_by_field: list[list[_Author]] = []
    for idx, rf in enumerate(fields):
        field_seeds: list[_Author] = []
        for _ in range(params.seeds_per_field):
            first, last = _person_name(rng)
            auid, next_auid = str(next_auid), next_auid + 1
            record_id, next_record = str(next_record), next_record + 1
            uni = rng.choice(UNIVERSITIES)
            author = _Author(auid, first, last, uni, idx, [])
            field_seeds.append(author)
            registry_rows.append({
                "record_id": record_id, "first_name": first, "last_name": last,
                "role": rng.choice(ROLES), "gender": "", "rf": rf,
                "ad": rng.choice(ads_by_rf[rf]) if ads_by_rf[rf] else "",
                "university": uni, "department": "", "year": str(params.end_year),
            })
            seed_rows.append({"record_id": record_id, "auid": auid, "rf": rf})
        seeds_by_field.append(field_seeds)

    # Seed publications cite straight from the field pool.
    for idx, field_seeds in enumerate(seeds_by_field):
        peer_auids = [a.auid for a in field_seeds]
        for author in field_seeds:
            coauthors = [a for a in peer_auids if a != author.auid]
            author.pubs = _make_pubs(rng, author.auid, params.papers_per_author,
                                     params.refs_per_paper, pools[idx], coauthors,
                                     params, noise_pools=[])
            authors.append(author)

    seed_cited = [sorted({ref for a in field_seeds for p in a.pubs for ref in p["references"]})
                  for field_seeds in seeds_by_field]

    for idx, rf in enumerate(fields):
        for _ in range(params.candidates_per_field):
            first, last = _person_name(rng)
            auid, next_auid = str(next_auid), next_auid + 1
            record_id, next_record = str(next_record), next_record + 1
            uni = rng.choice(UNIVERSITIES)
            is_homonym = rng.random() < params.homonym_rate
            source_idx = idx
            if is_homonym:
                source_idx = rng.choice([k for k in range(params.n_fields) if k != idx])
            source_refs = seed_cited[source_idx]
            colleagues = [a.auid for a in seeds_by_field[source_idx]]
            noise_pools = [pools[k] for k in range(params.n_fields) if k != source_idx]
            author = _Author(auid, first, last, uni, source_idx, [])
            author.pubs = _make_pubs(rng, auid, params.papers_per_author,
                                     params.refs_per_paper, source_refs, colleagues,
                                     params, noise_pools=noise_pools)
            authors.append(author)
            ad = rng.choice(ads_by_rf[rf]) if ads_by_rf[rf] else ""
            registry_rows.append({
                "record_id": record_id, "first_name": first, "last_name": last,
                "role": rng.choice(ROLES), "gender": "", "rf": rf, "ad": ad,
                "university": uni, "department": "", "year": str(params.end_year),
            })
            gold_rows.append({
                "record_id": record_id, "first_name": first, "last_name": last,
                "rf": rf, "ad": ad, "university": uni, "auid": auid,
                "correct": "0" if is_homonym else "1",
            })

    _write_csv(out / "registry.csv",
               ["record_id", "first_name", "last_name", "role", "gender", "rf", "ad",
                "university", "department", "year"], registry_rows)
    _write_csv(out / "seeds.csv", ["record_id", "auid", "rf"], seed_rows)
    _write_csv(out / "gold.csv",
               ["record_id", "first_name", "last_name", "rf", "ad", "university",
                "auid", "correct"], gold_rows)

    with open(out / "profiles.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for author in authors:
            fh.write(json.dumps({
                "auid": author.auid,
                "given_name": author.first,
                "surname": author.last,
                "initials": author.first[0] + ".",
                "full_name": f"{author.last}, {author.first}",
                "affiliations": [author.university],
                "publications": author.pubs,
            }) + "\n")

    manifest = {
        "params": asdict(params),
        "fields": fields,
        "n_registry": len(registry_rows),
        "n_profiles": len(authors),
        "n_seeds": len(seed_rows),
        "n_gold": len(gold_rows),
        "n_true": sum(1 for row in gold_rows if row["correct"] == "1"),
        "n_homonym": sum(1 for row in gold_rows if row["correct"] == "0"),
    }
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
