"""Italian academic classification: areas, field groups, fields, disciplines.

The hierarchy has four levels. A scientific area (SA, two digits "01".."14")
contains recruitment field groups (RFG, rendered "AA/G"), each containing
recruitment fields (RF, "AA/GF"), each mapping to one or more academic
disciplines (AD, opaque codes such as "ING-INF/01"). Coarsening an RF code is
a pure prefix projection; refining to AD level needs an explicit AD code.

A bundled table ships with the package (one CSV row per RF with its labels
and AD codes); `load_taxonomy` reads it or a user-supplied file in the same
format.
"""

from __future__ import annotations

import csv
import enum
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

logger = logging.getLogger(__name__)

_RF_RE = re.compile(r"^(0[1-9]|1[0-4])/([A-Z])(\d)$")


class InvalidRFCode(ValueError):
    """Raised when a recruitment field code does not parse."""


class MissingAD(ValueError):
    """Raised when a projection to discipline level lacks an AD code."""


class Granularity(enum.Enum):
    """Level of the classification hierarchy a code is projected to."""

    SA = "sa"
    RFG = "rfg"
    RF = "rf"
    AD = "ad"


@dataclass(frozen=True)
class RFCode:
    """Parsed recruitment field code.

    `area` keeps its leading zero ("01".."14"), `group` is a single uppercase
    letter, `field` a single digit. str() renders back to the exact "AA/GF"
    input form.
    """

    area: str
    group: str
    field: str

    def __str__(self) -> str:
        return f"{self.area}/{self.group}{self.field}"

    @property
    def rfg(self) -> str:
        """The field-group prefix, "AA/G" form."""
        return f"{self.area}/{self.group}"


def parse_rf(code: str) -> RFCode:
    """Parse an "AA/GF" recruitment field code.

    Raises
    ------
    InvalidRFCode
        On malformed shape, area outside 01..14, lowercase group letter, or
        a non-digit field position.
    """
    m = _RF_RE.match(code)
    if m is None:
        raise InvalidRFCode(f"not a valid recruitment field code: {code!r}")
    return RFCode(area=m.group(1), group=m.group(2), field=m.group(3))


def project(code: RFCode, level: Granularity, ad: str | None = None) -> str:
    """Project a recruitment field code to a coarser or finer level.

    SA/RFG/RF levels derive from the code itself; AD level returns the given
    discipline code unchanged.

    Raises
    ------
    MissingAD
        If `level` is AD and no `ad` code was supplied.
    """
    if level is Granularity.SA:
        return code.area
    if level is Granularity.RFG:
        return code.rfg
    if level is Granularity.RF:
        return str(code)
    if ad is None or ad == "":
        raise MissingAD(f"discipline-level projection of {code} requires an AD code")
    return ad


@dataclass(frozen=True)
class Taxonomy:
    """The loaded classification table.

    Lookups are by rendered code: `sa_labels["09"]`, `rfg_labels["09/E"]`,
    `rf_labels["09/E3"]`, `ad_to_rf["ING-INF/01"] == "09/E3"`.
    """

    sa_labels: dict[str, str]
    rfg_labels: dict[str, str]
    rf_labels: dict[str, str]
    ad_to_rf: dict[str, str]
    source: str = field(default="", compare=False)

    def counts_by_area(self) -> dict[str, tuple[int, int, int]]:
        """Per-area (n_field_groups, n_fields, n_disciplines) tallies."""
        out: dict[str, list] = {area: [set(), 0, 0] for area in self.sa_labels}
        for rfg in self.rfg_labels:
            out[rfg[:2]][0].add(rfg)
        for rf in self.rf_labels:
            out[rf[:2]][1] += 1
        for ad, rf in self.ad_to_rf.items():
            out[rf[:2]][2] += 1
        return {area: (len(g), n_rf, n_ad) for area, (g, n_rf, n_ad) in out.items()}

    def describe_field(self, rf: str | RFCode | None = None, ad: str | None = None) -> str:
        """Human-readable description of a record's academic field.

        Resolution order: the discipline's owning field label (via `ad`),
        then the record's own field label (via `rf`), then the raw AD code as
        a last resort (logged, since it means the table does not know the
        code).
        """
        if ad:
            owner = self.ad_to_rf.get(ad)
            if owner is not None and owner in self.rf_labels:
                return self.rf_labels[owner]
        if rf is not None:
            label = self.rf_labels.get(str(rf))
            if label is not None:
                return label
        fallback = ad if ad else str(rf)
        logger.warning("no label for field %r; falling back to raw code", fallback)
        return str(fallback)


def load_taxonomy(path: str | Path | None = None) -> Taxonomy:
    """Load a taxonomy table from CSV; the bundled table when no path given.

    Expected columns: rf_code, rf_label, rfg_label, sa_label, ad_codes
    (ad_codes semicolon-separated, possibly empty).

    Raises
    ------
    InvalidRFCode
        If any rf_code cell does not parse.
    ValueError
        On missing columns, duplicate rf_code rows, or an AD code claimed by
        two fields.
    """
    if path is None:
        ref = resources.files("authorlink").joinpath("data/taxonomy_it.csv")
        with resources.as_file(ref) as bundled:
            return _read_taxonomy(Path(bundled), source="bundled")
    return _read_taxonomy(Path(path), source=str(path))


def _read_taxonomy(path: Path, source: str) -> Taxonomy:
    sa_labels: dict[str, str] = {}
    rfg_labels: dict[str, str] = {}
    rf_labels: dict[str, str] = {}
    ad_to_rf: dict[str, str] = {}
    required = {"rf_code", "rf_label", "rfg_label", "sa_label", "ad_codes"}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{source}: expected columns {sorted(required)}, got {reader.fieldnames}")
        for i, row in enumerate(reader, start=2):
            code = parse_rf(row["rf_code"])
            rendered = str(code)
            if rendered in rf_labels:
                raise ValueError(f"{source}:{i}: duplicate field code {rendered}")
            rf_labels[rendered] = row["rf_label"]
            rfg_labels[code.rfg] = row["rfg_label"]
            sa_labels[code.area] = row["sa_label"]
            for ad in filter(None, (s.strip() for s in row["ad_codes"].split(";"))):
                if ad in ad_to_rf:
                    raise ValueError(f"{source}:{i}: discipline {ad} already assigned to {ad_to_rf[ad]}")
                ad_to_rf[ad] = rendered
    return Taxonomy(sa_labels=sa_labels, rfg_labels=rfg_labels, rf_labels=rf_labels,
                    ad_to_rf=ad_to_rf, source=source)
