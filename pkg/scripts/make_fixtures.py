#!/usr/bin/env python3
"""Regenerate the synthetic record corpus under fixtures/records/.

The corpus is fully deterministic: 50 records covering 25 compounds with
two analyses each ("Raman" and "1H NMR").  Every value is synthetic; the
shapes mirror what the repository API emits but no record corresponds to
a real deposition.

Design of the corpus, so tests can hand-count expectations:

* record i (0..49) describes compound c = i // 2; even i is the Raman
  analysis, odd i the 1H NMR one
* record 0 is submitted 2014-05-17 and is the only 2014-05 record; the
  other 49 get unique dates spread over 2014-06 .. 2014-10, ten per
  month (nine in October), so the corpus spans six monthly partitions
* ten creators rotate over records (record i -> creator i % 10), each
  with a fixed ORCID and an affiliation with one of three organizations
* every record carries its own study (CRD-1 .. CRD-50) and publication
  date equal to its submission date
* compounds 0..9 additionally carry a substance block (substance,
  molecular entity, InChIKey, molecular weight, structure image), so 20
  records mention substances but only 10 distinct substances exist
"""

from __future__ import annotations

import json
import string
from datetime import date
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
RECORDS = ROOT / "fixtures" / "records"

REPO = "https://www.chemotion-repository.net"

FIRST_NAMES = ["Mia", "Noah", "Ada", "Leo", "Zoe", "Kai", "Ivy", "Max", "Una", "Eli"]

ANALYSES = [
    ("Raman", "Raman spectroscopy"),
    ("1H NMR", "1H nuclear magnetic resonance spectroscopy"),
]


def inchikey(compound: int) -> str:
    """A deterministic, InChIKey-shaped identifier for a compound."""
    if compound == 0:
        return "VRYFQVRFMNXTJS-UHFFFAOYSA-N"
    letters = []
    n = compound
    while n:
        n, r = divmod(n, 26)
        letters.append(string.ascii_uppercase[r])
    block = "".join(reversed(letters)).rjust(14, "A")
    return f"{block}-UHFFFAOYSA-N"


def submitted(i: int) -> date:
    if i == 0:
        return date(2014, 5, 17)
    month = 6 + (i - 1) // 10
    day = 3 + 2 * ((i - 1) % 10)
    return date(2014, month, day)


def build_envelope(i: int) -> dict:
    compound = i // 2
    key = inchikey(compound)
    analysis, technique = ANALYSES[i % 2]
    creator = i % 10
    org = creator % 3
    when = submitted(i)

    metadata = {
        "@type": "Dataset",
        "creator": {
            "@id": f"https://orcid.org/0000-0002-1825-{97 + creator:04d}",
            "@type": "Person",
            "name": f"{FIRST_NAMES[creator]} Example",
            "identifier": f"0000-0002-1825-{97 + creator:04d}",
            "affiliation": {
                "@id": f"https://ror.org/0example{org}",
                "@type": "Organization",
                "name": f"Example Institute {org}",
            },
        },
        "publisher": {"@id": REPO},
        "description": f"{analysis} spectrum of compound {compound:02d}",
        "identifier": f"CRD-{i + 1}",
        "license": {"@id": "https://creativecommons.org/licenses/by-sa/4.0/"},
        "measurementTechnique": technique,
        "name": f"{analysis} Spectrum",
        "url": f"{REPO}/inchikey/{key}",
        "includedInDataCatalog": {"@id": f"{REPO}/catalog"},
        "datePublished": when.isoformat(),
        "isPartOf": {
            "@id": f"{REPO}/studies/CRD-{i + 1}",
            "@type": "Study",
            "publishingPrinciples": {"@id": "https://www.go-fair.org/fair-principles/"},
        },
    }
    if compound < 10:
        metadata["isPartOf"]["about"] = {
            "@id": f"{REPO}/substances/{key}",
            "@type": "ChemicalSubstance",
            "hasBioChemEntityPart": {
                "@id": f"{REPO}/molecules/{key}",
                "@type": "MolecularEntity",
                "inChIKey": key,
                "molecularWeight": float(f"{100 + compound}.19"),
                "image": f"{REPO}/images/{key}.svg",
            },
        }
    return {
        "id": f"10.14272/{key}/{analysis}",
        "submitted": when.isoformat(),
        "metadata": metadata,
    }


def main() -> None:
    RECORDS.mkdir(parents=True, exist_ok=True)
    for i in range(50):
        path = RECORDS / f"rec_{i:02d}.json"
        path.write_text(
            json.dumps(build_envelope(i), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    print(f"wrote 50 records to {RECORDS}")


if __name__ == "__main__":
    main()
