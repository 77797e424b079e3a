"""Ontology identifier table.

Every NFDICore, OBO and schema.org identifier the pipeline matches or
emits lives in one shipped Turtle file (``rules/vocabulary.ttl``) so the
full set can be audited without reading code.  The table is closed: rule
packs and shape files are checked against it when they are loaded, and a
reference to anything outside it (other than the core rdf: and xsd:
namespaces) fails fast.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cache
from importlib import resources
from typing import Iterable, Mapping

from .rdf import RDF_NS, XSD, Iri, Literal, parse_turtle_subset

SCHEMA = "http://schema.org/"
NFDICORE = "https://nfdi.fiz-karlsruhe.de/ontology/"
OBO = "http://purl.obolibrary.org/obo/"

#: Namespaces table entries may come from.
PREFIXES: Mapping[str, str] = {
    "schema": SCHEMA,
    "nfdicore": NFDICORE,
    "obo": OBO,
}

# Always known, never listed in the table.
_EXEMPT = (RDF_NS, XSD)

_SHORT_NAME = Iri("urn:x-kgforge:vocab:shortName")
_LABEL = Iri("urn:x-kgforge:vocab:label")


class UnknownTermError(LookupError):
    """A short name or IRI the vocabulary table does not cover."""


@dataclass(frozen=True, slots=True)
class VocabTable:
    """Immutable map from short names like ``obo:CHEBI_59999`` to IRIs."""

    entries: Mapping[str, Iri]
    labels: Mapping[str, str]

    @classmethod
    def from_turtle(cls, text: str) -> VocabTable:
        graph = parse_turtle_subset(text)
        entries: dict[str, Iri] = {}
        label_of: dict[Iri, str] = {}
        for t in graph.match(None, _LABEL, None):
            if isinstance(t.subject, Iri) and isinstance(t.object, Literal):
                label_of[t.subject] = t.object.lexical
        for t in graph.match(None, _SHORT_NAME, None):
            if not isinstance(t.subject, Iri) or not isinstance(t.object, Literal):
                raise ValueError("vocabulary entries must map an IRI to a string name")
            name = t.object.lexical
            if name in entries:
                raise ValueError(f"duplicate vocabulary short name: {name}")
            if not t.subject.value.startswith(tuple(PREFIXES.values())):
                raise ValueError(
                    f"vocabulary IRI outside the allowed namespaces: {t.subject.value}"
                )
            entries[name] = t.subject
        labels = {
            name: label_of[iri] for name, iri in entries.items() if iri in label_of
        }
        return cls(entries=entries, labels=labels)

    def resolve(self, short_name: str) -> Iri:
        try:
            return self.entries[short_name]
        except KeyError:
            raise UnknownTermError(f"unknown vocabulary term: {short_name!r}") from None

    def require_known(self, iris: Iterable[Iri], origin: str) -> None:
        """Fail fast when *origin* references identifiers outside the table."""
        known = {iri.value for iri in self.entries.values()}
        missing = sorted(
            value
            for value in {iri.value for iri in iris}
            if not value.startswith(_EXEMPT) and value not in known
        )
        if missing:
            raise UnknownTermError(
                f"{origin} references identifiers missing from the vocabulary "
                f"table: {', '.join(missing)}"
            )


@cache
def load_table() -> VocabTable:
    """The packaged table, parsed once per process."""
    text = (
        resources.files(__package__)
        .joinpath("rules/vocabulary.ttl")
        .read_text(encoding="utf-8")
    )
    return VocabTable.from_turtle(text)
