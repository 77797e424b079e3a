"""Vocabulary table tests.

The expansion oracle is computed independently of the loader: a short
name ``pfx:local`` must expand to the namespace registered for ``pfx``
plus ``local``, so the shipped file cannot quietly map a name to the
wrong IRI.
"""

from __future__ import annotations

import pytest

from kgforge.rdf import RDF_TYPE, Iri
from kgforge.vocab import NFDICORE, OBO, PREFIXES, SCHEMA, UnknownTermError, VocabTable, load_table

# Names every deployment relies on; removing one from the shipped file is
# a breaking change, so the list is frozen here.
REQUIRED = [
    "nfdicore:NFDI_0000009",
    "nfdicore:NFDI_0001027",
    "nfdicore:NFDI_0000191",
    "nfdicore:NFDI_0001006",
    "nfdicore:NFDI_0000142",
    "nfdicore:NFDI_0000216",
    "nfdicore:NFDI_0001023",
    "nfdicore:NFDI_0000004",
    "nfdicore:NFDI_0000003",
    "nfdicore:NFDI_0000014",
    "nfdicore:NFDI_0000207",
    "nfdicore:NFDI_0000223",
    "obo:IAO_0000235",
    "obo:IAO_0000109",
    "obo:IAO_0000003",
    "obo:BFO_0000015",
    "obo:BFO_0000019",
    "obo:BFO_0000178",
    "obo:BFO_0000199",
    "obo:CHEBI_59999",
    "obo:CHEBI_23367",
    "bfo:has_participant",
    "bfo:realizes",
    "bfo:bearer_of",
    "schema:Dataset",
    "schema:Person",
    "schema:Study",
    "schema:ChemicalSubstance",
    "schema:creator",
    "schema:publisher",
    "schema:description",
    "schema:identifier",
    "schema:license",
    "schema:measurementTechnique",
    "schema:name",
    "schema:url",
    "schema:includedInDataCatalog",
    "schema:isPartOf",
]


class TestResolve:
    def test_dataset_class(self):
        assert load_table().resolve("nfdicore:NFDI_0000009") == Iri(
            "https://nfdi.fiz-karlsruhe.de/ontology/NFDI_0000009"
        )

    def test_chemical_substance(self):
        assert load_table().resolve("obo:CHEBI_59999") == Iri(
            "http://purl.obolibrary.org/obo/CHEBI_59999"
        )

    def test_unknown_name_is_an_error(self):
        with pytest.raises(UnknownTermError, match="schema:nope"):
            load_table().resolve("schema:nope")

    @pytest.mark.parametrize(
        "alias,expected",
        [
            ("bfo:has_participant", OBO + "BFO_0000057"),
            ("bfo:realizes", OBO + "BFO_0000055"),
            ("bfo:bearer_of", OBO + "BFO_0000053"),
        ],
    )
    def test_bfo_relation_aliases(self, alias, expected):
        assert load_table().resolve(alias) == Iri(expected)


class TestTableIntegrity:
    def test_required_names_present(self):
        table = load_table()
        missing = [name for name in REQUIRED if name not in table.entries]
        assert missing == []

    def test_short_names_expand_under_their_prefix(self):
        # Independent expansion check; bfo: names are deliberate aliases
        # for OBO relation IRIs and are exercised separately above.
        table = load_table()
        for name, iri in table.entries.items():
            prefix, local = name.split(":", 1)
            if prefix == "bfo":
                continue
            assert iri.value == PREFIXES[prefix] + local, name

    def test_every_entry_in_an_allowed_namespace(self):
        for iri in load_table().entries.values():
            assert iri.value.startswith((SCHEMA, NFDICORE, OBO))

    def test_every_entry_has_a_label(self):
        table = load_table()
        assert set(table.labels) == set(table.entries)

    def test_duplicate_short_name_rejected(self):
        text = (
            "@prefix v: <urn:x-kgforge:vocab:> .\n"
            "@prefix schema: <http://schema.org/> .\n"
            'schema:name v:shortName "schema:name" .\n'
            'schema:url v:shortName "schema:name" .\n'
        )
        with pytest.raises(ValueError, match="duplicate"):
            VocabTable.from_turtle(text)

    def test_foreign_namespace_rejected(self):
        text = (
            "@prefix v: <urn:x-kgforge:vocab:> .\n"
            '<http://example.org/thing> v:shortName "ex:thing" .\n'
        )
        with pytest.raises(ValueError, match="namespace"):
            VocabTable.from_turtle(text)


class TestRequireKnown:
    def test_listed_identifiers_pass(self):
        table = load_table()
        table.require_known(
            [table.resolve("schema:creator"), Iri(RDF_TYPE)], "test rule"
        )

    def test_rdf_and_xsd_are_exempt(self):
        load_table().require_known(
            [Iri("http://www.w3.org/2001/XMLSchema#decimal")], "test rule"
        )

    def test_unlisted_identifier_named_in_error(self):
        with pytest.raises(UnknownTermError, match="http://schema.org/volcano"):
            load_table().require_known([Iri("http://schema.org/volcano")], "test rule")
