"""RDF data model and serializations.

Terms, triples and quads are immutable values; graphs have set semantics
(re-inserting a triple never changes cardinality), which is what makes
repeated daily loads idempotent. Three text formats are supported:
N-Triples, N-Quads, and a Turtle subset rich enough for the vocabulary
and fixture files shipped with this project (``@prefix``, prefixed names,
``a``, ``;``/``,`` abbreviations; no collections, no ``[...]`` property
lists).

Serialization is canonical: triples are sorted by a total order over
terms (blank node < IRI < literal, lexicographic within a kind), so equal
graphs always produce byte-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

from ._scan import ScanError, Scanner

XSD = "http://www.w3.org/2001/XMLSchema#"
XSD_STRING = XSD + "string"
XSD_BOOLEAN = XSD + "boolean"
XSD_INTEGER = XSD + "integer"
XSD_DECIMAL = XSD + "decimal"
RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDF_TYPE = RDF_NS + "type"
RDF_LANGSTRING = RDF_NS + "langString"

# Characters that must be percent-encoded rather than appear raw in an IRI.
_IRI_FORBIDDEN = set(' \t\n\r<>"{}|^`\\')


class ParseError(ScanError):
    """Syntax error in an RDF document."""


class _RdfScanner(Scanner):
    error_class = ParseError


@dataclass(frozen=True, slots=True)
class Iri:
    """An absolute IRI."""

    value: str

    def __post_init__(self):
        scheme_end = self.value.find(":")
        if scheme_end <= 0 or not self.value[0].isalpha():
            raise ValueError(f"not an absolute IRI: {self.value!r}")
        if not all(c.isalnum() or c in "+.-" for c in self.value[:scheme_end]):
            raise ValueError(f"invalid IRI scheme in {self.value!r}")
        bad = _IRI_FORBIDDEN.intersection(self.value)
        if bad:
            raise ValueError(
                f"IRI contains characters that must be percent-encoded: {sorted(bad)!r}"
            )

    def __repr__(self):
        return f"<{self.value}>"


@dataclass(frozen=True, slots=True)
class BlankNode:
    label: str

    def __post_init__(self):
        if not self.label or not all(c.isalnum() or c == "_" for c in self.label):
            raise ValueError(f"invalid blank node label: {self.label!r}")

    def __repr__(self):
        return f"_:{self.label}"


@dataclass(frozen=True, slots=True)
class Literal:
    """A literal with its verbatim lexical form.

    The language tag is non-empty exactly when the datatype is
    ``rdf:langString``; no value-space normalization is applied.
    """

    lexical: str
    datatype: Iri = field(default_factory=lambda: Iri(XSD_STRING))
    language: str | None = None

    def __post_init__(self):
        if self.language is not None:
            if not self.language:
                raise ValueError("language tag must be non-empty")
            if self.datatype.value != RDF_LANGSTRING:
                raise ValueError("language-tagged literal must have rdf:langString datatype")
        elif self.datatype.value == RDF_LANGSTRING:
            raise ValueError("rdf:langString literal requires a language tag")

    def __repr__(self):
        if self.language:
            return f'"{self.lexical}"@{self.language}'
        if self.datatype.value == XSD_STRING:
            return f'"{self.lexical}"'
        return f'"{self.lexical}"^^<{self.datatype.value}>'


Term = Iri | BlankNode | Literal
Subject = Iri | BlankNode


@dataclass(frozen=True, slots=True)
class Triple:
    subject: Subject
    predicate: Iri
    object: Term

    def __post_init__(self):
        if isinstance(self.subject, Literal):
            raise ValueError("triple subject cannot be a literal")
        if not isinstance(self.predicate, Iri):
            raise ValueError("triple predicate must be an IRI")


@dataclass(frozen=True, slots=True)
class Quad:
    triple: Triple
    graph: Iri | None = None

    def __post_init__(self):
        if self.graph is not None and not isinstance(self.graph, Iri):
            raise ValueError("quad graph must be an IRI")


def lang_literal(lexical: str, language: str) -> Literal:
    return Literal(lexical, Iri(RDF_LANGSTRING), language)


# ---------------------------------------------------------------------------
# Canonical term order
# ---------------------------------------------------------------------------

_KIND_RANK = {BlankNode: 0, Iri: 1, Literal: 2}


def term_sort_key(t: Term) -> tuple:
    """Sort key realizing the total order: blank node < IRI < literal,
    lexicographic within a kind."""
    if isinstance(t, BlankNode):
        return (0, t.label)
    if isinstance(t, Iri):
        return (1, t.value)
    return (2, t.lexical, t.datatype.value, t.language or "")


def compare_terms(a: Term, b: Term) -> int:
    """Three-way comparison under the canonical order (-1, 0, or 1)."""
    ka, kb = term_sort_key(a), term_sort_key(b)
    return -1 if ka < kb else (0 if ka == kb else 1)


def triple_sort_key(t: Triple) -> tuple:
    return (term_sort_key(t.subject), term_sort_key(t.predicate), term_sort_key(t.object))


def quad_sort_key(q: Quad) -> tuple:
    graph_key = (0, "") if q.graph is None else (1, q.graph.value)
    return (graph_key,) + triple_sort_key(q.triple)


# ---------------------------------------------------------------------------
# Graph
# ---------------------------------------------------------------------------


class Graph:
    """An immutable set of triples."""

    __slots__ = ("_triples",)

    def __init__(self, triples: Iterable[Triple] = ()):
        self._triples = frozenset(triples)

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __contains__(self, t: Triple) -> bool:
        return t in self._triples

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self._triples == other._triples

    def __hash__(self) -> int:
        return hash(self._triples)

    def __repr__(self):
        return f"Graph({len(self._triples)} triples)"

    def union(self, other: "Graph | Iterable[Triple]") -> "Graph":
        other_triples = other._triples if isinstance(other, Graph) else other
        return Graph(self._triples | frozenset(other_triples))

    def match(
        self,
        subject: Subject | None = None,
        predicate: Iri | None = None,
        obj: Term | None = None,
    ) -> Iterator[Triple]:
        """Triples matching the given positions; ``None`` is a wildcard."""
        for t in self._triples:
            if subject is not None and t.subject != subject:
                continue
            if predicate is not None and t.predicate != predicate:
                continue
            if obj is not None and t.object != obj:
                continue
            yield t

    def subjects_of_type(self, cls: Iri) -> set[Subject]:
        rdf_type = Iri(RDF_TYPE)
        return {t.subject for t in self.match(predicate=rdf_type, obj=cls)}

    def sorted(self) -> list[Triple]:
        return sorted(self._triples, key=triple_sort_key)


# ---------------------------------------------------------------------------
# N-Triples / N-Quads
# ---------------------------------------------------------------------------


def _read_term(sc: Scanner, allow_bnode: bool = True) -> Term:
    c = sc.peek()
    if c == "<":
        try:
            return Iri(sc.read_iriref())
        except ValueError as exc:
            raise sc.error(str(exc)) from None
    if c == "_" and allow_bnode:
        return BlankNode(sc.read_bnode_label())
    if c == '"':
        lexical = sc.read_string()
        if sc.peek() == "@":
            return lang_literal(lexical, sc.read_langtag())
        if sc.try_consume("^^"):
            try:
                return Literal(lexical, Iri(sc.read_iriref()))
            except ValueError as exc:
                raise sc.error(str(exc)) from None
        return Literal(lexical)
    raise sc.error(f"expected RDF term, found {c!r}" if c else "unexpected end of line")


def _parse_line_terms(line: str, lineno: int, max_terms: int) -> list[Term] | None:
    sc = _RdfScanner(line, line_offset=lineno - 1)
    sc.skip_ws()
    if sc.at_end():
        return None
    terms: list[Term] = []
    while not sc.try_consume("."):
        if sc.at_end():
            raise sc.error("statement not terminated by '.'")
        if len(terms) == max_terms:
            raise sc.error("too many terms in statement")
        terms.append(_read_term(sc))
        sc.skip_ws()
    sc.skip_ws()
    if not sc.at_end():
        raise sc.error("trailing characters after '.'")
    if len(terms) < 3:
        raise sc.error("statement has fewer than three terms")
    return terms


def _make_triple(terms: list[Term], sc_error) -> Triple:
    try:
        return Triple(terms[0], terms[1], terms[2])  # type: ignore[arg-type]
    except ValueError as exc:
        raise sc_error(str(exc)) from None


def parse_ntriples(text: str) -> Graph:
    """Parse N-Triples text into a Graph (duplicates collapse)."""
    triples = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        sc = _RdfScanner(line, line_offset=lineno - 1)
        terms = _parse_line_terms(line, lineno, max_terms=3)
        if terms is None:
            continue
        triples.append(_make_triple(terms, sc.error))
    return Graph(triples)


def parse_nquads(text: str) -> list[Quad]:
    """Parse N-Quads text; the fourth (graph) term is optional per statement."""
    quads = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        sc = _RdfScanner(line, line_offset=lineno - 1)
        terms = _parse_line_terms(line, lineno, max_terms=4)
        if terms is None:
            continue
        triple = _make_triple(terms[:3], sc.error)
        graph = None
        if len(terms) == 4:
            if not isinstance(terms[3], Iri):
                raise sc.error("graph term must be an IRI")
            graph = terms[3]
        quads.append(Quad(triple, graph))
    return quads


def _escape_literal(s: str) -> str:
    out = []
    for c in s:
        if c == "\\":
            out.append("\\\\")
        elif c == '"':
            out.append('\\"')
        elif c == "\n":
            out.append("\\n")
        elif c == "\r":
            out.append("\\r")
        elif c == "\t":
            out.append("\\t")
        elif ord(c) < 0x20 or ord(c) == 0x7F:
            out.append(f"\\u{ord(c):04X}")
        else:
            out.append(c)
    return "".join(out)


def format_term(t: Term) -> str:
    if isinstance(t, Iri):
        return f"<{t.value}>"
    if isinstance(t, BlankNode):
        return f"_:{t.label}"
    body = f'"{_escape_literal(t.lexical)}"'
    if t.language:
        return f"{body}@{t.language}"
    if t.datatype.value == XSD_STRING:
        return body
    return f"{body}^^<{t.datatype.value}>"


def format_triple(t: Triple) -> str:
    return f"{format_term(t.subject)} {format_term(t.predicate)} {format_term(t.object)} ."


def serialize_ntriples(g: Graph) -> str:
    """Canonical N-Triples: one line per triple, sorted by term order."""
    return "".join(format_triple(t) + "\n" for t in g.sorted())


def serialize_nquads(quads: Iterable[Quad]) -> str:
    """Canonical N-Quads, sorted by (graph, subject, predicate, object);
    duplicates collapse."""
    lines = []
    for q in sorted(set(quads), key=quad_sort_key):
        stmt = format_triple(q.triple)
        if q.graph is not None:
            stmt = f"{stmt[:-2]} {format_term(q.graph)} ."
        lines.append(stmt + "\n")
    return "".join(lines)


# ---------------------------------------------------------------------------
# Turtle subset
# ---------------------------------------------------------------------------


def parse_turtle_subset(text: str) -> Graph:
    """Parse the supported Turtle subset into a Graph.

    Supported: ``@prefix``, prefixed names, the ``a`` keyword, IRIs,
    plain/typed/language-tagged literals, ``;`` and ``,`` abbreviations,
    comments. Collections and blank node property lists are rejected.
    """
    sc = _RdfScanner(text)
    prefixes: dict[str, str] = {}
    triples: list[Triple] = []

    def resolve_pname() -> Iri:
        prefix, local = sc.read_pname()
        if prefix not in prefixes:
            raise sc.error(f"unknown prefix: {prefix!r}")
        try:
            return Iri(prefixes[prefix] + local)
        except ValueError as exc:
            raise sc.error(str(exc)) from None

    def read_node(position: str) -> Term:
        c = sc.peek()
        if c == "[":
            raise sc.error("unsupported blank node property list")
        if c == "(":
            raise sc.error("unsupported collection")
        if c == "<":
            try:
                return Iri(sc.read_iriref())
            except ValueError as exc:
                raise sc.error(str(exc)) from None
        if c == "_" and sc.peek(1) == ":":
            return BlankNode(sc.read_bnode_label())
        if c == '"':
            if position != "object":
                raise sc.error(f"literal not allowed in {position} position")
            lexical = sc.read_string()
            if sc.peek() == "@":
                return lang_literal(lexical, sc.read_langtag())
            if sc.try_consume("^^"):
                if sc.peek() == "<":
                    return Literal(lexical, Iri(sc.read_iriref()))
                return Literal(lexical, resolve_pname())
            return Literal(lexical)
        if position == "predicate" and c == "a":
            nxt = sc.peek(1)
            if not (nxt.isalnum() or nxt in "_-:"):
                sc.advance()
                return Iri(RDF_TYPE)
        if sc.looks_like_pname():
            return resolve_pname()
        raise sc.error(f"expected term, found {c!r}" if c else "unexpected end of input")

    while True:
        sc.skip_ws()
        if sc.at_end():
            break
        if sc.try_consume("@prefix"):
            sc.skip_ws()
            prefix, local = sc.read_pname()
            if local:
                raise sc.error("malformed @prefix declaration")
            sc.skip_ws()
            ns = sc.read_iriref()
            Iri(ns)  # validate
            prefixes[prefix] = ns
            sc.skip_ws()
            sc.expect(".")
            continue

        subject = read_node("subject")
        while True:  # predicate-object list
            sc.skip_ws()
            predicate = read_node("predicate")
            if not isinstance(predicate, Iri):
                raise sc.error("predicate must be an IRI")
            while True:  # object list
                sc.skip_ws()
                obj = read_node("object")
                triples.append(Triple(subject, predicate, obj))  # type: ignore[arg-type]
                sc.skip_ws()
                if not sc.try_consume(","):
                    break
            if sc.try_consume(";"):
                sc.skip_ws()
                if sc.try_consume("."):  # tolerate trailing `;` before `.`
                    break
                continue
            sc.expect(".")
            break

    return Graph(triples)
