"""A small read-only SPARQL endpoint over a persisted store.

The query language is the same subset the mapping engine evaluates: a
basic graph pattern, optionally scoped to one named graph, under a
SELECT, ASK, or CONSTRUCT head.  SELECT adds ORDER BY on a variable plus
LIMIT and OFFSET; everything else named in the SPARQL grammar is
rejected at parse time with a message naming the feature.

The HTTP server serves an immutable snapshot of the store.  ``refresh``
loads a new snapshot from disk and swaps it in atomically, so requests
see either the old corpus or the new one, never a mixture; requests that
arrive before the first snapshot exists get 503.

Routes:

    GET/POST /sparql          query via ?query= or a form body
    GET      /stats           corpus statistics as JSON
    GET      /export/Y/M      one monthly partition as N-Quads
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Iterable
from urllib.parse import parse_qs, urlparse

from ._scan import ScanError, Scanner
from .mapping import (
    MappingRule,
    TriplePattern,
    Variable,
    _parse_triples_block,
    _read_iri_or_pname,
    apply_rule,
    eval_bgp,
)
from .rdf import (
    XSD_STRING,
    BlankNode,
    Graph,
    Iri,
    Literal,
    Term,
    serialize_nquads,
    serialize_ntriples,
    term_sort_key,
)
from .store import Store

SPARQL_JSON = "application/sparql-results+json"
NTRIPLES = "application/n-triples"
NQUADS = "application/n-quads"


class QueryParseError(ScanError):
    """The query text is outside the supported subset."""


class _QueryScanner(Scanner):
    error_class = QueryParseError


# ---------------------------------------------------------------------------
# Query forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class SelectQuery:
    variables: tuple[str, ...]
    where: tuple[TriplePattern, ...]
    graph: Iri | None = None
    order_by: str | None = None
    limit: int | None = None
    offset: int = 0


@dataclass(frozen=True, slots=True)
class AskQuery:
    where: tuple[TriplePattern, ...]
    graph: Iri | None = None


@dataclass(frozen=True, slots=True)
class ConstructQuery:
    rule: MappingRule
    graph: Iri | None = None


def parse_query(text: str) -> SelectQuery | AskQuery | ConstructQuery:
    sc = _QueryScanner(text)
    prefixes: dict[str, str] = {}
    sc.skip_ws()
    while sc.match_keyword("PREFIX"):
        sc.skip_ws()
        prefix, local = sc.read_pname()
        if local:
            raise sc.error("prefix declaration must end with ':'")
        sc.skip_ws()
        prefixes[prefix] = sc.read_iriref()
        sc.skip_ws()

    if sc.match_keyword("SELECT"):
        query = _parse_select(sc, prefixes)
    elif sc.match_keyword("ASK"):
        where, graph = _parse_where(sc, prefixes, keyword_optional=True)
        query = AskQuery(where=where, graph=graph)
    elif sc.match_keyword("CONSTRUCT"):
        query = _parse_construct(sc, prefixes)
    else:
        raise sc.error("expected SELECT, ASK, or CONSTRUCT")
    sc.skip_ws()
    if not sc.at_end():
        raise sc.error("unexpected content after query")
    return query


def _parse_select(sc: Scanner, prefixes: dict[str, str]) -> SelectQuery:
    sc.skip_ws()
    if sc.match_keyword("DISTINCT") or sc.match_keyword("REDUCED"):
        raise sc.error("unsupported feature: DISTINCT")
    star = sc.try_consume("*")
    names: list[str] = []
    if not star:
        sc.skip_ws()
        while sc.peek() == "?":
            name = sc.read_var_name()
            if name in names:
                raise sc.error(f"duplicate variable in projection: ?{name}")
            names.append(name)
            sc.skip_ws()
        if not names:
            raise sc.error("SELECT needs '*' or at least one variable")

    where, graph = _parse_where(sc, prefixes, keyword_optional=False)
    if star:
        # First-appearance order, reading each pattern subject,
        # predicate, object.
        seen: list[str] = []
        for pattern in where:
            for term in pattern.terms():
                if isinstance(term, Variable) and term.name not in seen:
                    seen.append(term.name)
        names = seen

    order_by: str | None = None
    limit: int | None = None
    offset = 0
    sc.skip_ws()
    if sc.match_keyword("ORDER"):
        sc.skip_ws()
        if not sc.match_keyword("BY"):
            raise sc.error("expected BY after ORDER")
        sc.skip_ws()
        if sc.match_keyword("DESC") or sc.match_keyword("ASC"):
            raise sc.error("unsupported feature: ORDER BY direction")
        if sc.peek() != "?":
            raise sc.error("ORDER BY expects a variable")
        order_by = sc.read_var_name()
        sc.skip_ws()
    seen_limit = seen_offset = False
    while True:
        sc.skip_ws()
        if not seen_limit and sc.match_keyword("LIMIT"):
            limit = _read_count(sc, "LIMIT")
            seen_limit = True
        elif not seen_offset and sc.match_keyword("OFFSET"):
            offset = _read_count(sc, "OFFSET")
            seen_offset = True
        else:
            break
    return SelectQuery(
        variables=tuple(names),
        where=where,
        graph=graph,
        order_by=order_by,
        limit=limit,
        offset=offset,
    )


def _parse_construct(sc: Scanner, prefixes: dict[str, str]) -> ConstructQuery:
    sc.skip_ws()
    sc.expect("{")
    template, _ = _parse_triples_block(sc, prefixes, allow_binds=False)
    where, graph = _parse_where(sc, prefixes, keyword_optional=False)
    try:
        rule = MappingRule(
            name="construct-query",
            prefixes=prefixes,
            template=tuple(template),
            where=where,
            binds=(),
        )
    except ValueError as exc:
        raise sc.error(str(exc)) from None
    return ConstructQuery(rule=rule, graph=graph)


def _parse_where(
    sc: Scanner, prefixes: dict[str, str], *, keyword_optional: bool
) -> tuple[tuple[TriplePattern, ...], Iri | None]:
    sc.skip_ws()
    if not sc.match_keyword("WHERE") and not keyword_optional:
        raise sc.error("expected WHERE")
    sc.skip_ws()
    sc.expect("{")
    sc.skip_ws()
    graph: Iri | None = None
    if not sc.looks_like_pname() and sc.match_keyword("GRAPH"):
        sc.skip_ws()
        if sc.peek() == "?":
            raise sc.error("unsupported feature: GRAPH variable")
        graph = _read_iri_or_pname(sc, prefixes)
        sc.skip_ws()
        sc.expect("{")
        patterns, _ = _parse_triples_block(sc, prefixes, allow_binds=False)
        sc.skip_ws()
        if not sc.try_consume("}"):
            raise sc.error("unterminated block: expected '}'")
    else:
        patterns, _ = _parse_triples_block(sc, prefixes, allow_binds=False)
    return tuple(patterns), graph


def _read_count(sc: Scanner, clause: str) -> int:
    sc.skip_ws()
    digits = []
    while not sc.at_end() and sc.peek().isdigit():
        digits.append(sc.peek())
        sc.advance()
    if not digits:
        raise sc.error(f"{clause} expects a non-negative integer")
    return int("".join(digits))


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class SelectResult:
    variables: tuple[str, ...]
    rows: tuple[dict, ...]

    def to_json_dict(self) -> dict:
        return {
            "head": {"vars": list(self.variables)},
            "results": {
                "bindings": [
                    {name: _term_json(row[name]) for name in self.variables if name in row}
                    for row in self.rows
                ]
            },
        }


def _term_json(term: Term) -> dict:
    if isinstance(term, Iri):
        return {"type": "uri", "value": term.value}
    if isinstance(term, BlankNode):
        return {"type": "bnode", "value": term.label}
    assert isinstance(term, Literal)
    doc: dict = {"type": "literal", "value": term.lexical}
    if term.language is not None:
        doc["xml:lang"] = term.language
    elif term.datatype.value != XSD_STRING:
        doc["datatype"] = term.datatype.value
    return doc


def _scoped(store: Store, graph: Iri | None) -> Graph:
    return store.triples(graph)


def _solution_order(solutions, order_by: str | None):
    """Canonical, deterministic row order.

    Rows sort by the ORDER BY variable first (when given), then by every
    variable in name order, comparing terms with the canonical term
    order; without ORDER BY the second key alone applies.
    """

    def key(solution: dict):
        names = sorted(solution)
        tail = tuple(term_sort_key(solution[name]) for name in names)
        if order_by is None:
            return tail
        head = solution.get(order_by)
        return ((0, term_sort_key(head)) if head is not None else (1,),) + tail

    return sorted(solutions, key=key)


def execute_select(store: Store, query: SelectQuery) -> SelectResult:
    solutions = eval_bgp(_scoped(store, query.graph), query.where)
    ordered = _solution_order(solutions, query.order_by)
    if query.offset:
        ordered = ordered[query.offset :]
    if query.limit is not None:
        ordered = ordered[: query.limit]
    rows = tuple(
        {name: sol[name] for name in query.variables if name in sol}
        for sol in ordered
    )
    return SelectResult(variables=query.variables, rows=rows)


def execute_ask(store: Store, query: AskQuery) -> bool:
    return bool(eval_bgp(_scoped(store, query.graph), query.where))


def execute_construct(store: Store, query: ConstructQuery) -> Graph:
    return apply_rule(_scoped(store, query.graph), query.rule)


# ---------------------------------------------------------------------------
# HTTP service
# ---------------------------------------------------------------------------


class EndpointServer:
    """Snapshot-serving HTTP endpoint; read-only by construction."""

    def __init__(self, store_dir: Path | str, host: str = "127.0.0.1", port: int = 0):
        self.store_dir = Path(store_dir)
        self.snapshot: Store | None = None
        self._swap = threading.Lock()
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.endpoint = self
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._httpd.server_address[:2]
        return host, port

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def refresh(self) -> None:
        """Load the persisted store and swap it in atomically."""
        snapshot = Store.load(self.store_dir)
        with self._swap:
            self.snapshot = snapshot

    def start(self) -> None:
        """Serve in a background thread (used by tests and cmd_serve)."""
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, daemon=True
        )
        self._thread.start()

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    # -- plumbing --------------------------------------------------------

    def log_message(self, *args) -> None:
        pass

    def _reply(self, status: int, content_type: str, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _json(self, doc: dict, status: int = 200, content_type: str = "application/json") -> None:
        self._reply(status, content_type, (json.dumps(doc, indent=2) + "\n").encode())

    def _error(self, status: int, message: str) -> None:
        self._reply(status, "text/plain; charset=utf-8", (message + "\n").encode())

    def _acceptable(self, produced: str) -> bool:
        accept = self.headers.get("Accept")
        if accept is None:
            return True
        for entry in accept.split(","):
            media = entry.split(";")[0].strip().lower()
            if media in ("*/*", produced):
                return True
            if media.endswith("/*") and produced.startswith(media[:-1]):
                return True
        return False

    # -- routes ------------------------------------------------------------

    def do_GET(self) -> None:
        parsed = urlparse(self.path)
        snapshot = self.server.endpoint.snapshot
        if snapshot is None:
            self._error(503, "snapshot not ready; try again shortly")
            return
        if parsed.path == "/sparql":
            params = parse_qs(parsed.query)
            queries = params.get("query", [])
            if len(queries) != 1:
                self._error(400, "exactly one 'query' parameter is required")
                return
            self._run_query(snapshot, queries[0])
        elif parsed.path == "/stats":
            self._json(snapshot.stats().to_json_dict())
        elif parsed.path.startswith("/export/"):
            self._export(snapshot, parsed.path)
        else:
            self._error(404, f"unknown path: {parsed.path}")

    def do_POST(self) -> None:
        parsed = urlparse(self.path)
        snapshot = self.server.endpoint.snapshot
        if snapshot is None:
            self._error(503, "snapshot not ready; try again shortly")
            return
        if parsed.path != "/sparql":
            self._error(404, f"unknown path: {parsed.path}")
            return
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length).decode("utf-8")
        content_type = (self.headers.get("Content-Type") or "").split(";")[0].strip()
        if content_type == "application/sparql-query":
            query_text = body
        else:
            params = parse_qs(body)
            queries = params.get("query", [])
            if len(queries) != 1:
                self._error(400, "exactly one 'query' form field is required")
                return
            query_text = queries[0]
        self._run_query(snapshot, query_text)

    # -- helpers -----------------------------------------------------------

    def _run_query(self, snapshot: Store, text: str) -> None:
        try:
            query = parse_query(text)
        except QueryParseError as exc:
            self._error(400, f"query parse error: {exc}")
            return
        if isinstance(query, ConstructQuery):
            if not self._acceptable(NTRIPLES):
                self._error(406, f"can only produce {NTRIPLES}")
                return
            graph = execute_construct(snapshot, query)
            self._reply(200, NTRIPLES, serialize_ntriples(graph).encode())
            return
        if not self._acceptable(SPARQL_JSON):
            self._error(406, f"can only produce {SPARQL_JSON}")
            return
        if isinstance(query, SelectQuery):
            result = execute_select(snapshot, query)
            self._json(result.to_json_dict(), content_type=SPARQL_JSON)
        else:
            answer = execute_ask(snapshot, query)
            self._json({"head": {}, "boolean": answer}, content_type=SPARQL_JSON)

    def _export(self, snapshot: Store, path: str) -> None:
        parts = path.removeprefix("/export/").split("/")
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            self._error(404, "export paths look like /export/<year>/<month>")
            return
        year, month = int(parts[0]), int(parts[1])
        suffix = f"/{year}/{month:02d}"
        matching = [
            g
            for g in snapshot.graphs()
            if g.value.endswith(suffix) or f"{suffix}/" in g.value
        ]
        if not matching:
            self._error(404, f"no partition for {year}-{month:02d}")
            return
        quads = [q for g in matching for q in snapshot.match(graph=g)]
        self._reply(200, NQUADS, serialize_nquads(quads).encode())
