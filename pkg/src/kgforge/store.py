"""The quad store: submission-date named graphs with idempotent loads.

Quads live in memory in one set plus three index permutations;
persistence is one canonical N-Quads file per named graph under
``graphs/`` next to a ``manifest.json``.  Serialization is canonical, so
persisting an unchanged store rewrites byte-identical files, and a
repeated load of the same batch is a no-op that leaves no trace in the
manifest.

The store is append-only by design: resources are superseded by later
submissions in newer graphs, never deleted, so there is no removal
operation to misuse.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

from .mint import encode_for_uri
from .rdf import (
    RDF_TYPE,
    Graph,
    Iri,
    Quad,
    Subject,
    Term,
    parse_nquads,
    serialize_nquads,
)

MANIFEST_NAME = "manifest.json"
GRAPHS_DIR = "graphs"


class CorruptManifest(ValueError):
    """The persisted directory contradicts its own manifest."""


@dataclass
class StoreStats:
    total_triples: int
    per_class: dict[Iri, int]
    per_predicate: dict[Iri, int]
    graph_count: int

    def to_json_dict(self) -> dict:
        return {
            "total_triples": self.total_triples,
            "graph_count": self.graph_count,
            "per_class": {
                iri.value: n for iri, n in sorted(self.per_class.items(), key=lambda kv: kv[0].value)
            },
            "per_predicate": {
                iri.value: n
                for iri, n in sorted(self.per_predicate.items(), key=lambda kv: kv[0].value)
            },
        }


@dataclass
class _GraphEntry:
    """Manifest bookkeeping for one named graph."""

    filename: str
    quad_count: int = 0
    loads: list[dict] = field(default_factory=list)


class Store:
    """An indexed set of quads; every quad belongs to a named graph."""

    def __init__(self) -> None:
        self._quads: set[Quad] = set()
        # graph -> subject -> quads; predicate -> object -> quads;
        # object -> subject -> quads.  Together these serve every lookup
        # the join engine and the endpoint issue without a full scan.
        self._gspo: dict[Iri, dict[Subject, set[Quad]]] = {}
        self._pos: dict[Iri, dict[Term, set[Quad]]] = {}
        self._osp: dict[Term, dict[Subject, set[Quad]]] = {}
        self._manifest: dict[Iri, _GraphEntry] = {}

    # -- basic views ---------------------------------------------------

    def __len__(self) -> int:
        return len(self._quads)

    def __iter__(self) -> Iterator[Quad]:
        return iter(self._quads)

    def __contains__(self, quad: Quad) -> bool:
        return quad in self._quads

    def __eq__(self, other) -> bool:
        return isinstance(other, Store) and self._quads == other._quads

    def graphs(self) -> set[Iri]:
        return set(self._gspo)

    def graph_entry(self, graph: Iri) -> _GraphEntry:
        return self._manifest[graph]

    def triples(self, graph: Iri | None = None) -> Graph:
        """Triples of one graph, or of the union of all graphs."""
        if graph is None:
            return Graph(q.triple for q in self._quads)
        subjects = self._gspo.get(graph, {})
        return Graph(q.triple for quads in subjects.values() for q in quads)

    # -- ingestion -----------------------------------------------------

    def load_quads(
        self,
        quads: Iterable[Quad],
        *,
        source_records: int = 0,
        loaded_at: datetime | None = None,
    ) -> int:
        """Set-union insert; returns the number of genuinely new quads.

        A load event is recorded in the manifest only for graphs that
        actually received a new quad, so replaying a batch changes
        nothing, including timestamps.
        """
        inserted_per_graph: dict[Iri, int] = {}
        for quad in quads:
            if quad.graph is None:
                raise ValueError("store quads must carry a named graph")
            if self._insert(quad):
                inserted_per_graph[quad.graph] = inserted_per_graph.get(quad.graph, 0) + 1
        if inserted_per_graph:
            stamp = (loaded_at or datetime.now(timezone.utc)).isoformat()
            for graph, inserted in inserted_per_graph.items():
                entry = self._manifest[graph]
                entry.quad_count = sum(
                    len(quads) for quads in self._gspo[graph].values()
                )
                entry.loads.append(
                    {
                        "at": stamp,
                        "inserted": inserted,
                        "source_records": source_records,
                    }
                )
        return sum(inserted_per_graph.values())

    def _insert(self, quad: Quad) -> bool:
        if quad in self._quads:
            return False
        self._quads.add(quad)
        t = quad.triple
        if quad.graph not in self._manifest:
            self._manifest[quad.graph] = _GraphEntry(filename=graph_filename(quad.graph))
        self._gspo.setdefault(quad.graph, {}).setdefault(t.subject, set()).add(quad)
        self._pos.setdefault(t.predicate, {}).setdefault(t.object, set()).add(quad)
        self._osp.setdefault(t.object, {}).setdefault(t.subject, set()).add(quad)
        return True

    # -- lookup ----------------------------------------------------------

    def match(
        self,
        subject: Subject | None = None,
        predicate: Iri | None = None,
        obj: Term | None = None,
        graph: Iri | None = None,
    ) -> Iterator[Quad]:
        """All quads matching the bound positions; ``None`` is a wildcard.

        An index narrows the candidates; the final position check is
        applied uniformly so the choice of index can never change the
        result, only the speed.
        """
        candidates = self._candidates(subject, predicate, obj, graph)
        for quad in candidates:
            t = quad.triple
            if subject is not None and t.subject != subject:
                continue
            if predicate is not None and t.predicate != predicate:
                continue
            if obj is not None and t.object != obj:
                continue
            if graph is not None and quad.graph != graph:
                continue
            yield quad

    def _candidates(self, subject, predicate, obj, graph) -> Iterable[Quad]:
        if graph is not None and subject is not None:
            return self._gspo.get(graph, {}).get(subject, ())
        if predicate is not None and obj is not None:
            return self._pos.get(predicate, {}).get(obj, ())
        if obj is not None:
            if subject is not None:
                return self._osp.get(obj, {}).get(subject, ())
            by_subject = self._osp.get(obj, {})
            return (q for quads in by_subject.values() for q in quads)
        if graph is not None:
            by_subject = self._gspo.get(graph, {})
            return (q for quads in by_subject.values() for q in quads)
        if predicate is not None:
            by_object = self._pos.get(predicate, {})
            return (q for quads in by_object.values() for q in quads)
        return self._quads

    # -- statistics ------------------------------------------------------

    def stats(self) -> StoreStats:
        rdf_type = Iri(RDF_TYPE)
        per_class: dict[Iri, set[Subject]] = {}
        per_predicate: dict[Iri, int] = {}
        for quad in self._quads:
            t = quad.triple
            per_predicate[t.predicate] = per_predicate.get(t.predicate, 0) + 1
            if t.predicate == rdf_type and isinstance(t.object, Iri):
                per_class.setdefault(t.object, set()).add(t.subject)
        return StoreStats(
            total_triples=len(self._quads),
            per_class={cls: len(subjects) for cls, subjects in per_class.items()},
            per_predicate=per_predicate,
            graph_count=len(self._gspo),
        )

    # -- persistence -----------------------------------------------------

    def persist(self, directory: Path | str) -> None:
        """Write one canonical N-Quads file per graph plus the manifest."""
        directory = Path(directory)
        graphs_dir = directory / GRAPHS_DIR
        graphs_dir.mkdir(parents=True, exist_ok=True)
        manifest_doc = {}
        for graph in sorted(self._manifest, key=lambda g: g.value):
            entry = self._manifest[graph]
            quads = {q for quads in self._gspo.get(graph, {}).values() for q in quads}
            (graphs_dir / entry.filename).write_text(
                serialize_nquads(quads), encoding="utf-8"
            )
            manifest_doc[graph.value] = {
                "file": entry.filename,
                "quads": entry.quad_count,
                "loads": entry.loads,
            }
        manifest_path = directory / MANIFEST_NAME
        manifest_path.write_text(
            json.dumps({"graphs": manifest_doc}, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, directory: Path | str) -> "Store":
        """Rebuild a store from a persisted directory.

        A directory without a manifest is an empty store; a manifest
        that disagrees with the files next to it raises CorruptManifest.
        """
        directory = Path(directory)
        store = cls()
        manifest_path = directory / MANIFEST_NAME
        if not manifest_path.exists():
            return store
        try:
            doc = json.loads(manifest_path.read_text(encoding="utf-8"))
            graph_entries = doc["graphs"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CorruptManifest(f"unreadable manifest: {exc}") from exc
        for graph_value in sorted(graph_entries):
            entry_doc = graph_entries[graph_value]
            graph = Iri(graph_value)
            try:
                filename = entry_doc["file"]
                expected_count = entry_doc["quads"]
                loads = entry_doc["loads"]
            except (KeyError, TypeError) as exc:
                raise CorruptManifest(
                    f"manifest entry for {graph_value} is missing {exc}"
                ) from exc
            graph_file = directory / GRAPHS_DIR / filename
            if not graph_file.exists():
                raise CorruptManifest(f"missing graph file: {filename}")
            quads = parse_nquads(graph_file.read_text(encoding="utf-8"))
            for quad in quads:
                if quad.graph != graph:
                    raise CorruptManifest(
                        f"{filename} contains a quad for {quad.graph}, "
                        f"expected {graph_value}"
                    )
                store._insert(quad)
            loaded = {q for quads in store._gspo.get(graph, {}).values() for q in quads}
            if len(loaded) != expected_count:
                raise CorruptManifest(
                    f"{filename} holds {len(loaded)} quads, "
                    f"manifest says {expected_count}"
                )
            entry = store._manifest.setdefault(graph, _GraphEntry(filename=filename))
            entry.filename = filename
            entry.quad_count = expected_count
            entry.loads = list(loads)
        return store


def graph_filename(graph: Iri) -> str:
    """File name for a graph: ``2014-05.nq`` for date-shaped graph IRIs,
    a percent-encoded fallback otherwise."""
    marker = "/graphs/"
    at = graph.value.find(marker)
    if at >= 0:
        tail = graph.value[at + len(marker) :]
        parts = tail.split("/")
        if parts and all(p.isdigit() for p in parts):
            return "-".join(parts) + ".nq"
    return encode_for_uri(graph.value) + ".nq"
