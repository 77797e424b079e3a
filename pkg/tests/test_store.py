"""Quad store tests: ingestion idempotence, indexed lookup against a
linear-scan oracle, statistics, and the persisted directory layout."""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from kgforge.rdf import RDF_TYPE, Graph, Iri, Literal, Quad, Triple
from kgforge.store import CorruptManifest, Store, graph_filename

from . import oracle

EX = "http://example.org/"


def ex(local: str) -> Iri:
    return Iri(EX + local)


G_MAY = Iri("https://x.example/graphs/2014/05")
G_JUNE = Iri("https://x.example/graphs/2014/06")
G_DAY = Iri("https://x.example/graphs/2014/05/17")

T1 = datetime(2025, 7, 1, 6, 0, 0, tzinfo=timezone.utc)
T2 = datetime(2025, 7, 2, 6, 0, 0, tzinfo=timezone.utc)

Q1 = Quad(Triple(ex("d1"), ex("p"), Literal("x")), G_MAY)
Q2 = Quad(Triple(ex("d2"), ex("p"), ex("d1")), G_MAY)
Q3 = Quad(Triple(ex("d3"), ex("q"), Literal("y")), G_JUNE)


def store_with(*quads: Quad) -> Store:
    store = Store()
    store.load_quads(quads, loaded_at=T1)
    return store


class TestLoadQuads:
    def test_counts_only_new_quads(self):
        store = Store()
        assert store.load_quads([Q1, Q2], loaded_at=T1) == 2
        assert store.load_quads([Q1, Q2], loaded_at=T2) == 0
        assert len(store) == 2

    def test_empty_batch(self):
        assert Store().load_quads([], loaded_at=T1) == 0

    def test_duplicate_within_batch_counted_once(self):
        assert Store().load_quads([Q1, Q1], loaded_at=T1) == 1

    def test_replay_leaves_store_equal(self):
        once = store_with(Q1, Q2, Q3)
        twice = store_with(Q1, Q2, Q3)
        twice.load_quads([Q1, Q2, Q3], loaded_at=T2)
        assert once == twice

    def test_default_graph_quads_rejected(self):
        with pytest.raises(ValueError, match="named graph"):
            Store().load_quads([Quad(Q1.triple, None)], loaded_at=T1)

    def test_load_event_recorded_per_touched_graph(self):
        store = Store()
        store.load_quads([Q1, Q2, Q3], source_records=3, loaded_at=T1)
        may = store.graph_entry(G_MAY)
        june = store.graph_entry(G_JUNE)
        assert may.quad_count == 2 and june.quad_count == 1
        assert may.loads == [
            {"at": T1.isoformat(), "inserted": 2, "source_records": 3}
        ]
        assert june.loads[0]["inserted"] == 1

    def test_no_event_recorded_when_nothing_is_new(self):
        store = store_with(Q1)
        store.load_quads([Q1], source_records=1, loaded_at=T2)
        assert len(store.graph_entry(G_MAY).loads) == 1
        assert store.graph_entry(G_MAY).loads[0]["at"] == T1.isoformat()


_graph_iris = st.sampled_from([G_MAY, G_JUNE, G_DAY])
_triples = st.builds(
    Triple,
    st.sampled_from(oracle.SUBJECTS),
    st.sampled_from(oracle.PREDICATES),
    st.sampled_from(oracle.OBJECTS),
)
_quad_sets = st.sets(st.builds(Quad, _triples, _graph_iris), max_size=60)
_opt = lambda pool: st.none() | st.sampled_from(pool)


class TestMatch:
    def test_all_wildcards_yield_every_quad(self):
        store = store_with(Q1, Q2, Q3)
        assert set(store.match()) == {Q1, Q2, Q3}

    def test_fully_bound_present(self):
        store = store_with(Q1, Q2, Q3)
        t = Q2.triple
        assert list(store.match(t.subject, t.predicate, t.object, G_MAY)) == [Q2]

    def test_fully_bound_absent(self):
        store = store_with(Q1)
        assert list(store.match(ex("nope"), None, None, None)) == []

    def test_graph_scoping(self):
        store = store_with(Q1, Q2, Q3)
        assert set(store.match(graph=G_MAY)) == {Q1, Q2}

    @given(
        _quad_sets,
        _opt(oracle.SUBJECTS),
        _opt(oracle.PREDICATES),
        _opt(oracle.OBJECTS),
        st.none() | _graph_iris,
    )
    def test_match_equals_linear_scan(self, quads, s, p, o, g):
        store = Store()
        store.load_quads(quads, loaded_at=T1)
        got = list(store.match(s, p, o, g))
        assert len(got) == len(set(got)), "a quad was yielded twice"
        want = {
            q
            for q in quads
            if (s is None or q.triple.subject == s)
            and (p is None or q.triple.predicate == p)
            and (o is None or q.triple.object == o)
            and (g is None or q.graph == g)
        }
        assert set(got) == want


class TestTriplesView:
    def test_union_deduplicates_across_graphs(self):
        shared = Triple(ex("d"), ex("p"), Literal("x"))
        store = store_with(Quad(shared, G_MAY), Quad(shared, G_JUNE))
        assert store.triples() == Graph([shared])
        assert store.triples(G_MAY) == Graph([shared])

    def test_unknown_graph_is_empty(self):
        assert store_with(Q1).triples(G_JUNE) == Graph()


class TestStats:
    def test_empty_store(self):
        s = Store().stats()
        assert s.total_triples == 0
        assert s.per_class == {}
        assert s.per_predicate == {}
        assert s.graph_count == 0

    def test_hand_counted_store(self):
        rdf_type = Iri(RDF_TYPE)
        cls = ex("Dataset")
        store = store_with(
            Quad(Triple(ex("d1"), rdf_type, cls), G_MAY),
            Quad(Triple(ex("d2"), rdf_type, cls), G_MAY),
            Quad(Triple(ex("d1"), ex("p"), Literal("x")), G_MAY),
            Quad(Triple(ex("d1"), ex("p"), Literal("y")), G_JUNE),
        )
        s = store.stats()
        assert s.total_triples == 4
        assert s.per_class == {cls: 2}
        assert s.per_predicate == {rdf_type: 2, ex("p"): 2}
        assert s.graph_count == 2

    def test_per_class_counts_subjects_not_triples(self):
        # The same subject typed in two graphs is still one instance.
        typing = Triple(ex("d1"), Iri(RDF_TYPE), ex("Dataset"))
        store = store_with(Quad(typing, G_MAY), Quad(typing, G_JUNE))
        assert store.stats().per_class == {ex("Dataset"): 1}
        assert store.stats().total_triples == 2

    def test_same_triple_in_two_graphs_counts_twice(self):
        shared = Triple(ex("d"), ex("p"), Literal("x"))
        store = store_with(Quad(shared, G_MAY), Quad(shared, G_JUNE))
        assert store.stats().total_triples == 2

    def test_json_dict_is_sorted_and_plain(self):
        store = store_with(Q1, Q3)
        doc = store.stats().to_json_dict()
        assert list(doc["per_predicate"]) == sorted(doc["per_predicate"])
        assert all(isinstance(k, str) for k in doc["per_predicate"])


class TestGraphFilenames:
    def test_month_graph(self):
        assert graph_filename(G_MAY) == "2014-05.nq"

    def test_day_graph(self):
        assert graph_filename(G_DAY) == "2014-05-17.nq"

    def test_non_date_graph_falls_back_to_encoding(self):
        name = graph_filename(Iri("https://x.example/other/thing"))
        assert name.endswith(".nq")
        assert "/" not in name


class TestPersistence:
    def test_round_trip(self, tmp_path):
        store = store_with(Q1, Q2, Q3)
        store.persist(tmp_path)
        loaded = Store.load(tmp_path)
        assert loaded == store
        assert loaded.graphs() == {G_MAY, G_JUNE}
        assert loaded.graph_entry(G_MAY).loads == store.graph_entry(G_MAY).loads

    def test_load_on_empty_directory(self, tmp_path):
        store = Store.load(tmp_path)
        assert len(store) == 0

    def test_persist_twice_is_byte_identical(self, tmp_path):
        store = store_with(Q1, Q2, Q3)
        store.persist(tmp_path)
        before = {p: p.read_bytes() for p in sorted(tmp_path.rglob("*")) if p.is_file()}
        store.persist(tmp_path)
        after = {p: p.read_bytes() for p in sorted(tmp_path.rglob("*")) if p.is_file()}
        assert before == after

    def test_persisted_layout(self, tmp_path):
        store_with(Q1, Q3).persist(tmp_path)
        assert (tmp_path / "manifest.json").exists()
        assert (tmp_path / "graphs" / "2014-05.nq").exists()
        assert (tmp_path / "graphs" / "2014-06.nq").exists()

    def test_graph_files_are_canonical_nquads(self, tmp_path):
        store_with(Q1, Q2).persist(tmp_path)
        text = (tmp_path / "graphs" / "2014-05.nq").read_text(encoding="utf-8")
        lines = text.splitlines()
        assert lines == sorted(lines)
        assert all(line.endswith(f"<{G_MAY.value}> .") for line in lines)

    def test_unreadable_manifest(self, tmp_path):
        (tmp_path / "manifest.json").write_text("{not json", encoding="utf-8")
        with pytest.raises(CorruptManifest, match="unreadable"):
            Store.load(tmp_path)

    def test_missing_graph_file(self, tmp_path):
        store_with(Q1).persist(tmp_path)
        (tmp_path / "graphs" / "2014-05.nq").unlink()
        with pytest.raises(CorruptManifest, match="missing graph file"):
            Store.load(tmp_path)

    def test_quad_count_mismatch(self, tmp_path):
        store_with(Q1).persist(tmp_path)
        path = tmp_path / "graphs" / "2014-05.nq"
        extra = f"<{EX}d9> <{EX}p> <{EX}d8> <{G_MAY.value}> .\n"
        path.write_text(path.read_text(encoding="utf-8") + extra, encoding="utf-8")
        with pytest.raises(CorruptManifest, match="manifest says"):
            Store.load(tmp_path)

    def test_quad_in_wrong_graph_file(self, tmp_path):
        store_with(Q1).persist(tmp_path)
        path = tmp_path / "graphs" / "2014-05.nq"
        stray = f"<{EX}d9> <{EX}p> <{EX}d8> <{G_JUNE.value}> .\n"
        path.write_text(stray, encoding="utf-8")
        with pytest.raises(CorruptManifest, match="expected"):
            Store.load(tmp_path)


class TestIdempotenceProperty:
    @given(_quad_sets, _quad_sets)
    def test_reloading_any_batch_is_a_no_op(self, first, second):
        once = Store()
        once.load_quads(first, loaded_at=T1)
        once.load_quads(second, loaded_at=T1)
        twice = Store()
        twice.load_quads(first, loaded_at=T1)
        twice.load_quads(second, loaded_at=T1)
        twice.load_quads(second, loaded_at=T2)
        assert once == twice
        assert once.stats() == twice.stats()
