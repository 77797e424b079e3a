"""Command-line tests.

Most tests call ``main()`` in process and assert on exit codes and
captured streams; ``serve`` gets a subprocess test because it blocks.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys
import time
import urllib.request
from pathlib import Path

import pytest

from kgforge.cli import main
from kgforge.rdf import Iri, Quad, parse_ntriples
from kgforge.store import Store

FIXTURES = Path(__file__).parent.parent / "fixtures" / "records"
GOLDENS = Path(__file__).parent / "goldens"

BASE = "https://kg.example.org/chemotion/"


@pytest.fixture()
def project(tmp_path):
    """A working directory with a config file pointing at the fixture corpus."""
    doc = {
        "source": {"base_url": str(FIXTURES), "mode": "directory"},
        "mint": {"base": BASE},
        "store_dir": "store",
        "cache_dir": "cache",
        "staging_dir": "staging",
    }
    config = tmp_path / "kgforge.json"
    config.write_text(json.dumps(doc, indent=2))
    return tmp_path


def run_cli(project: Path, *argv: str) -> int:
    return main(["-c", str(project / "kgforge.json"), *argv])


class TestRun:
    def test_run_succeeds_and_prints_summary(self, project, capsys):
        assert run_cli(project, "run") == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["ok"] is True
        assert summary["stages"]["harvest"]["records"] == 50
        assert summary["stages"]["load"]["inserted"] > 0
        assert summary["stages"]["validate"]["violations"] == 0
        assert "stats" in summary["stages"]

    def test_second_run_inserts_nothing(self, project, capsys):
        assert run_cli(project, "run") == 0
        capsys.readouterr()
        assert run_cli(project, "run") == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["stages"]["load"]["inserted"] == 0

    def test_run_with_violations_exits_3(self, project, capsys):
        # Persist a store seeded with a known fault, then run against an
        # empty source directory so the bad quad survives untouched.
        fault = (GOLDENS / "faults" / "role_without_bearer.nt").read_text()
        store = Store()
        store.load_quads(
            [Quad(t, Iri(f"{BASE}graphs/2014/05")) for t in parse_ntriples(fault)]
        )
        store.persist(project / "store")
        empty = project / "empty-source"
        empty.mkdir()
        doc = json.loads((project / "kgforge.json").read_text())
        doc["source"]["base_url"] = str(empty)
        (project / "kgforge.json").write_text(json.dumps(doc))

        assert run_cli(project, "run") == 3
        summary = json.loads(capsys.readouterr().out)
        assert summary["ok"] is False
        assert summary["failed_stage"] == "validate"
        assert "stats" not in summary["stages"]


class TestStageCommands:
    def test_harvest_prints_count(self, project, capsys):
        assert run_cli(project, "harvest") == 0
        assert capsys.readouterr().out == "50\n"

    def test_transform_prints_per_rule_lines(self, project, capsys):
        run_cli(project, "harvest")
        capsys.readouterr()
        assert run_cli(project, "transform") == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines == [
            "creator.rq\t450",
            "dataset.rq\t550",
            "study.rq\t350",
            "substance.rq\t260",
        ]

    def test_load_prints_inserted(self, project, capsys):
        run_cli(project, "harvest")
        run_cli(project, "transform")
        capsys.readouterr()
        assert run_cli(project, "load") == 0
        inserted = int(capsys.readouterr().out)
        assert inserted > 0
        assert run_cli(project, "load") == 0
        assert capsys.readouterr().out == "0\n"

    def test_load_without_staging_exits_2(self, project, capsys):
        assert run_cli(project, "load") == 2
        assert "run transform" in capsys.readouterr().err

    def test_validate_prints_report_line(self, project, capsys):
        for command in ("harvest", "transform", "load"):
            run_cli(project, command)
        capsys.readouterr()
        assert run_cli(project, "validate") == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["conforms"] is True
        assert doc["violations"] == 0
        assert Path(doc["report"]).exists()

    def test_validate_exits_3_on_violations(self, project, capsys):
        fault = (GOLDENS / "faults" / "datum_without_unit.nt").read_text()
        store = Store()
        store.load_quads(
            [Quad(t, Iri(f"{BASE}graphs/2014/05")) for t in parse_ntriples(fault)]
        )
        store.persist(project / "store")
        assert run_cli(project, "validate") == 3
        doc = json.loads(capsys.readouterr().out)
        assert doc["conforms"] is False
        assert doc["violations"] >= 1

    def test_stats_json_on_stdout_table_on_stderr(self, project, capsys):
        run_cli(project, "run")
        capsys.readouterr()
        assert run_cli(project, "stats") == 0
        captured = capsys.readouterr()
        doc = json.loads(captured.out)
        assert doc["graph_count"] == 6
        assert "total triples" in captured.err
        assert "instances per class" in captured.err


class TestExitCodes:
    def test_unknown_command_is_usage_error(self, project, capsys):
        with pytest.raises(SystemExit) as info:
            run_cli(project, "explode")
        assert info.value.code == 1

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["-c", str(tmp_path / "absent.json"), "stats"]) == 1
        assert "error" in capsys.readouterr().err

    def test_invalid_config_file(self, tmp_path, capsys):
        config = tmp_path / "kgforge.json"
        config.write_text("{not json")
        assert main(["-c", str(config), "stats"]) == 1

    def test_lock_contention_exits_2(self, project, capsys):
        (project / "store.lock").write_text("12345\n")
        assert run_cli(project, "run") == 2
        assert "another run holds" in capsys.readouterr().err

    def test_stats_without_store_exits_2(self, project, capsys):
        assert run_cli(project, "stats") == 2


class TestServe:
    def test_serve_subprocess(self, project):
        # Reserve a port, release it, and hand it to the config.
        with socket.socket() as probe:
            probe.bind(("127.0.0.1", 0))
            port = probe.getsockname()[1]
        doc = json.loads((project / "kgforge.json").read_text())
        doc["endpoint"] = {"host": "127.0.0.1", "port": port}
        (project / "kgforge.json").write_text(json.dumps(doc))

        assert run_cli(project, "run") == 0

        proc = subprocess.Popen(
            [
                sys.executable,
                "-m",
                "kgforge.cli",
                "-c",
                str(project / "kgforge.json"),
                "serve",
            ],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        try:
            url = f"http://127.0.0.1:{port}/stats"
            deadline = time.monotonic() + 10
            last_error = None
            while time.monotonic() < deadline:
                try:
                    with urllib.request.urlopen(url, timeout=1) as response:
                        doc = json.loads(response.read())
                    break
                except OSError as exc:
                    last_error = exc
                    time.sleep(0.05)
            else:
                raise AssertionError(f"endpoint never came up: {last_error}")
            assert doc["graph_count"] == 6
        finally:
            proc.terminate()
            proc.wait(timeout=10)
