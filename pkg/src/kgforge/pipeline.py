"""Pipeline configuration and the five batch stages.

A run works through one working layout on disk:

    cache/          raw envelopes, content-addressed (harvest)
    staging/*.nq    mapped quads, one file per monthly partition (transform)
    store/          the persistent quad store (load)
    store/validation.json   the latest validation report (validate)

Each stage consumes only the previous stage's artifact, so every command
is rerunnable in isolation and ``run`` is nothing but the five stages in
order.  All stage functions are pure with respect to the config: same
config and same inputs give the same artifacts.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import shutil
import time
import uuid
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Any, Iterable, Mapping

from .harvest import Harvester, HarvestStats, RawCache, SourceConfig
from .jsonld import (
    JsonLdError,
    RawRecord,
    load_default_context,
    relabel_blank_nodes,
    to_rdf,
)
from .mapping import MappingRule, apply_rule, load_rule_pack, parse_rule
from .mint import MintConfig, mint_graph_iri, mint_resource_iri
from .rdf import Graph, Iri, Quad, parse_nquads, serialize_nquads
from .store import MANIFEST_NAME, Store, graph_filename
from .validation import (
    PatternRule,
    Shape,
    ValidationReport,
    load_patterns,
    load_shapes,
    parse_patterns,
    parse_shapes,
    validate,
)
from .vocab import load_table

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "harvest.checkpoint.json"
REPORT_NAME = "validation.json"
STAGING_SUMMARY_NAME = "summary.json"


class ConfigError(ValueError):
    """The configuration file or its overrides cannot be used."""


class StageError(RuntimeError):
    """A pipeline stage could not produce its artifact."""


class LockHeld(StageError):
    """Another pipeline run owns this store directory."""


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    source: SourceConfig
    mint: MintConfig
    store_dir: Path
    cache_dir: Path
    staging_dir: Path
    rules_dir: Path | None = None
    shapes_dir: Path | None = None
    host: str = "127.0.0.1"
    port: int = 8416

    @property
    def checkpoint_path(self) -> Path:
        return self.cache_dir / CHECKPOINT_NAME

    @property
    def report_path(self) -> Path:
        return self.store_dir / REPORT_NAME

    def to_json_dict(self) -> dict:
        doc: dict[str, Any] = {
            "source": {
                "base_url": self.source.base_url,
                "mode": self.source.mode,
                "page_size": self.source.page_size,
                "since": (
                    self.source.since.isoformat() if self.source.since else None
                ),
                "rate_limit": self.source.rate_limit,
                "max_retries": self.source.max_retries,
            },
            "mint": {
                "base": self.mint.base.value,
                "strategy": self.mint.strategy,
                "uuid_namespace": str(self.mint.uuid_namespace),
                "graph_granularity": self.mint.graph_granularity,
            },
            "store_dir": str(self.store_dir),
            "cache_dir": str(self.cache_dir),
            "staging_dir": str(self.staging_dir),
            "rules_dir": str(self.rules_dir) if self.rules_dir else None,
            "shapes_dir": str(self.shapes_dir) if self.shapes_dir else None,
            "endpoint": {"host": self.host, "port": self.port},
        }
        return doc


#: Environment overrides: variable -> (section, field, parser).
_ENV_OVERRIDES = {
    "KGFORGE_SOURCE_BASE_URL": ("source", "base_url", str),
    "KGFORGE_SOURCE_MODE": ("source", "mode", str),
    "KGFORGE_SOURCE_PAGE_SIZE": ("source", "page_size", int),
    "KGFORGE_SOURCE_SINCE": ("source", "since", str),
    "KGFORGE_SOURCE_RATE_LIMIT": ("source", "rate_limit", float),
    "KGFORGE_SOURCE_MAX_RETRIES": ("source", "max_retries", int),
    "KGFORGE_MINT_BASE": ("mint", "base", str),
    "KGFORGE_MINT_STRATEGY": ("mint", "strategy", str),
    "KGFORGE_MINT_GRAPH_GRANULARITY": ("mint", "graph_granularity", str),
    "KGFORGE_STORE_DIR": (None, "store_dir", str),
    "KGFORGE_CACHE_DIR": (None, "cache_dir", str),
    "KGFORGE_STAGING_DIR": (None, "staging_dir", str),
    "KGFORGE_RULES_DIR": (None, "rules_dir", str),
    "KGFORGE_SHAPES_DIR": (None, "shapes_dir", str),
    "KGFORGE_HOST": ("endpoint", "host", str),
    "KGFORGE_PORT": ("endpoint", "port", int),
}


def load_config(
    path: Path | str, env: Mapping[str, str] | None = None
) -> PipelineConfig:
    """Read a config file, apply ``KGFORGE_*`` overrides, resolve paths."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return config_from_json_dict(doc, base_dir=path.parent, env=env)


def config_from_json_dict(
    doc: dict, *, base_dir: Path | str = ".", env: Mapping[str, str] | None = None
) -> PipelineConfig:
    doc = _apply_env(doc, os.environ if env is None else env)
    base_dir = Path(base_dir)

    def path_of(value: str | None, fallback: str | None = None) -> Path | None:
        if value is None:
            value = fallback
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else (base_dir / p)

    try:
        source_doc = dict(doc.get("source") or {})
        since = source_doc.get("since")
        if isinstance(since, str):
            source_doc["since"] = date.fromisoformat(since)
        source = SourceConfig(**source_doc)

        mint_doc = dict(doc.get("mint") or {})
        if "base" not in mint_doc:
            raise ConfigError("config is missing mint.base")
        mint_doc["base"] = Iri(mint_doc["base"])
        if "uuid_namespace" in mint_doc:
            mint_doc["uuid_namespace"] = uuid.UUID(mint_doc["uuid_namespace"])
        mint = MintConfig(**mint_doc)

        endpoint = doc.get("endpoint") or {}
        return PipelineConfig(
            source=source,
            mint=mint,
            store_dir=path_of(doc.get("store_dir"), "store"),
            cache_dir=path_of(doc.get("cache_dir"), "cache"),
            staging_dir=path_of(doc.get("staging_dir"), "staging"),
            rules_dir=path_of(doc.get("rules_dir")),
            shapes_dir=path_of(doc.get("shapes_dir")),
            host=endpoint.get("host", "127.0.0.1"),
            port=endpoint.get("port", 8416),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad configuration: {exc}") from exc


def _apply_env(doc: dict, env: Mapping[str, str]) -> dict:
    doc = json.loads(json.dumps(doc))  # deep copy, JSON types only
    for variable, (section, field, parse) in _ENV_OVERRIDES.items():
        if variable not in env:
            continue
        try:
            value = parse(env[variable])
        except ValueError as exc:
            raise ConfigError(f"bad value for {variable}: {exc}") from exc
        if section is None:
            doc[field] = value
        else:
            doc.setdefault(section, {})[field] = value
    return doc


@contextmanager
def store_lock(store_dir: Path):
    """One pipeline run at a time per store directory.

    The lock is a sibling file created with O_EXCL; a crash can leave it
    behind, in which case the error message says which file to remove.
    """
    store_dir.parent.mkdir(parents=True, exist_ok=True)
    lock = store_dir.with_name(store_dir.name + ".lock")
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockHeld(
            f"another run holds {lock}; remove the file if it is stale"
        ) from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode("ascii"))
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


# ---------------------------------------------------------------------------
# Rule and shape resolution
# ---------------------------------------------------------------------------


def load_rules(config: PipelineConfig) -> tuple[MappingRule, ...]:
    """The packaged rule pack, or the ``*.rq`` files in ``rules_dir``."""
    if config.rules_dir is None:
        return load_rule_pack()
    table = load_table()
    rules = []
    for path in sorted(config.rules_dir.glob("*.rq")):
        rule = parse_rule(path.read_text(encoding="utf-8"), name=path.name)
        table.require_known(rule.iris(), f"rule {path.name}")
        rules.append(rule)
    if not rules:
        raise ConfigError(f"no .rq rules found in {config.rules_dir}")
    return tuple(rules)


def load_shape_files(
    config: PipelineConfig,
) -> tuple[tuple[Shape, ...], tuple[PatternRule, ...]]:
    if config.shapes_dir is None:
        return load_shapes(), load_patterns()
    table = load_table()
    shapes_path = config.shapes_dir / "shapes.json"
    patterns_path = config.shapes_dir / "patterns.json"
    shapes: tuple[Shape, ...] = ()
    patterns: tuple[PatternRule, ...] = ()
    if shapes_path.exists():
        shapes = parse_shapes(json.loads(shapes_path.read_text()), table)
    if patterns_path.exists():
        patterns = parse_patterns(json.loads(patterns_path.read_text()), table)
    return shapes, patterns


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class HarvestResult:
    records: int
    stats: HarvestStats


def stage_harvest(config: PipelineConfig, **harvester_kwargs) -> HarvestResult:
    """Fetch every source record into the cache; the count is how many
    records this run yielded (resumed runs yield only the remainder)."""
    config.cache_dir.mkdir(parents=True, exist_ok=True)
    harvester = Harvester(
        config.source,
        RawCache(config.cache_dir),
        checkpoint_path=config.checkpoint_path,
        **harvester_kwargs,
    )
    count = sum(1 for _ in harvester.records())
    return HarvestResult(records=count, stats=harvester.stats)


class TransformError(StageError):
    pass


def transform_record(
    record: RawRecord,
    mint: MintConfig,
    rules: Iterable[MappingRule],
    context=None,
) -> tuple[Iri, Graph, dict[str, int]]:
    """Map one raw record to target triples.

    Returns the record's named-graph IRI (from its submission date), the
    mapped triples, and the per-rule output counts.  The record's root
    node gets the minted resource IRI injected as ``@id`` before
    conversion; rsplitting the envelope id keeps a DOI-style source id
    with slashes intact and treats the last segment as the analysis
    suffix.
    """
    context = context or load_default_context()
    source_id, _, suffix = record.source_id.rpartition("/")
    if not source_id or not suffix:
        raise TransformError(
            f"record id {record.source_id!r} does not split into "
            "source id and analysis suffix"
        )
    when = record.submission_date
    resource = mint_resource_iri(mint, when.year, when.month, source_id, suffix)
    if not isinstance(record.payload, Mapping):
        raise TransformError(f"record {record.source_id!r} payload is not an object")
    payload = {**record.payload, "@id": resource.value}
    raw = to_rdf(dataclasses.replace(record, payload=payload), context)
    scoped = relabel_blank_nodes(raw, record.source_id)
    per_rule: dict[str, int] = {}
    mapped = Graph()
    for rule in rules:
        out = apply_rule(scoped, rule)
        per_rule[rule.name] = len(out)
        mapped = mapped.union(out)
    return mint_graph_iri(mint, when), mapped, per_rule


@dataclass(frozen=True, slots=True)
class TransformResult:
    records: int
    skipped: int
    quads: int
    graphs: int
    per_rule: dict[str, int]


def stage_transform(config: PipelineConfig) -> TransformResult:
    """Map every cached record and stage the result as N-Quads files,
    one per named graph, in canonical order."""
    cache = RawCache(config.cache_dir)
    rules = load_rules(config)
    context = load_default_context()
    per_rule: dict[str, int] = {rule.name: 0 for rule in rules}
    by_graph: dict[Iri, set] = {}
    records_per_graph: dict[Iri, int] = {}
    records = 0
    skipped = 0
    for entry in cache.entries():
        try:
            record = cache.load_record(entry)
            graph_iri, mapped, counts = transform_record(
                record, config.mint, rules, context
            )
        except (JsonLdError, TransformError, ValueError) as exc:
            skipped += 1
            logger.warning("skipping record %r: %s", entry.source_id, exc)
            continue
        records += 1
        for name, n in counts.items():
            per_rule[name] = per_rule.get(name, 0) + n
        by_graph.setdefault(graph_iri, set()).update(mapped)
        records_per_graph[graph_iri] = records_per_graph.get(graph_iri, 0) + 1

    if config.staging_dir.exists():
        for stale in config.staging_dir.glob("*.nq"):
            stale.unlink()
    config.staging_dir.mkdir(parents=True, exist_ok=True)
    summary: dict[str, dict] = {}
    total = 0
    for graph_iri in sorted(by_graph, key=lambda g: g.value):
        quads = [Quad(t, graph_iri) for t in by_graph[graph_iri]]
        total += len(quads)
        filename = graph_filename(graph_iri)
        (config.staging_dir / filename).write_text(
            serialize_nquads(quads), encoding="utf-8"
        )
        summary[graph_iri.value] = {
            "file": filename,
            "quads": len(quads),
            "source_records": records_per_graph[graph_iri],
        }
    (config.staging_dir / STAGING_SUMMARY_NAME).write_text(
        json.dumps({"graphs": summary, "per_rule": per_rule}, indent=2, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )
    return TransformResult(
        records=records,
        skipped=skipped,
        quads=total,
        graphs=len(by_graph),
        per_rule=per_rule,
    )


@dataclass(frozen=True, slots=True)
class LoadResult:
    inserted: int
    total: int
    graphs: int


def stage_load(config: PipelineConfig, *, fresh: bool = False) -> LoadResult:
    """Insert the staged quads into the store and persist it."""
    if not config.staging_dir.is_dir():
        raise StageError(f"nothing staged under {config.staging_dir}; run transform")
    summary_path = config.staging_dir / STAGING_SUMMARY_NAME
    records_per_graph: dict[str, int] = {}
    if summary_path.exists():
        summary = json.loads(summary_path.read_text(encoding="utf-8"))
        records_per_graph = {
            g: meta.get("source_records", 0)
            for g, meta in summary.get("graphs", {}).items()
        }
    if fresh and config.store_dir.exists():
        shutil.rmtree(config.store_dir)
    store = Store.load(config.store_dir)
    inserted = 0
    for path in sorted(config.staging_dir.glob("*.nq")):
        quads = parse_nquads(path.read_text(encoding="utf-8"))
        if not quads:
            continue
        graph_value = quads[0].graph.value
        inserted += store.load_quads(
            quads, source_records=records_per_graph.get(graph_value, 0)
        )
    store.persist(config.store_dir)
    stats = store.stats()
    return LoadResult(
        inserted=inserted, total=stats.total_triples, graphs=stats.graph_count
    )


@dataclass(frozen=True, slots=True)
class ValidateResult:
    report: ValidationReport
    violations: int
    warnings: int
    report_path: Path


def stage_validate(config: PipelineConfig) -> ValidateResult:
    """Validate the union graph of the store; writes the report file."""
    store = Store.load(config.store_dir)
    shapes, patterns = load_shape_files(config)
    report = validate(store.triples(), shapes, patterns)
    violations = sum(1 for f in report.findings if f.severity == "violation")
    warnings = sum(1 for f in report.findings if f.severity == "warning")
    config.store_dir.mkdir(parents=True, exist_ok=True)
    config.report_path.write_text(
        json.dumps(report.to_json_dict(), indent=2) + "\n", encoding="utf-8"
    )
    return ValidateResult(
        report=report,
        violations=violations,
        warnings=warnings,
        report_path=config.report_path,
    )


def stage_stats(config: PipelineConfig):
    if not (config.store_dir / MANIFEST_NAME).exists():
        raise StageError(f"no store at {config.store_dir}; run load first")
    return Store.load(config.store_dir).stats()


# ---------------------------------------------------------------------------
# The end-to-end run
# ---------------------------------------------------------------------------


def run_pipeline(config: PipelineConfig, *, fresh: bool = False) -> dict:
    """Harvest, transform, load, validate, stats, in that order.

    Returns the machine-readable run summary.  Aborts at the first
    failing stage: the summary still reports completed stages, carries
    ``ok: false``, and names the failed stage.
    """
    summary: dict[str, Any] = {"ok": True, "stages": {}}

    def timed(name, fn):
        started = time.perf_counter()
        result = fn()
        summary["stages"][name] = {
            "seconds": round(time.perf_counter() - started, 3)
        }
        return result

    try:
        harvest = timed("harvest", lambda: stage_harvest(config))
        summary["stages"]["harvest"].update(
            records=harvest.records, **harvest.stats.to_json_dict()
        )
        transform = timed("transform", lambda: stage_transform(config))
        summary["stages"]["transform"].update(
            records=transform.records,
            skipped=transform.skipped,
            quads=transform.quads,
            graphs=transform.graphs,
            per_rule=transform.per_rule,
        )
        load = timed("load", lambda: stage_load(config, fresh=fresh))
        summary["stages"]["load"].update(
            inserted=load.inserted, total=load.total, graphs=load.graphs
        )
        validated = timed("validate", lambda: stage_validate(config))
        summary["stages"]["validate"].update(
            conforms=validated.report.conforms,
            findings=len(validated.report.findings),
            violations=validated.violations,
            warnings=validated.warnings,
            report=str(validated.report_path),
        )
        if validated.violations:
            summary["ok"] = False
            summary["failed_stage"] = "validate"
            return summary
        stats = timed("stats", lambda: stage_stats(config))
        summary["stages"]["stats"].update(stats.to_json_dict())
    except Exception as exc:
        failed = _current_stage(summary)
        summary["ok"] = False
        summary["failed_stage"] = failed
        summary["error"] = str(exc)
        error = StageError(f"stage {failed} failed: {exc}")
        error.summary = summary
        raise error from exc
    return summary


def _current_stage(summary: dict) -> str:
    """The first stage without a recorded timing is the one that failed."""
    order = ("harvest", "transform", "load", "validate", "stats")
    for name in order:
        if name not in summary["stages"]:
            return name
    return order[-1]
