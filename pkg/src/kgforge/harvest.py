"""Harvesting raw JSON-LD records into a content-addressed cache.

Records arrive either from a paged HTTP API or, for offline runs and
tests, from a directory of JSON files.  Each record travels in a small
envelope::

    {"id": "10.14272/<inchikey>/<analysis>",
     "submitted": "2014-05-17",
     "metadata": { ... schema.org JSON-LD ... }}

The cache is addressed by the SHA-256 of the envelope bytes, so an
unchanged record costs nothing to re-harvest and the transform stage can
read raw payloads without touching the source again.  A checkpoint file
written before every yield makes an interrupted run resumable without
duplicates; a completed run removes it.

Time and randomness are injected (``Clock``, ``random.Random``) so
backoff and rate-limit behavior are testable without real waiting.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterator

from .jsonld import RawRecord, parse_payload

logger = logging.getLogger(__name__)

MODES = ("directory", "http")

INDEX_NAME = "index.json"
CHECKPOINT_NAME = "harvest.checkpoint.json"

#: Longest single backoff pause, seconds.
BACKOFF_CAP = 30.0


class HarvestError(RuntimeError):
    """The source could not be read, even after retries."""


class CacheCorruption(RuntimeError):
    """A cached payload no longer matches its recorded digest."""


@dataclass(frozen=True, slots=True)
class SourceConfig:
    base_url: str
    mode: str = "directory"
    page_size: int = 100
    since: date | None = None
    rate_limit: float = 5.0
    max_retries: int = 3

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not self.base_url:
            raise ValueError("base_url must be non-empty")
        if self.page_size < 1:
            raise ValueError("page_size must be at least 1")
        if self.rate_limit <= 0:
            raise ValueError("rate_limit must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries cannot be negative")


class Clock:
    """Wall and monotonic time plus sleeping, swappable in tests."""

    def now(self) -> datetime:
        return datetime.now(timezone.utc)

    def monotonic(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


@dataclass(frozen=True, slots=True)
class CacheEntry:
    source_id: str
    submission_date: date
    content_digest: str
    path: Path
    fetched_at: datetime


class RawCache:
    """Content-addressed envelope store: ``<digest[:2]>/<digest>.json``
    blobs plus an ``index.json`` mapping source ids to digests."""

    def __init__(self, directory: Path | str):
        self.directory = Path(directory)
        self._index: dict[str, dict] = {}
        index_path = self.directory / INDEX_NAME
        if index_path.exists():
            self._index = json.loads(index_path.read_text(encoding="utf-8"))

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, source_id: str) -> bool:
        return source_id in self._index

    def get(self, source_id: str) -> CacheEntry | None:
        doc = self._index.get(source_id)
        if doc is None:
            return None
        return CacheEntry(
            source_id=source_id,
            submission_date=date.fromisoformat(doc["submitted"]),
            content_digest=doc["digest"],
            path=self.directory / doc["file"],
            fetched_at=datetime.fromisoformat(doc["fetched_at"]),
        )

    def put(
        self, source_id: str, submitted: date, envelope: bytes, fetched_at: datetime
    ) -> CacheEntry:
        digest = hashlib.sha256(envelope).hexdigest()
        relative = f"{digest[:2]}/{digest}.json"
        blob = self.directory / relative
        if not blob.exists():
            blob.parent.mkdir(parents=True, exist_ok=True)
            blob.write_bytes(envelope)
        self._index[source_id] = {
            "digest": digest,
            "file": relative,
            "submitted": submitted.isoformat(),
            "fetched_at": fetched_at.isoformat(),
        }
        self._save_index()
        return self.get(source_id)

    def read_envelope(self, entry: CacheEntry) -> bytes:
        """The stored envelope bytes, verified against the digest."""
        data = entry.path.read_bytes()
        if hashlib.sha256(data).hexdigest() != entry.content_digest:
            raise CacheCorruption(
                f"cached payload for {entry.source_id!r} does not match its digest"
            )
        return data

    def entries(self) -> Iterator[CacheEntry]:
        """All cache entries in source-id order."""
        for source_id in sorted(self._index):
            yield self.get(source_id)

    def load_record(self, entry: CacheEntry) -> RawRecord:
        return _record_from_envelope(self.read_envelope(entry), entry.fetched_at)

    def _save_index(self) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        (self.directory / INDEX_NAME).write_text(
            json.dumps(self._index, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


def parse_envelope(raw: bytes) -> tuple[str, date, bytes]:
    """Validate envelope bytes; returns (source id, submission date, raw)."""
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"envelope is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("envelope must be a JSON object")
    source_id = doc.get("id")
    if not isinstance(source_id, str) or not source_id:
        raise ValueError("envelope is missing a non-empty 'id'")
    submitted = doc.get("submitted")
    if not isinstance(submitted, str):
        raise ValueError("envelope is missing 'submitted'")
    try:
        when = date.fromisoformat(submitted)
    except ValueError as exc:
        raise ValueError(f"bad 'submitted' date: {submitted!r}") from exc
    if "metadata" not in doc:
        raise ValueError("envelope is missing 'metadata'")
    return source_id, when, raw


def _record_from_envelope(raw: bytes, fetched_at: datetime) -> RawRecord:
    source_id, when, _ = parse_envelope(raw)
    payload = parse_payload(raw.decode("utf-8"))["metadata"]
    return RawRecord(
        source_id=source_id,
        submission_date=when,
        payload=payload,
        fetched_at=fetched_at,
    )


@dataclass
class HarvestStats:
    pages_fetched: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    skipped_malformed: int = 0
    filtered_out: int = 0
    yielded: int = 0
    resumed_past: int = 0

    def to_json_dict(self) -> dict:
        return dict(vars(self))


class Harvester:
    """One harvesting run over a configured source."""

    def __init__(
        self,
        config: SourceConfig,
        cache: RawCache,
        *,
        checkpoint_path: Path | None = None,
        clock: Clock | None = None,
        rng: random.Random | None = None,
    ):
        self.config = config
        self.cache = cache
        self.checkpoint_path = checkpoint_path
        self.clock = clock or Clock()
        self.rng = rng or random.Random()
        self.stats = HarvestStats()
        self._last_request: float | None = None

    # -- the run ---------------------------------------------------------

    def records(self) -> Iterator[RawRecord]:
        """Yield each source record exactly once, in source order.

        The checkpoint is written before every yield, so a consumer that
        stops early can resume without re-yielding; full consumption
        removes the checkpoint.
        """
        done = self._load_checkpoint()
        for raw in self._envelopes():
            try:
                source_id, submitted, _ = parse_envelope(raw)
            except ValueError as exc:
                self.stats.skipped_malformed += 1
                logger.warning("skipping malformed record: %s", exc)
                continue
            cached = self.cache.get(source_id)
            digest = hashlib.sha256(raw).hexdigest()
            if cached is not None and cached.content_digest == digest:
                self.stats.cache_hits += 1
                fetched_at = cached.fetched_at
            else:
                self.stats.cache_misses += 1
                fetched_at = self.clock.now()
                self.cache.put(source_id, submitted, raw, fetched_at)
            if self.config.since is not None and submitted < self.config.since:
                self.stats.filtered_out += 1
                continue
            if source_id in done:
                self.stats.resumed_past += 1
                continue
            record = _record_from_envelope(raw, fetched_at)
            done.add(source_id)
            self._save_checkpoint(done)
            self.stats.yielded += 1
            yield record
        self._clear_checkpoint()

    # -- checkpointing -----------------------------------------------------

    def _load_checkpoint(self) -> set[str]:
        path = self.checkpoint_path
        if path is None or not path.exists():
            return set()
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            yielded = doc["yielded"]
            if not isinstance(yielded, list):
                raise TypeError("'yielded' must be a list")
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            logger.warning("corrupt checkpoint %s (%s); starting over", path, exc)
            return set()
        return set(yielded)

    def _save_checkpoint(self, done: set[str]) -> None:
        if self.checkpoint_path is None:
            return
        self.checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
        self.checkpoint_path.write_text(
            json.dumps({"yielded": sorted(done)}, indent=2) + "\n",
            encoding="utf-8",
        )

    def _clear_checkpoint(self) -> None:
        if self.checkpoint_path is not None:
            self.checkpoint_path.unlink(missing_ok=True)

    # -- sources -----------------------------------------------------------

    def _envelopes(self) -> Iterator[bytes]:
        if self.config.mode == "directory":
            yield from self._directory_envelopes()
        else:
            yield from self._http_envelopes()

    def _directory_envelopes(self) -> Iterator[bytes]:
        root = Path(self.config.base_url)
        if not root.is_dir():
            raise HarvestError(f"source directory does not exist: {root}")
        for path in sorted(root.glob("*.json")):
            yield path.read_bytes()

    def _http_envelopes(self) -> Iterator[bytes]:
        url: str | None = self._page_url(1)
        page = 1
        while url is not None:
            body = self._fetch_json(url)
            if isinstance(body, list):
                records, has_next, next_url = body, False, None
            elif isinstance(body, dict) and isinstance(body.get("records"), list):
                records = body["records"]
                has_next = "next" in body
                next_url = body.get("next")
            else:
                raise HarvestError(f"unexpected page shape from {url}")
            if not records:
                return
            for doc in records:
                yield json.dumps(doc).encode("utf-8")
            if has_next:
                # The source drives pagination itself; a null link ends
                # the run without a trailing empty-page fetch.
                url = next_url
            else:
                page += 1
                url = self._page_url(page)

    def _page_url(self, page: int) -> str:
        separator = "&" if "?" in self.config.base_url else "?"
        return (
            f"{self.config.base_url}{separator}"
            f"page={page}&per_page={self.config.page_size}"
        )

    def _fetch_json(self, url: str):
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            self._respect_rate_limit()
            try:
                with urllib.request.urlopen(url, timeout=30) as response:
                    body = json.loads(response.read())
                self.stats.pages_fetched += 1
                return body
            except (urllib.error.URLError, json.JSONDecodeError, OSError) as exc:
                last_error = exc
                if attempt == self.config.max_retries:
                    break
                delay = min(BACKOFF_CAP, 0.5 * (2**attempt))
                # Jitter into [delay/2, delay) so synchronized clients
                # do not retry in lockstep.
                self.clock.sleep(delay * (0.5 + self.rng.random() / 2))
        raise HarvestError(
            f"giving up on {url} after {self.config.max_retries + 1} attempts: "
            f"{last_error}"
        )

    def _respect_rate_limit(self) -> None:
        interval = 1.0 / self.config.rate_limit
        now = self.clock.monotonic()
        if self._last_request is not None:
            wait = self._last_request + interval - now
            if wait > 0:
                self.clock.sleep(wait)
                now = self.clock.monotonic()
        self._last_request = now
