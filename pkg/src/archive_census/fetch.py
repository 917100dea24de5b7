"""Retrieve archived HTML bodies with caching, rate limiting, and retries.

Bodies are addressed through the archive's raw-content replay form
(`{base}/web/{timestamp}id_/{url}`) so extractors see the original page
without replay chrome.  A directory of fixture pages can stand in for the
network entirely (`fixtures_dir`), in which case no socket is ever opened.
"""

from __future__ import annotations

import enum
import gzip
import hashlib
import json
import logging
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import requests

from .cdx import SnapshotRef

logger = logging.getLogger(__name__)

__all__ = [
    "FetchOutcome",
    "FetchRecord",
    "FetchPolicy",
    "Fetcher",
    "CacheStore",
    "TokenBucket",
    "FixtureTransport",
    "RequestsTransport",
    "replay_url",
]

_REPLAY_TS = re.compile(r"/web/(\d{14})id_/")


def replay_url(ref: SnapshotRef, base: str) -> str:
    """Raw-content replay address for a capture."""
    if not base:
        raise ValueError("replay base must be non-empty")
    return f"{base.rstrip('/')}/web/{ref.timestamp}id_/{ref.original_url}"


class FetchOutcome(enum.Enum):
    OK = "ok"
    REDIRECT_DIVERGENCE = "redirect_divergence"
    ERROR = "error"


@dataclass(frozen=True)
class FetchRecord:
    ref: SnapshotRef
    body_path: str  # cache-relative; "" when outcome is error
    fetched_at: str  # ISO-8601 UTC
    outcome: FetchOutcome
    landing_timestamp: str | None = None  # set on redirect divergence
    detail: str = ""


@dataclass(frozen=True)
class FetchPolicy:
    cache_dir: Path
    rate: float = 2.0  # requests per second
    workers: int = 4
    replay_base: str = "https://web.archive.org"
    fixtures_dir: Path | None = None
    timeout: float = 30.0
    retries: int = 3
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    backoff_cap: float = 60.0
    max_redirect_hops: int = 3


class TokenBucket:
    """Paces requests so consecutive grants are >= 1/rate apart."""

    def __init__(self, rate: float):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.interval = 1.0 / rate
        self._lock = threading.Lock()
        self._next_free = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = time.monotonic()
            wait = self._next_free - now
            self._next_free = max(now, self._next_free) + self.interval
        if wait > 0:
            time.sleep(wait)


@dataclass
class TransportResponse:
    status: int
    body: bytes
    location: str | None = None


class TransportError(RuntimeError):
    """Connection failure or timeout; retryable."""


class RequestsTransport:
    def __init__(self, timeout: float = 30.0, session: requests.Session | None = None):
        self.timeout = timeout
        self.session = session or requests.Session()

    def get(self, url: str) -> TransportResponse:
        try:
            resp = self.session.get(url, timeout=self.timeout, allow_redirects=False)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        return TransportResponse(
            resp.status_code, resp.content, resp.headers.get("Location")
        )


class FixtureTransport:
    """Serve bodies from a directory keyed by (url, timestamp).

    The directory holds a `manifest.jsonl` whose rows are
    {"url": ..., "timestamp": ..., "file": relative-path}.  Unknown pairs
    get a 404.  No socket is ever opened.
    """

    def __init__(self, fixtures_dir: Path):
        self.root = Path(fixtures_dir)
        self.index: dict[tuple[str, str], Path] = {}
        manifest = self.root / "manifest.jsonl"
        with open(manifest, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                self.index[(row["url"], row["timestamp"])] = self.root / row["file"]

    def get(self, url: str) -> TransportResponse:
        m = _REPLAY_TS.search(url)
        if not m:
            return TransportResponse(404, b"not a replay url")
        timestamp = m.group(1)
        original = url[m.end():]
        path = self.index.get((original, timestamp))
        if path is None or not path.exists():
            return TransportResponse(404, b"no fixture")
        return TransportResponse(200, path.read_bytes())


class CacheStore:
    """Body files fanned out two levels deep by key prefix, plus a JSONL
    manifest of fetch records.  Manifest appends are serialized; bodies are
    written to a temp name then renamed so readers never see partial files."""

    def __init__(self, cache_dir: Path):
        self.root = Path(cache_dir)
        self.bodies = self.root / "bodies"
        self.manifest_path = self.root / "manifest.jsonl"
        self.bodies.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()
        self._records: dict[tuple[str, str], FetchRecord] = {}
        self._load_manifest()

    @staticmethod
    def body_key(ref: SnapshotRef) -> str:
        seed = ref.digest or f"{ref.original_url}\t{ref.timestamp}"
        return hashlib.sha1(seed.encode("utf-8")).hexdigest()

    def body_relpath(self, ref: SnapshotRef) -> str:
        key = self.body_key(ref)
        return f"bodies/{key[:2]}/{key[2:4]}/{key}.html.gz"

    def _load_manifest(self) -> None:
        if not self.manifest_path.exists():
            return
        with open(self.manifest_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = _record_from_json(json.loads(line))
                self._records[(record.ref.original_url, record.ref.timestamp)] = record

    def lookup(self, ref: SnapshotRef) -> FetchRecord | None:
        record = self._records.get((ref.original_url, ref.timestamp))
        if record is None or record.outcome is FetchOutcome.ERROR:
            return record
        if not (self.root / record.body_path).exists():
            return None
        return record

    def store_body(self, ref: SnapshotRef, body: bytes) -> str:
        relpath = self.body_relpath(ref)
        target = self.root / relpath
        target.parent.mkdir(parents=True, exist_ok=True)
        if not target.exists():
            tmp = target.with_name(f"{target.name}.{threading.get_ident()}.tmp")
            with gzip.open(tmp, "wb") as fh:
                fh.write(body)
            tmp.rename(target)
        return relpath

    def read_body(self, record: FetchRecord) -> bytes:
        with gzip.open(self.root / record.body_path, "rb") as fh:
            return fh.read()

    def append(self, record: FetchRecord) -> None:
        with self._write_lock:
            self._records[(record.ref.original_url, record.ref.timestamp)] = record
            with open(self.manifest_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(_record_to_json(record), sort_keys=True) + "\n")

    def records(self) -> list[FetchRecord]:
        return list(self._records.values())


def _record_to_json(record: FetchRecord) -> dict:
    ref = record.ref
    return {
        "url": ref.original_url,
        "timestamp": ref.timestamp,
        "status": ref.status,
        "digest": ref.digest,
        "mime": ref.mime,
        "body_path": record.body_path,
        "fetched_at": record.fetched_at,
        "outcome": record.outcome.value,
        "landing_timestamp": record.landing_timestamp,
        "detail": record.detail,
    }


def _record_from_json(row: dict) -> FetchRecord:
    ref = SnapshotRef(
        row["url"], row["timestamp"], row.get("status"), row.get("digest", ""),
        row.get("mime", ""),
    )
    return FetchRecord(
        ref=ref,
        body_path=row.get("body_path", ""),
        fetched_at=row.get("fetched_at", ""),
        outcome=FetchOutcome(row["outcome"]),
        landing_timestamp=row.get("landing_timestamp"),
        detail=row.get("detail", ""),
    )


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Fetcher:
    """Download archived bodies for snapshot refs into a local cache.

    A bounded worker pool shares one token bucket; errors are recorded and
    never abort the batch or invalidate previously cached bodies.
    """

    def __init__(self, policy: FetchPolicy, transport=None):
        self.policy = policy
        if transport is not None:
            self.transport = transport
        elif policy.fixtures_dir is not None:
            self.transport = FixtureTransport(policy.fixtures_dir)
        else:
            self.transport = RequestsTransport(timeout=policy.timeout)
        self.cache = CacheStore(policy.cache_dir)
        self.bucket = TokenBucket(policy.rate)

    def _get_with_retries(self, url: str) -> TransportResponse:
        policy = self.policy
        last: Exception | None = None
        for attempt in range(policy.retries + 1):
            self.bucket.acquire()
            try:
                resp = self.transport.get(url)
            except TransportError as exc:
                last = exc
            else:
                if resp.status < 500:
                    return resp
                last = TransportError(f"HTTP {resp.status}")
            if attempt < policy.retries:
                delay = min(
                    policy.backoff_base * policy.backoff_factor**attempt,
                    policy.backoff_cap,
                )
                time.sleep(delay)
        raise TransportError(str(last))

    def fetch(self, ref: SnapshotRef) -> FetchRecord:
        cached = self.cache.lookup(ref)
        if cached is not None and cached.outcome is not FetchOutcome.ERROR:
            return cached

        url = replay_url(ref, self.policy.replay_base)
        landing: str | None = None
        try:
            resp = self._get_with_retries(url)
            hops = 0
            while 300 <= resp.status < 400:
                hops += 1
                if hops > self.policy.max_redirect_hops or not resp.location:
                    raise TransportError(f"redirect chain too long or empty at {url}")
                m = _REPLAY_TS.search(resp.location)
                if m and m.group(1) != ref.timestamp:
                    landing = m.group(1)
                url = resp.location
                resp = self._get_with_retries(url)
            if resp.status != 200:
                record = FetchRecord(
                    ref, "", _now(), FetchOutcome.ERROR, detail=f"HTTP {resp.status}"
                )
                self.cache.append(record)
                return record
        except TransportError as exc:
            record = FetchRecord(ref, "", _now(), FetchOutcome.ERROR, detail=str(exc))
            self.cache.append(record)
            return record

        body_path = self.cache.store_body(ref, resp.body)
        outcome = (
            FetchOutcome.REDIRECT_DIVERGENCE if landing else FetchOutcome.OK
        )
        record = FetchRecord(
            ref, body_path, _now(), outcome, landing_timestamp=landing
        )
        self.cache.append(record)
        return record

    def fetch_many(self, refs: Iterable[SnapshotRef]) -> list[FetchRecord]:
        refs = list(refs)
        if not refs:
            return []
        with ThreadPoolExecutor(max_workers=self.policy.workers) as pool:
            return list(pool.map(self.fetch, refs))
