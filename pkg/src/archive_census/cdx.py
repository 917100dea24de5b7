"""Archive index (CDX) enumeration: list capture records for a URL prefix.

Sources are either a local index file (plain or gzipped, one record per
line) or a remote CDX-style HTTP endpoint with page-number pagination.
Enumeration filters by prefix/year/status, deduplicates identical
(url, timestamp) rows, and is resumable via a cursor.
"""

from __future__ import annotations

import csv
import gzip
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Iterable, Iterator, TextIO
from urllib.parse import urlsplit

import requests

logger = logging.getLogger(__name__)

__all__ = [
    "SnapshotRef",
    "EnumerationQuery",
    "EnumerationCursor",
    "EnumerationStats",
    "EnumerationInterrupted",
    "IndexFormat",
    "IndexLineError",
    "FileIndexSource",
    "RemoteIndexSource",
    "RetryPolicy",
    "parse_index_line",
    "enumerate_captures",
    "count_by_format_year",
    "normalize_capture_url",
    "write_refs_csv",
    "read_refs_csv",
]

REFS_CSV_HEADER = ["original_url", "timestamp", "status", "digest", "mime"]

# Status placeholder used by index rows that never recorded one.
UNKNOWN_STATUS = None


def _valid_timestamp(ts: str) -> bool:
    if len(ts) != 14 or not ts.isdigit():
        return False
    year = int(ts[:4])
    if not 1996 <= year <= 2100:
        return False
    try:
        datetime.strptime(ts, "%Y%m%d%H%M%S")
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class SnapshotRef:
    """One archive index row: a capture of original_url at timestamp."""

    original_url: str
    timestamp: str  # YYYYMMDDhhmmss, UTC
    status: int | None  # None = status unrecorded in the index
    digest: str
    mime: str = ""

    def validate(self) -> None:
        if not _valid_timestamp(self.timestamp):
            raise ValueError(f"bad timestamp {self.timestamp!r}")
        if self.status is not None and not 100 <= self.status <= 599:
            raise ValueError(f"bad status {self.status!r}")

    @property
    def year(self) -> int:
        return int(self.timestamp[:4])


@dataclass(frozen=True)
class EnumerationQuery:
    """Prefix query over the index.  `prefix` is host-qualified, e.g.
    "youtube.com/user/"."""

    prefix: str
    year_range: tuple[int, int]
    status_filter: frozenset[int | None] = frozenset({200})
    page_size: int = 3000

    def __post_init__(self) -> None:
        if self.year_range[0] > self.year_range[1]:
            raise ValueError("year_range start after end")
        if self.page_size < 1:
            raise ValueError("page_size must be >= 1")


@dataclass(frozen=True)
class EnumerationCursor:
    """Resume point: next page to request plus the last emitted dedup key."""

    page: int = 0
    last_key: tuple[str, str] | None = None


@dataclass
class EnumerationStats:
    rows_read: int = 0
    malformed: int = 0
    filtered: int = 0
    duplicates: int = 0
    emitted: int = 0


class EnumerationInterrupted(RuntimeError):
    """Transport gave up after retries; `cursor` resumes the stream."""

    def __init__(self, cursor: EnumerationCursor, cause: Exception):
        super().__init__(f"enumeration interrupted at page {cursor.page}: {cause}")
        self.cursor = cursor
        self.cause = cause


class IndexLineError(ValueError):
    """A row that does not parse as an index record."""


IndexFormat = str  # "cdx_plain" | "json_array"

_CDX_FIELDS = 7  # urlkey timestamp original mimetype statuscode digest length


def parse_index_line(
    line: str, format: IndexFormat = "cdx_plain", lineno: int | None = None
) -> SnapshotRef:
    """Parse one index row.  Space-separated CDX and positional JSON-array
    forms carry the same seven fields; status "-" maps to the unknown
    sentinel."""
    where = f" (line {lineno})" if lineno is not None else ""
    if format == "json_array":
        try:
            fields = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IndexLineError(f"bad JSON row{where}: {exc}") from exc
        if not isinstance(fields, list):
            raise IndexLineError(f"JSON row is not an array{where}")
        fields = [str(f) for f in fields]
    elif format == "cdx_plain":
        fields = line.split()
    else:
        raise ValueError(f"unknown index format {format!r}")

    if len(fields) != _CDX_FIELDS:
        raise IndexLineError(
            f"expected {_CDX_FIELDS} fields, got {len(fields)}{where}"
        )
    _, timestamp, original, mimetype, statuscode, digest, _ = fields
    status: int | None
    if statuscode == "-":
        status = UNKNOWN_STATUS
    else:
        try:
            status = int(statuscode)
        except ValueError as exc:
            raise IndexLineError(f"bad status {statuscode!r}{where}") from exc
    ref = SnapshotRef(original, timestamp, status, digest, mimetype)
    try:
        ref.validate()
    except ValueError as exc:
        raise IndexLineError(f"{exc}{where}") from exc
    return ref


def normalize_capture_url(url: str) -> str:
    """Dedup normalization: drop scheme and a leading www., keep case.

    Index rows for the same capture commonly differ only in scheme; path
    case is significant for channel IDs so it is preserved.
    """
    for scheme in ("https://", "http://"):
        if url.startswith(scheme):
            url = url[len(scheme):]
            break
    if url.startswith("www."):
        url = url[4:]
    return url


class FileIndexSource:
    """Local index file, one record per line; .gz transparently decompressed.

    Rows are unordered on disk; enumeration sorts them (presorted=False).
    """

    presorted = False

    def __init__(self, path: str, format: IndexFormat | None = None):
        self.path = str(path)
        self.format = format

    def _open(self) -> TextIO:
        if self.path.endswith(".gz"):
            return gzip.open(self.path, "rt", encoding="utf-8", errors="replace")
        return open(self.path, encoding="utf-8", errors="replace")

    def _detect_format(self, line: str) -> IndexFormat:
        if self.format:
            return self.format
        return "json_array" if line.lstrip().startswith("[") else "cdx_plain"

    def iter_pages(
        self, query: EnumerationQuery, start_page: int
    ) -> Iterator[tuple[int, list[tuple[int, str, IndexFormat]]]]:
        # A file is one logical page.  Resume is handled by the caller's
        # last_key skip over the (sorted) stream, so start_page is ignored.
        rows: list[tuple[int, str, IndexFormat]] = []
        with self._open() as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                rows.append((lineno, line, self._detect_format(line)))
        yield 0, rows


@dataclass(frozen=True)
class RetryPolicy:
    base: float = 1.0
    factor: float = 2.0
    cap: float = 60.0
    attempts: int = 6

    def delay(self, attempt: int) -> float:
        return min(self.base * self.factor**attempt, self.cap)


# One in-flight request per index host.
_HOST_LOCKS: dict[str, threading.Lock] = {}
_HOST_LOCKS_GUARD = threading.Lock()


def _host_lock(endpoint: str) -> threading.Lock:
    host = urlsplit(endpoint).netloc or endpoint
    with _HOST_LOCKS_GUARD:
        return _HOST_LOCKS.setdefault(host, threading.Lock())


class TransportError(RuntimeError):
    pass


class RemoteIndexSource:
    """CDX-style HTTP endpoint with page-number pagination.

    The server returns rows already ordered by (urlkey, timestamp), so
    enumeration streams them (presorted=True).
    """

    presorted = True

    def __init__(
        self,
        endpoint: str,
        retry: RetryPolicy = RetryPolicy(),
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
        timeout: float = 60.0,
    ):
        self.endpoint = endpoint
        self.retry = retry
        self.session = session or requests.Session()
        self.sleep = sleep
        self.timeout = timeout

    def _params(self, query: EnumerationQuery, page: int) -> dict[str, str]:
        params = {
            "url": query.prefix,
            "matchType": "prefix",
            "from": str(query.year_range[0]),
            "to": str(query.year_range[1]),
            "page": str(page),
            "pageSize": str(query.page_size),
            "output": "text",
        }
        concrete = [s for s in query.status_filter if s is not None]
        if len(concrete) == 1:
            params["filter"] = f"statuscode:{concrete[0]}"
        return params

    def _fetch_page(self, query: EnumerationQuery, page: int) -> str:
        last: Exception | None = None
        lock = _host_lock(self.endpoint)
        for attempt in range(self.retry.attempts):
            with lock:
                try:
                    resp = self.session.get(
                        self.endpoint,
                        params=self._params(query, page),
                        timeout=self.timeout,
                    )
                except requests.RequestException as exc:
                    last = exc
                else:
                    if resp.status_code == 200:
                        return resp.text
                    last = TransportError(f"HTTP {resp.status_code}")
                    if 400 <= resp.status_code < 500:
                        break
            if attempt < self.retry.attempts - 1:
                self.sleep(self.retry.delay(attempt))
        raise TransportError(f"page {page} failed: {last}") from last

    def iter_pages(
        self, query: EnumerationQuery, start_page: int
    ) -> Iterator[tuple[int, list[tuple[int, str, IndexFormat]]]]:
        page = start_page
        while True:
            body = self._fetch_page(query, page)
            lines = [ln for ln in body.splitlines() if ln.strip()]
            if not lines:
                return
            yield page, [
                (lineno, line, "cdx_plain")
                for lineno, line in enumerate(lines, start=1)
            ]
            page += 1


def _passes(query: EnumerationQuery, ref: SnapshotRef, norm_url: str) -> bool:
    if not norm_url.startswith(normalize_capture_url(query.prefix)):
        return False
    if not query.year_range[0] <= ref.year <= query.year_range[1]:
        return False
    return ref.status in query.status_filter


def enumerate_captures(
    query: EnumerationQuery,
    source,
    cursor: EnumerationCursor | None = None,
    stats: EnumerationStats | None = None,
    on_page: Callable[[EnumerationCursor], None] | None = None,
) -> Iterator[SnapshotRef]:
    """Yield every matching index row once, ordered by (url, timestamp).

    Malformed rows are counted and skipped.  When the source's transport
    gives up mid-stream, EnumerationInterrupted carries a cursor that
    resumes the stream with no gaps and no repeats.  `on_page` receives a
    resume cursor after each completed page.
    """
    cursor = cursor or EnumerationCursor()
    stats = stats if stats is not None else EnumerationStats()
    last_key = cursor.last_key

    def parse_page(rows: Iterable[tuple[int, str, IndexFormat]]) -> Iterator[
        tuple[tuple[str, str], SnapshotRef]
    ]:
        for lineno, line, fmt in rows:
            stats.rows_read += 1
            try:
                ref = parse_index_line(line, fmt, lineno=lineno)
            except IndexLineError as exc:
                stats.malformed += 1
                logger.warning("skipping malformed index row: %s", exc)
                continue
            norm = normalize_capture_url(ref.original_url)
            if not _passes(query, ref, norm):
                stats.filtered += 1
                continue
            yield (norm, ref.timestamp), ref

    if source.presorted:
        # Pages arrive atomically, so the failing page is simply refetched
        # on resume; last_key catches a key duplicated across the boundary.
        pages = source.iter_pages(query, cursor.page)
        while True:
            try:
                page_no, rows = next(pages)
            except StopIteration:
                return
            except TransportError as exc:
                raise EnumerationInterrupted(
                    EnumerationCursor(page=cursor.page, last_key=last_key), exc
                ) from exc
            for key, ref in parse_page(rows):
                if last_key is not None and key == last_key:
                    stats.duplicates += 1
                    continue
                last_key = key
                stats.emitted += 1
                yield ref
            cursor = EnumerationCursor(page=page_no + 1, last_key=last_key)
            if on_page:
                on_page(cursor)
    else:
        collected: dict[tuple[str, str], SnapshotRef] = {}
        for page_no, rows in source.iter_pages(query, cursor.page):
            for key, ref in parse_page(rows):
                if key in collected:
                    stats.duplicates += 1
                    continue
                collected[key] = ref
        for key in sorted(collected):
            if last_key is not None and key <= last_key:
                continue
            last_key = key
            stats.emitted += 1
            yield collected[key]
        if on_page:
            on_page(EnumerationCursor(page=1, last_key=last_key))


def count_by_format_year(refs: Iterable[SnapshotRef]) -> dict[tuple[str, int], int]:
    """Tally captures per (format family, year); rows whose URL does not
    parse as a channel URL fall under "unclassified"."""
    from .identifiers import parse_channel_url

    counts: dict[tuple[str, int], int] = {}
    for ref in refs:
        ident = parse_channel_url(ref.original_url)
        family = ident.family.value if ident else "unclassified"
        key = (family, ref.year)
        counts[key] = counts.get(key, 0) + 1
    return counts


def write_refs_csv(refs: Iterable[SnapshotRef], fh: TextIO) -> int:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(REFS_CSV_HEADER)
    n = 0
    for ref in refs:
        status = "-" if ref.status is None else str(ref.status)
        writer.writerow([ref.original_url, ref.timestamp, status, ref.digest, ref.mime])
        n += 1
    return n


def read_refs_csv(fh: TextIO) -> Iterator[SnapshotRef]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header != REFS_CSV_HEADER:
        raise ValueError(f"unexpected refs CSV header: {header}")
    for row in reader:
        url, ts, status, digest, mime = row
        yield SnapshotRef(url, ts, None if status == "-" else int(status), digest, mime)
