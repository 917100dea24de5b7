"""Persist and query the census and per-channel subscriber time series.

Layout under the store directory:

    census.csv        canonical entities (key, identifiers, ...)
    series/shard-X.csv  points partitioned by key hash, sorted
    keys.csv          key -> shard, point count
    quarantine.csv    ingested rows whose key is not in the census
    tombstones.txt    optional; listed keys are dropped at load

Shards are rewritten whole and renamed into place, so readers never see a
partial file and repeated pipelines produce byte-identical output.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import random
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .extract import ParsedCount
from .identifiers import ChannelIdentifier, Family, canonical_url, parse_channel_url
from .linker import CensusRow, read_census_csv

logger = logging.getLogger(__name__)

__all__ = [
    "SeriesPoint",
    "TimeSeries",
    "QueryResult",
    "CensusStore",
    "NotFoundError",
    "NoDataError",
    "normalize_timestamp_prefix",
    "timestamp_to_epoch",
]

_SHARDS = "0123456789abcdef"


class NotFoundError(KeyError):
    """The channel is not in the census."""


class NoDataError(LookupError):
    """The channel exists but has no subscriber observations."""


@dataclass(frozen=True)
class SeriesPoint:
    timestamp: str
    subs: ParsedCount
    source_url: str


@dataclass(frozen=True)
class TimeSeries:
    key: str
    points: tuple[SeriesPoint, ...]  # strictly increasing timestamps


@dataclass(frozen=True)
class QueryResult:
    key: str
    requested: str
    matched: str
    subs: int
    exact: bool
    distance_seconds: int


def timestamp_to_epoch(timestamp: str) -> int:
    dt = datetime.strptime(timestamp, "%Y%m%d%H%M%S").replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def normalize_timestamp_prefix(prefix: str) -> str:
    """Right-pad a timestamp prefix to the start of its interval:
    "201301" -> "20130101000000"."""
    if (
        not prefix.isdigit()
        or len(prefix) % 2
        or not 4 <= len(prefix) <= 14
    ):
        raise ValueError(f"bad timestamp prefix {prefix!r}")
    tail = "0101000000"  # month, day, hhmmss interval starts
    full = prefix + tail[len(prefix) - 4 :]
    datetime.strptime(full, "%Y%m%d%H%M%S")  # validates calendar
    return full


def _shard_of(key: str) -> str:
    return hashlib.sha1(key.encode("utf-8")).hexdigest()[0]


def _family_group(label: str) -> str:
    family = Family(label)
    return family.group


class CensusStore:
    """Single-writer store over an immutable census.

    `build` creates the directory from census rows; `ingest` append-merges
    keyed subscriber observations; queries never interpolate.
    """

    def __init__(self, root: Path):
        self.root = Path(root)
        census_path = self.root / "census.csv"
        if not census_path.exists():
            raise FileNotFoundError(f"no census at {census_path}")
        with open(census_path, encoding="utf-8") as fh:
            rows = read_census_csv(fh)
        tombstones = self._load_tombstones()
        if tombstones:
            rows = [r for r in rows if r.key not in tombstones]
        self.census: list[CensusRow] = rows
        self.by_key: dict[str, CensusRow] = {r.key: r for r in rows}
        # group:value -> key; first (sorted) key wins on collisions, which
        # only conflicted identifiers produce.
        self.ident_to_key: dict[str, str] = {}
        for row in self.census:
            for label in row.identifiers:
                family_label, value = label.split(":", 1)
                group_key = f"{_family_group(family_label)}:{value}"
                self.ident_to_key.setdefault(group_key, row.key)
            self.ident_to_key.setdefault(row.key, row.key)

    # --- lifecycle -----------------------------------------------------

    @classmethod
    def build(cls, root: Path, census_csv: Path) -> "CensusStore":
        root = Path(root)
        (root / "series").mkdir(parents=True, exist_ok=True)
        target = root / "census.csv"
        tmp = target.with_suffix(".csv.tmp")
        tmp.write_bytes(Path(census_csv).read_bytes())
        tmp.rename(target)
        return cls(root)

    def _load_tombstones(self) -> set[str]:
        path = self.root / "tombstones.txt"
        if not path.exists():
            return set()
        return {
            line.strip()
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        }

    def _shard_path(self, shard: str) -> Path:
        return self.root / "series" / f"shard-{shard}.csv"

    # --- ingestion -----------------------------------------------------

    def ingest(self, rows: Iterable[tuple[str, str, ParsedCount, str]]) -> dict:
        """Append-merge (key, timestamp, count, url) observations.

        Duplicate timestamps collapse keeping an exact count over an
        approximate one, else the already-stored point.  Unknown keys are
        quarantined, never fatal.  Re-ingesting the same rows is a no-op.
        """
        tombstones = self._load_tombstones()
        per_shard: dict[str, list[tuple[str, str, ParsedCount, str]]] = {}
        quarantined = 0
        accepted = 0
        for key, ts, count, url in rows:
            if key not in self.by_key or key in tombstones:
                self._quarantine(key, ts, count, url)
                quarantined += 1
                continue
            per_shard.setdefault(_shard_of(key), []).append((key, ts, count, url))
            accepted += 1

        for shard in sorted(per_shard):
            series = self._read_shard(shard)
            for key, ts, count, url in per_shard[shard]:
                points = series.setdefault(key, {})
                existing = points.get(ts)
                if existing is None or (not existing[0].exact and count.exact):
                    points[ts] = (count, url)
            self._write_shard(shard, series)
        self._write_key_index()
        return {"accepted": accepted, "quarantined": quarantined}

    def _quarantine(self, key: str, ts: str, count: ParsedCount, url: str) -> None:
        path = self.root / "quarantine.csv"
        new = not path.exists()
        with open(path, "a", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if new:
                writer.writerow(["key", "timestamp", "subs", "exact", "url"])
            writer.writerow([key, ts, count.value, int(count.exact), url])

    def _read_shard(self, shard: str) -> dict[str, dict[str, tuple[ParsedCount, str]]]:
        path = self._shard_path(shard)
        series: dict[str, dict[str, tuple[ParsedCount, str]]] = {}
        if not path.exists():
            return series
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)  # header
            for key, ts, value, exact, url in reader:
                series.setdefault(key, {})[ts] = (
                    ParsedCount(int(value), bool(int(exact))),
                    url,
                )
        return series

    def _write_shard(
        self, shard: str, series: dict[str, dict[str, tuple[ParsedCount, str]]]
    ) -> None:
        path = self._shard_path(shard)
        tmp = path.with_suffix(".csv.tmp")
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["key", "timestamp", "subs", "exact", "url"])
            for key in sorted(series):
                for ts in sorted(series[key]):
                    count, url = series[key][ts]
                    writer.writerow([key, ts, count.value, int(count.exact), url])
        tmp.rename(path)

    def _write_key_index(self) -> None:
        counts: dict[str, tuple[str, int]] = {}
        for shard in _SHARDS:
            for key, points in self._read_shard(shard).items():
                counts[key] = (shard, len(points))
        tmp = self.root / "keys.csv.tmp"
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["key", "shard", "points"])
            for key in sorted(counts):
                shard, n = counts[key]
                writer.writerow([key, shard, n])
        tmp.rename(self.root / "keys.csv")

    # --- queries --------------------------------------------------------

    def series(self, key: str) -> TimeSeries:
        if key not in self.by_key:
            raise NotFoundError(key)
        data = self._read_shard(_shard_of(key)).get(key, {})
        points = tuple(
            SeriesPoint(ts, count, url)
            for ts, (count, url) in sorted(data.items())
        )
        return TimeSeries(key, points)

    def iter_all_series(self) -> Iterator[TimeSeries]:
        """All non-empty series, one shard scan; key order within a shard."""
        for shard in _SHARDS:
            data = self._read_shard(shard)
            for key in sorted(data):
                points = tuple(
                    SeriesPoint(ts, count, url)
                    for ts, (count, url) in sorted(data[key].items())
                )
                yield TimeSeries(key, points)

    def resolve(self, key_or_url: str) -> str:
        """Map a channel URL or census key to its canonical key."""
        candidate = key_or_url
        ident = parse_channel_url(key_or_url)
        if ident is not None:
            candidate = (
                ident.value
                if ident.family is Family.CHANNEL_ID
                else f"{ident.family.group}:{ident.value}"
            )
        key = self.ident_to_key.get(candidate)
        if key is None:
            raise NotFoundError(key_or_url)
        return key

    def fetch_closest(self, key_or_url: str, closest: str) -> QueryResult:
        key = self.resolve(key_or_url)
        series = self.series(key)
        if not series.points:
            raise NoDataError(key)
        target = normalize_timestamp_prefix(closest)
        target_epoch = timestamp_to_epoch(target)
        best = min(
            series.points,
            key=lambda p: (abs(timestamp_to_epoch(p.timestamp) - target_epoch), p.timestamp),
        )
        return QueryResult(
            key=key,
            requested=closest,
            matched=best.timestamp,
            subs=best.subs.value,
            exact=best.subs.exact,
            distance_seconds=abs(timestamp_to_epoch(best.timestamp) - target_epoch),
        )

    def sample(
        self, n: int, by: str | None = None, seed: int = 0
    ) -> list[CensusRow]:
        """Uniform sample without replacement over census rows, optionally
        restricted to rows carrying an identifier of one family."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if by is not None:
            valid = {f.value for f in Family}
            if by not in valid:
                raise ValueError(
                    f"unknown family {by!r}; valid: {', '.join(sorted(valid))}"
                )
            rows = [r for r in self.census if by in r.families()]
        else:
            rows = list(self.census)
        rows.sort(key=lambda r: r.key)
        rng = random.Random(seed)
        if n >= len(rows):
            return rows
        return rng.sample(rows, n)

    def rank_frequency(
        self, keys: Iterable[str] | None = None
    ) -> list[tuple[int, int]]:
        """Capture counts in descending order with 1-based ranks."""
        if keys is None:
            counts = [row.capture_count for row in self.census]
        else:
            counts = [
                self.by_key[k].capture_count for k in keys if k in self.by_key
            ]
        counts.sort(reverse=True)
        return [(rank, count) for rank, count in enumerate(counts, start=1)]

    def row_to_json(self, row: CensusRow, prefer_family: str | None = None) -> dict:
        """Census row as the query surface presents it, with a canonical URL."""
        url = None
        for label in row.identifiers:
            family_label, value = label.split(":", 1)
            if prefer_family is None or family_label == prefer_family:
                url = canonical_url(ChannelIdentifier(Family(family_label), value))
                break
        if url is None and row.key.startswith(("user:", "custom:", "handle:")):
            prefix, value = row.key.split(":", 1)
            mapping = {
                "user": f"/user/{value}",
                "custom": f"/c/{value}",
                "handle": f"/@{value}",
            }
            url = mapping[prefix]
        if url is None:
            url = f"/channel/{row.key}"
        return {
            "key": row.key,
            "url": url,
            "identifiers": list(row.identifiers),
            "first_capture": row.first_capture,
            "last_capture": row.last_capture,
            "capture_count": row.capture_count,
        }
