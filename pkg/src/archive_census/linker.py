"""Resolve many identifiers to one channel entity.

Embedded channel IDs are the only join evidence: every capture that pairs
a username/custom/handle identifier with an embedded ID contributes an
edge, and entities are the connected components.  An identifier that
claims two different IDs over time is a conflict — it is never merged
silently; its captures are attributed to the claimed key whose evidence
window is nearest in time.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .extract import ParsedCount
from .identifiers import ChannelIdentifier, Family, parse_channel_url

logger = logging.getLogger(__name__)

__all__ = [
    "CaptureObservation",
    "IdentifierSpan",
    "AttributedCapture",
    "ChannelEntity",
    "CensusRow",
    "LinkConflict",
    "LinkResult",
    "link",
    "lower_bound_channels",
    "observation_from_json",
    "write_census_csv",
    "read_census_csv",
    "write_conflicts_csv",
    "write_observations_csv",
    "CENSUS_CSV_HEADER",
    "OBSERVATIONS_CSV_HEADER",
]

CENSUS_CSV_HEADER = [
    "key",
    "identifiers",
    "first_capture",
    "last_capture",
    "capture_count",
]

# Preference order when describing an entity or reporting a conflict.
_FAMILY_PRIORITY = {
    Family.CHANNEL_ID: 0,
    Family.USERNAME: 1,
    Family.LEGACY_USERNAME: 2,
    Family.VANITY_USERNAME: 3,
    Family.CUSTOM_NAME: 4,
    Family.HANDLE: 5,
}


@dataclass(frozen=True)
class CaptureObservation:
    """One extracted capture, ready for linking."""

    url: str
    timestamp: str
    subs: ParsedCount | None = None
    channel_id: str | None = None  # embedded in page metadata
    username: str | None = None  # displayed on page
    handle: str | None = None


@dataclass(frozen=True)
class IdentifierSpan:
    identifier: ChannelIdentifier
    first_seen: str
    last_seen: str


@dataclass(frozen=True)
class AttributedCapture:
    timestamp: str
    url: str
    subs: ParsedCount | None


@dataclass(frozen=True)
class ChannelEntity:
    key: str  # the channel ID when known, else user:/custom:/handle: prefix
    identifiers: tuple[IdentifierSpan, ...]
    captures: tuple[AttributedCapture, ...]
    capture_count: int

    @property
    def first_capture(self) -> str:
        return self.captures[0].timestamp if self.captures else ""

    @property
    def last_capture(self) -> str:
        return self.captures[-1].timestamp if self.captures else ""

    @property
    def has_channel_id(self) -> bool:
        return not self.key.startswith(("user:", "custom:", "handle:"))


@dataclass(frozen=True)
class LinkConflict:
    identifier: ChannelIdentifier
    claimed_keys: tuple[tuple[str, str], ...]  # (canonical key, first evidence ts)


@dataclass
class LinkResult:
    entities: list[ChannelEntity]
    conflicts: list[LinkConflict]
    dropped: int = 0  # captures carrying no identifier at all


class _DisjointSet:
    def __init__(self) -> None:
        self.parent: dict[str, str] = {}

    def add(self, node: str) -> None:
        self.parent.setdefault(node, node)

    def find(self, node: str) -> str:
        root = node
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[node] != root:  # path compression
            self.parent[node], node = root, self.parent[node]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # Deterministic representative: smaller string wins.
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def _node_key(identifier: ChannelIdentifier) -> str:
    # The three username variants share one namespace and one node.
    if identifier.family is Family.CHANNEL_ID:
        return identifier.value
    return f"{identifier.family.group}:{identifier.value}"


def _identifiers_of(
    obs: CaptureObservation,
    url_cache: dict[str, ChannelIdentifier | None] | None = None,
) -> list[ChannelIdentifier]:
    idents: list[ChannelIdentifier] = []
    if url_cache is None:
        url_ident = parse_channel_url(obs.url)
    elif obs.url in url_cache:
        url_ident = url_cache[obs.url]
    else:
        url_ident = url_cache[obs.url] = parse_channel_url(obs.url)
    if url_ident is not None:
        idents.append(url_ident)
    if obs.channel_id:
        idents.append(
            ChannelIdentifier(Family.CHANNEL_ID, obs.channel_id, raw=obs.channel_id)
        )
    if obs.username:
        idents.append(ChannelIdentifier(Family.USERNAME, obs.username.lower()))
    if obs.handle:
        idents.append(ChannelIdentifier(Family.HANDLE, obs.handle.lower()))
    # Drop same-node repeats while preserving order.
    seen: set[tuple[Family, str]] = set()
    unique = []
    for ident in idents:
        key = (ident.family, ident.value)
        if key not in seen:
            seen.add(key)
            unique.append(ident)
    return unique


def _window_distance(ts: str, window: tuple[str, str]) -> int:
    t, (lo, hi) = int(ts), (int(window[0]), int(window[1]))
    if lo <= t <= hi:
        return 0
    return min(abs(t - lo), abs(t - hi))


def link(observations: Iterable[CaptureObservation]) -> LinkResult:
    """Merge capture observations into canonical channel entities.

    Deterministic regardless of input order: dedup is by (url, timestamp),
    components are order-free, and every tie-break is explicit.
    """
    # Dedup captures by (url, timestamp).
    captures: dict[tuple[str, str], CaptureObservation] = {}
    for obs in observations:
        captures.setdefault((obs.url, obs.timestamp), obs)

    dsu = _DisjointSet()
    # node -> claimed channel-ID value -> (first, last) evidence timestamps
    claims: dict[str, dict[str, tuple[str, str]]] = {}
    # node -> exact identifiers observed, with seen windows
    spans: dict[str, dict[tuple[Family, str], tuple[str, str]]] = {}
    node_ids: dict[tuple[str, str], list[ChannelIdentifier]] = {}
    url_cache: dict[str, ChannelIdentifier | None] = {}

    def widen(d: dict, key, ts: str) -> None:
        lo, hi = d.get(key, (ts, ts))
        d[key] = (min(lo, ts), max(hi, ts))

    for (url, ts), obs in captures.items():
        idents = _identifiers_of(obs, url_cache)
        node_ids[(url, ts)] = idents
        cid = next(
            (i.value for i in idents if i.family is Family.CHANNEL_ID), None
        )
        for ident in idents:
            node = _node_key(ident)
            dsu.add(node)
            widen(spans.setdefault(node, {}), (ident.family, ident.value), ts)
            if cid and ident.family is not Family.CHANNEL_ID:
                widen(claims.setdefault(node, {}), cid, ts)

    conflicted = {node for node, ids in claims.items() if len(ids) >= 2}

    for node, ids in claims.items():
        if node in conflicted:
            continue
        (cid,) = ids
        dsu.union(node, cid)

    # Canonical key per component: its channel ID if one exists, else the
    # component is a singleton non-ID node whose own key stands.
    component_key: dict[str, str] = {}
    for node in dsu.parent:
        root = dsu.find(node)
        if not node.startswith(("user:", "custom:", "handle:")):
            component_key[root] = node
    for node in dsu.parent:
        root = dsu.find(node)
        component_key.setdefault(root, node)

    def key_of_node(node: str) -> str:
        return component_key[dsu.find(node)]

    # Attribute each capture to exactly one entity key.
    entity_captures: dict[str, list[AttributedCapture]] = {}
    entity_idents: dict[str, dict[tuple[Family, str], tuple[str, str]]] = {}
    dropped = 0

    def claim_windows(node: str) -> list[tuple[str, tuple[str, str]]]:
        # (canonical key of claimed ID, evidence window), by first evidence.
        items = [(cid, window) for cid, window in claims[node].items()]
        items.sort(key=lambda kv: (kv[1][0], kv[0]))
        return [(key_of_node(cid), window) for cid, window in items]

    for (url, ts), obs in captures.items():
        idents = node_ids[(url, ts)]
        if not idents:
            dropped += 1
            continue
        cid = next((i.value for i in idents if i.family is Family.CHANNEL_ID), None)
        if cid is not None:
            key = key_of_node(cid)
        else:
            node = _node_key(idents[0])
            if node in conflicted:
                windows = claim_windows(node)
                key = min(
                    windows,
                    key=lambda kw: (_window_distance(ts, kw[1]), kw[1][0], kw[0]),
                )[0]
            else:
                key = key_of_node(node)
        entity_captures.setdefault(key, []).append(
            AttributedCapture(ts, url, obs.subs)
        )
        span_map = entity_idents.setdefault(key, {})
        for ident in idents:
            node = _node_key(ident)
            if node in conflicted and ident.family is not Family.CHANNEL_ID:
                # Conflicted identifiers belong to several entities; scope
                # the span to this entity's attributed captures.
                lo, hi = span_map.get((ident.family, ident.value), (ts, ts))
                span_map[(ident.family, ident.value)] = (min(lo, ts), max(hi, ts))
            else:
                lo, hi = spans[node][(ident.family, ident.value)]
                span_map[(ident.family, ident.value)] = (lo, hi)

    entities = []
    for key in sorted(entity_captures):
        caps = sorted(entity_captures[key], key=lambda c: (c.timestamp, c.url))
        ident_spans = tuple(
            IdentifierSpan(ChannelIdentifier(fam, val), lo, hi)
            for (fam, val), (lo, hi) in sorted(
                entity_idents[key].items(),
                key=lambda kv: (_FAMILY_PRIORITY[kv[0][0]], kv[0][1]),
            )
        )
        entities.append(
            ChannelEntity(
                key=key,
                identifiers=ident_spans,
                captures=tuple(caps),
                capture_count=len(caps),
            )
        )

    conflicts = []
    for node in sorted(conflicted):
        fam_vals = sorted(
            spans[node], key=lambda fv: (_FAMILY_PRIORITY[fv[0]], fv[1])
        )
        family, value = fam_vals[0]
        claimed = tuple(
            (key, window[0]) for key, window in claim_windows(node)
        )
        conflicts.append(
            LinkConflict(ChannelIdentifier(family, value), claimed)
        )

    return LinkResult(entities=entities, conflicts=conflicts, dropped=dropped)


def lower_bound_channels(entities: Iterable[ChannelEntity]) -> int:
    """Entities holding a channel ID: the dedupable core of the census."""
    return sum(1 for e in entities if e.has_channel_id)


def observation_from_json(record: dict) -> CaptureObservation:
    subs = None
    if "subs" in record:
        subs = ParsedCount(int(record["subs"]), bool(record.get("subs_exact", True)))
    return CaptureObservation(
        url=record["url"],
        timestamp=record["timestamp"],
        subs=subs,
        channel_id=record.get("channel_id"),
        username=record.get("username"),
        handle=record.get("handle"),
    )


def _identifier_label(span: IdentifierSpan) -> str:
    return f"{span.identifier.family.value}:{span.identifier.value}"


def write_census_csv(entities: Iterable[ChannelEntity], fh: TextIO) -> int:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CENSUS_CSV_HEADER)
    n = 0
    for entity in entities:
        writer.writerow(
            [
                entity.key,
                "|".join(_identifier_label(s) for s in entity.identifiers),
                entity.first_capture,
                entity.last_capture,
                entity.capture_count,
            ]
        )
        n += 1
    return n


@dataclass(frozen=True)
class CensusRow:
    key: str
    identifiers: tuple[str, ...]  # "family:value" labels
    first_capture: str
    last_capture: str
    capture_count: int

    def families(self) -> set[str]:
        return {label.split(":", 1)[0] for label in self.identifiers}


def read_census_csv(fh: TextIO) -> list[CensusRow]:
    reader = csv.reader(fh)
    header = next(reader, None)
    if header != CENSUS_CSV_HEADER:
        raise ValueError(f"unexpected census CSV header: {header}")
    rows = []
    for key, idents, first, last, count in reader:
        labels = tuple(idents.split("|")) if idents else ()
        rows.append(CensusRow(key, labels, first, last, int(count)))
    return rows


def write_conflicts_csv(conflicts: Iterable[LinkConflict], fh: TextIO) -> int:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["identifier", "claimed_keys"])
    n = 0
    for conflict in conflicts:
        label = f"{conflict.identifier.family.value}:{conflict.identifier.value}"
        claimed = "|".join(f"{key}@{ts}" for key, ts in conflict.claimed_keys)
        writer.writerow([label, claimed])
        n += 1
    return n


OBSERVATIONS_CSV_HEADER = ["key", "timestamp", "subs", "exact", "url"]


def write_observations_csv(entities: Iterable[ChannelEntity], fh: TextIO) -> int:
    """Keyed subscriber observations, the store's ingestion format.
    Captures without a decoded count are omitted."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(OBSERVATIONS_CSV_HEADER)
    n = 0
    for entity in entities:
        for cap in entity.captures:
            if cap.subs is None:
                continue
            writer.writerow(
                [entity.key, cap.timestamp, cap.subs.value, int(cap.subs.exact), cap.url]
            )
            n += 1
    return n
