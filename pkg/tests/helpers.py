"""Shared builders and brute-force oracles for the test suite."""

from __future__ import annotations

import hashlib
import random
from collections import defaultdict
from pathlib import Path

from archive_census.extract import ParsedCount
from archive_census.linker import CaptureObservation
from archive_census.store import CensusStore

QUARTER_STARTS = {1: "01", 2: "04", 3: "07", 4: "10"}
QUARTER_MONTH = {1: "02", 2: "05", 3: "08", 4: "11"}


def quarter_timestamp(year: int, quarter: int, day: int = 15) -> str:
    return f"{year}{QUARTER_STARTS[quarter]}{day:02d}000000"


def month_timestamp(year: int, month: int, day: int = 15) -> str:
    return f"{year}{month:02d}{day:02d}000000"


def build_store(tmp_path: Path, rows, census_rows, name: str = "store") -> CensusStore:
    """Create a store from explicit census rows and observation tuples.

    census_rows: list of (key, identifier labels, first, last, count)
    rows: list of (key, timestamp, subs_value, exact, url)
    """
    census_path = tmp_path / f"{name}-census.csv"
    with open(census_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("key,identifiers,first_capture,last_capture,capture_count\n")
        for key, labels, first, last, count in census_rows:
            fh.write(f'{key},{"|".join(labels)},{first},{last},{count}\n')
    store = CensusStore.build(tmp_path / name, census_path)
    store.ingest(
        (key, ts, ParsedCount(value, exact), url)
        for key, ts, value, exact, url in rows
    )
    return store


def store_from_observations(tmp_path: Path, obs, name: str = "store") -> CensusStore:
    """Store whose census is one user-keyed entity per distinct key in obs.

    obs: list of (key, timestamp, subs_value, url); key like "user:ch0001".
    """
    per_key = defaultdict(list)
    for key, ts, value, url in obs:
        per_key[key].append((ts, value, url))
    census_rows = []
    for key in sorted(per_key):
        tss = sorted(ts for ts, _, _ in per_key[key])
        label = key.replace("user:", "username:")
        census_rows.append((key, [label], tss[0], tss[-1], len(tss)))
    rows = [(key, ts, value, True, url) for key, ts, value, url in obs]
    return build_store(tmp_path, rows, census_rows, name=name)


def quarter_capture_ts(year: int, quarter: int, day: int = 10) -> str:
    return f"{year}{QUARTER_MONTH[quarter]}{day:02d}000000"


def scaled_cohort_observations():
    """Synthetic capture set mirroring the early-years cohort at 1:1000.

    Distinct-quarter counts: 10 channels x 32, 100 x 8, 1 x 4, 937 x 2,
    500 x 1.  Walking the ranking with budget 2,998 selects exactly the
    first 1,048 channels.
    """
    quarters = [(y, q) for y in range(2006, 2014) for q in (1, 2, 3, 4)]
    sizes = [32] * 10 + [8] * 100 + [4] * 1 + [2] * 937 + [1] * 500
    obs = []
    for i, n_quarters in enumerate(sizes):
        key = f"user:ch{i:04d}"
        url = f"https://www.youtube.com/user/ch{i:04d}"
        rng = random.Random(i)
        for y, q in sorted(rng.sample(quarters, n_quarters)):
            obs.append((key, quarter_capture_ts(y, q), 1000 + i, url))
            if i % 97 == 0:  # occasional second capture later in the quarter
                obs.append((key, quarter_capture_ts(y, q, day=25), 1001 + i, url))
    return obs, sizes


def run_offline_pipeline(workdir: Path, cdx_dir: Path, pages_dir: Path) -> Path:
    """Drive enumerate -> fetch(--fixtures) -> extract -> link -> ingest via
    the CLI; returns the store directory."""
    from archive_census.cli import main

    workdir.mkdir(parents=True, exist_ok=True)
    refs = workdir / "refs.csv"
    cache = workdir / "cache"
    captures = workdir / "captures.jsonl"
    census = workdir / "census.csv"
    store = workdir / "store"

    steps = [
        [
            "enumerate",
            "--index-file", str(cdx_dir / "e2e.cdx"),
            "--prefix", "youtube.com/",
            "--from-year", "2006",
            "--to-year", "2023",
            "--out", str(refs),
        ],
        [
            "fetch",
            "--refs", str(refs),
            "--cache-dir", str(cache),
            "--fixtures", str(pages_dir),
            "--rate", "10000",
        ],
        ["extract", "--cache-dir", str(cache), "--out", str(captures)],
        [
            "link",
            "--captures", str(captures),
            "--census", str(census),
            "--conflicts", str(workdir / "conflicts.csv"),
            "--observations", str(workdir / "observations.csv"),
        ],
        [
            "ingest",
            "--census", str(census),
            "--observations", str(workdir / "observations.csv"),
            "--store", str(store),
        ],
    ]
    for step in steps:
        assert main(step) == 0, step[0]
    return store


def digest_store(store: Path) -> dict[str, str]:
    out = {}
    for path in sorted(store.rglob("*.csv")):
        out[str(path.relative_to(store))] = hashlib.sha256(
            path.read_bytes()
        ).hexdigest()
    return out


# --- random identifier graphs + brute-force component oracle -------------------


def random_capture_graph(
    rng: random.Random, n_users: int, n_ids: int, allow_conflicts: bool = False
) -> list[CaptureObservation]:
    """Random captures linking usernames to channel IDs.

    Without conflicts every username claims at most one ID; with conflicts
    a few usernames claim two IDs in disjoint time windows.
    """

    def cid(i: int) -> str:
        return "UC" + f"{i:022d}"

    # A capture is identified by (url, timestamp): never emit the same pair
    # twice with different payloads.
    by_pair: dict[tuple[str, str], CaptureObservation] = {}
    ts_pool = [f"{year}0{q}15000000" for year in range(2008, 2023) for q in (1, 4, 7)]
    for u in range(n_users):
        name = f"u{u:05d}"
        url = f"/user/{name}"
        n_caps = rng.randint(1, 3)
        linked = rng.random() < 0.7 and n_ids > 0
        the_id = cid(rng.randrange(n_ids)) if linked else None
        for ts in rng.sample(ts_pool, n_caps):
            with_id = linked and rng.random() < 0.8
            by_pair[(url, ts)] = CaptureObservation(
                url=url,
                timestamp=ts,
                subs=ParsedCount(rng.randint(0, 10**6), True),
                channel_id=the_id if with_id else None,
            )
        if allow_conflicts and linked and rng.random() < 0.1 and n_ids > 1:
            other = cid((int(the_id[2:]) + 1) % n_ids)
            by_pair[(url, "20230101000000")] = CaptureObservation(
                url=url,
                timestamp="20230101000000",
                subs=ParsedCount(1, True),
                channel_id=other,
            )
    for i in range(n_ids):
        if rng.random() < 0.6:
            url = f"/channel/{cid(i)}"
            ts = rng.choice(ts_pool)
            by_pair[(url, ts)] = CaptureObservation(
                url=url,
                timestamp=ts,
                subs=ParsedCount(rng.randint(0, 10**6), True),
            )
    return list(by_pair.values())


def bfs_partition(captures: list[CaptureObservation]) -> set[frozenset[str]]:
    """Brute-force connected components over the identifier graph, dropping
    every edge of a node that claims two or more distinct IDs."""
    from archive_census.identifiers import Family, parse_channel_url

    nodes: set[str] = set()
    claims: dict[str, set[str]] = defaultdict(set)
    seen_pairs: set[tuple[str, str]] = set()
    per_capture: list[tuple[list[str], str | None]] = []
    for cap in captures:
        if (cap.url, cap.timestamp) in seen_pairs:
            continue
        seen_pairs.add((cap.url, cap.timestamp))
        names = []
        ident = parse_channel_url(cap.url)
        cid = cap.channel_id
        if ident is not None:
            if ident.family is Family.CHANNEL_ID:
                cid = cid or ident.value
                names.append(ident.value)
            else:
                names.append(f"{ident.family.group}:{ident.value}")
        if cap.channel_id:
            names.append(cap.channel_id)
        if cap.username:
            names.append(f"user:{cap.username.lower()}")
        if cap.handle:
            names.append(f"handle:{cap.handle.lower()}")
        names = list(dict.fromkeys(names))
        nodes.update(names)
        per_capture.append((names, cid))

    for names, cid in per_capture:
        if cid:
            for name in names:
                if name != cid and not name.startswith("UC"):
                    claims[name].add(cid)

    conflicted = {n for n, ids in claims.items() if len(ids) >= 2}
    adjacency: dict[str, set[str]] = defaultdict(set)
    for name, ids in claims.items():
        if name in conflicted:
            continue
        (the_id,) = ids
        adjacency[name].add(the_id)
        adjacency[the_id].add(name)

    partition = set()
    visited: set[str] = set()
    for node in nodes:
        if node in visited or node in conflicted:
            continue
        component = set()
        stack = [node]
        while stack:
            current = stack.pop()
            if current in component:
                continue
            component.add(current)
            stack.extend(adjacency[current] - component)
        visited.update(component)
        partition.add(frozenset(component))
    return partition
