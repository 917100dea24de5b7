"""Command-line pipeline: enumerate -> fetch -> extract -> link -> ingest,
plus the query, cohort, and analysis subcommands."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import cdx, cohorts, fetch, linker, stats, store as store_mod
from .extract import (
    EraDetectionError,
    MissingSubscribersError,
    ParseCountError,
    ParsedCount,
    extract,
    fields_to_json,
)

logger = logging.getLogger("archive_census")


def _build_query(args) -> cdx.EnumerationQuery:
    statuses = frozenset(args.status) if args.status else frozenset({200})
    return cdx.EnumerationQuery(
        prefix=args.prefix,
        year_range=(args.from_year, args.to_year),
        status_filter=statuses,
        page_size=args.page_size,
    )


def _build_source(args):
    if args.index_file:
        return cdx.FileIndexSource(args.index_file)
    endpoint = args.cdx_endpoint or os.environ.get("AC_CDX_ENDPOINT")
    if not endpoint:
        raise SystemExit("need --index-file or --cdx-endpoint (env AC_CDX_ENDPOINT)")
    return cdx.RemoteIndexSource(endpoint)


def _load_cursor(path: str | None) -> cdx.EnumerationCursor | None:
    if not path or not Path(path).exists():
        return None
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    last = tuple(data["last_key"]) if data.get("last_key") else None
    return cdx.EnumerationCursor(page=data["page"], last_key=last)


def cmd_enumerate(args) -> int:
    query = _build_query(args)
    source = _build_source(args)
    cursor = _load_cursor(args.cursor_file)
    stats_ = cdx.EnumerationStats()

    def persist(cur: cdx.EnumerationCursor) -> None:
        if args.cursor_file:
            Path(args.cursor_file).write_text(
                json.dumps({"page": cur.page, "last_key": cur.last_key}),
                encoding="utf-8",
            )

    mode = "a" if cursor else "w"
    with open(args.out, mode, encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if mode == "w":
            writer.writerow(cdx.REFS_CSV_HEADER)
        try:
            for ref in cdx.enumerate_captures(
                query, source, cursor=cursor, stats=stats_, on_page=persist
            ):
                status = "-" if ref.status is None else str(ref.status)
                writer.writerow(
                    [ref.original_url, ref.timestamp, status, ref.digest, ref.mime]
                )
        except cdx.EnumerationInterrupted as exc:
            persist(exc.cursor)
            print(
                f"interrupted at page {exc.cursor.page}; rerun to resume", file=sys.stderr
            )
            return 1
    print(
        f"emitted {stats_.emitted} rows "
        f"(read {stats_.rows_read}, malformed {stats_.malformed}, "
        f"filtered {stats_.filtered}, duplicates {stats_.duplicates})"
    )
    return 0


def cmd_count_formats(args) -> int:
    query = _build_query(args)
    source = _build_source(args)
    counts = cdx.count_by_format_year(cdx.enumerate_captures(query, source))
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["family", "year", "count"])
        for (family, year), count in sorted(counts.items()):
            writer.writerow([family, year, count])
    print(f"wrote {len(counts)} (family, year) rows to {args.out}")
    return 0


def cmd_fetch(args) -> int:
    cache_dir = args.cache_dir or os.environ.get("AC_CACHE_DIR")
    if not cache_dir:
        raise SystemExit("need --cache-dir (env AC_CACHE_DIR)")
    policy = fetch.FetchPolicy(
        cache_dir=Path(cache_dir),
        rate=args.rate,
        workers=args.workers,
        replay_base=args.replay_base,
        fixtures_dir=Path(args.fixtures) if args.fixtures else None,
    )
    with open(args.refs, encoding="utf-8") as fh:
        refs = list(cdx.read_refs_csv(fh))
    fetcher = fetch.Fetcher(policy)
    records = fetcher.fetch_many(refs)
    by_outcome: dict[str, int] = {}
    for record in records:
        by_outcome[record.outcome.value] = by_outcome.get(record.outcome.value, 0) + 1
    print(f"fetched {len(records)} refs: {by_outcome}")
    return 0


def cmd_extract(args) -> int:
    cache_dir = args.cache_dir or os.environ.get("AC_CACHE_DIR")
    if not cache_dir:
        raise SystemExit("need --cache-dir (env AC_CACHE_DIR)")
    cache = fetch.CacheStore(Path(cache_dir))
    ok, failed = 0, 0
    with open(args.out, "w", encoding="utf-8") as out:
        for record in sorted(
            cache.records(), key=lambda r: (r.ref.original_url, r.ref.timestamp)
        ):
            if record.outcome is fetch.FetchOutcome.ERROR:
                continue
            body = cache.read_body(record)
            try:
                fields = extract(body, record.ref)
            except (EraDetectionError, MissingSubscribersError, ParseCountError) as exc:
                failed += 1
                logger.warning("extract failed for %s: %s", record.ref.original_url, exc)
                continue
            out.write(
                json.dumps(
                    fields_to_json(fields, record.ref, with_text=args.with_text),
                    sort_keys=True,
                )
                + "\n"
            )
            ok += 1
    print(f"extracted {ok} captures ({failed} failures) -> {args.out}")
    return 0


def cmd_link(args) -> int:
    observations = []
    with open(args.captures, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                observations.append(linker.observation_from_json(json.loads(line)))
    result = linker.link(observations)
    with open(args.census, "w", encoding="utf-8", newline="") as fh:
        linker.write_census_csv(result.entities, fh)
    with open(args.conflicts, "w", encoding="utf-8", newline="") as fh:
        linker.write_conflicts_csv(result.conflicts, fh)
    with open(args.observations, "w", encoding="utf-8", newline="") as fh:
        linker.write_observations_csv(result.entities, fh)
    lower = linker.lower_bound_channels(result.entities)
    print(
        f"linked {len(result.entities)} entities "
        f"(lower bound with channel IDs: {lower}), "
        f"{len(result.conflicts)} conflicts, {result.dropped} dropped"
    )
    return 0


def cmd_ingest(args) -> int:
    store = store_mod.CensusStore.build(Path(args.store), Path(args.census))
    rows = []
    with open(args.observations, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != linker.OBSERVATIONS_CSV_HEADER:
            raise SystemExit(f"unexpected observations header: {header}")
        for key, ts, subs, exact, url in reader:
            rows.append((key, ts, ParsedCount(int(subs), bool(int(exact))), url))
    outcome = store.ingest(rows)
    print(
        f"ingested {outcome['accepted']} observations "
        f"({outcome['quarantined']} quarantined) into {args.store}"
    )
    return 0


def cmd_query(args) -> int:
    store = store_mod.CensusStore(Path(args.store))
    try:
        result = store.fetch_closest(args.channel, args.closest)
    except store_mod.NotFoundError:
        print(f"channel not found: {args.channel}", file=sys.stderr)
        return 1
    except store_mod.NoDataError:
        print(f"no observations for: {args.channel}", file=sys.stderr)
        return 1
    print(json.dumps(asdict(result), sort_keys=True))
    return 0


def cmd_sample(args) -> int:
    store = store_mod.CensusStore(Path(args.store))
    rows = store.sample(args.n, by=args.by, seed=args.seed)
    for row in rows:
        print(json.dumps(store.row_to_json(row, prefer_family=args.by), sort_keys=True))
    return 0


def cmd_rank_frequency(args) -> int:
    store = store_mod.CensusStore(Path(args.store))
    keys = None
    if args.sample:
        keys = [row.key for row in store.sample(args.sample, seed=args.seed)]
    pairs = store.rank_frequency(keys)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "capture_count"])
        writer.writerows(pairs)
    print(f"wrote {len(pairs)} ranks to {args.out}")
    return 0


def cmd_cohort(args) -> int:
    store = store_mod.CensusStore(Path(args.store))
    with open(args.spec, encoding="utf-8") as fh:
        spec = cohorts.load_cohort_spec(fh)
    result = cohorts.build_cohort(spec, store)
    with open(args.out, "w", encoding="utf-8") as fh:
        cohorts.write_cohort_jsonl(result.rows, fh)
    print(json.dumps(cohorts.cohort_summary(result), sort_keys=True))
    return 0


def cmd_stratified_sample(args) -> int:
    store = store_mod.CensusStore(Path(args.store))
    rows = [(row.key, row.capture_count) for row in store.census]
    plans = stats.stratified_sample(rows, args.per_stratum, args.seed)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["stratum", "low", "high", "population", "key"])
        for plan in plans:
            for key in plan.keys:
                writer.writerow(
                    [plan.index, plan.low, plan.high, plan.population_size, key]
                )
    print(f"sampled {sum(len(p.keys) for p in plans)} keys into {args.out}")
    return 0


def _read_plan(path: str) -> list[stats.StratumPlan]:
    groups: dict[int, dict] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for stratum, low, high, population, key in reader:
            g = groups.setdefault(
                int(stratum),
                {"low": int(low), "high": int(high), "pop": int(population), "keys": []},
            )
            g["keys"].append(key)
    return [
        stats.StratumPlan(i, g["low"], g["high"], g["pop"], tuple(g["keys"]))
        for i, g in sorted(groups.items())
    ]


def cmd_estimate_coverage(args) -> int:
    plans = _read_plan(args.plan)
    video_counts: dict[str, float] = {}
    with open(args.videos, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # key,video_count
        for key, count in reader:
            video_counts[key] = float(count)
    summaries = stats.summarize_strata(plans, video_counts)
    known = args.known_ids
    if known is None:
        store = store_mod.CensusStore(Path(args.store))
        known = sum(1 for row in store.census if not row.key.startswith(("user:", "custom:", "handle:")))
    report = stats.estimate_coverage(summaries, known, method=args.method)
    payload = asdict(report)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_validate(args) -> int:
    store = store_mod.CensusStore(Path(args.store))
    reference = []
    with open(args.reference, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # rank,key,subs
        for _rank, key, subs in reader:
            reference.append((key, float(subs)))

    max_distance = args.max_age_days * 86400
    ours = []
    for series in store.iter_all_series():
        try:
            result = store.fetch_closest(series.key, args.date)
        except (store_mod.NotFoundError, store_mod.NoDataError):
            continue
        if result.distance_seconds <= max_distance:
            ours.append((series.key, float(result.subs)))

    count, rho, r = stats.topk_overlap(ours, reference, args.k)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "k", "overlap", "spearman", "pearson"])
        writer.writerow(
            [
                args.date,
                args.k,
                count,
                "" if rho is None else f"{rho:.6f}",
                "" if r is None else f"{r:.6f}",
            ]
        )
    print(f"overlap {count}/{args.k}, spearman={rho}, pearson={r}")
    return 0


def cmd_fit_growth(args) -> int:
    if args.channel:
        store = store_mod.CensusStore(Path(args.store))
        series = store.series(store.resolve(args.channel))
        t = [store_mod.timestamp_to_epoch(p.timestamp) / 86400.0 for p in series.points]
        y = [float(p.subs.value) for p in series.points]
    else:
        t, y = [], []
        with open(args.series, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)  # timestamp,subs
            for ts, subs in reader:
                t.append(store_mod.timestamp_to_epoch(ts) / 86400.0)
                y.append(float(subs))
    try:
        fit = stats.fit_logistic(t, y)
    except stats.NoFitError as exc:
        print(f"no fit: {exc}", file=sys.stderr)
        return 1
    payload = {
        "K": fit.K,
        "r": fit.r,
        "t0": fit.t0,
        "rss": fit.rss,
        "converged": fit.converged,
        "iterations": fit.iterations,
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if args.residuals:
        import numpy as np

        fitted = stats.logistic_model((fit.K, fit.r, fit.t0), np.asarray(t))
        with open(args.residuals, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t_day", "observed", "fitted", "residual"])
            for ti, yi, fi in zip(t, y, fitted):
                writer.writerow([f"{ti:.6f}", yi, f"{fi:.6f}", f"{fi - yi:.6f}"])
    print(json.dumps(payload, sort_keys=True))
    return 0


def _add_index_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--index-file", help="local CDX file (.gz ok)")
    p.add_argument("--cdx-endpoint", help="remote CDX endpoint (env AC_CDX_ENDPOINT)")
    p.add_argument("--prefix", required=True, help="host-qualified URL prefix")
    p.add_argument("--from-year", type=int, default=2006)
    p.add_argument("--to-year", type=int, default=2023)
    p.add_argument("--status", type=int, action="append", help="repeatable; default 200")
    p.add_argument("--page-size", type=int, default=3000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="archive-census",
        description="Rebuild a channel census from web-archive captures",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="list capture records for a URL prefix")
    _add_index_args(p)
    p.add_argument("--out", required=True, help="refs CSV output")
    p.add_argument("--cursor-file", help="persist/resume cursor here")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("count-formats", help="captures per URL format and year")
    _add_index_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_count_formats)

    p = sub.add_parser("fetch", help="download archived bodies into the cache")
    p.add_argument("--refs", required=True, help="refs CSV from enumerate")
    p.add_argument("--cache-dir", help="cache directory (env AC_CACHE_DIR)")
    p.add_argument("--rate", type=float, default=2.0, help="requests per second")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--replay-base", default="https://web.archive.org")
    p.add_argument("--fixtures", help="offline: serve bodies from this directory")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("extract", help="extract metadata from cached bodies")
    p.add_argument("--cache-dir", help="cache directory (env AC_CACHE_DIR)")
    p.add_argument("--out", required=True, help="captures JSONL output")
    p.add_argument(
        "--with-text",
        action="store_true",
        help="include description/keywords (off by default)",
    )
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("link", help="resolve identifiers into channel entities")
    p.add_argument("--captures", required=True, help="captures JSONL from extract")
    p.add_argument("--census", required=True, help="census CSV output")
    p.add_argument("--conflicts", required=True, help="conflicts CSV output")
    p.add_argument("--observations", required=True, help="keyed observations CSV")
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("ingest", help="load observations into a store")
    p.add_argument("--census", required=True)
    p.add_argument("--observations", required=True)
    p.add_argument("--store", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", help="closest subscriber count for a channel")
    p.add_argument("--store", required=True)
    p.add_argument("--channel", required=True, help="channel URL or census key")
    p.add_argument("--closest", required=True, help="timestamp prefix, e.g. 201301")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("sample", help="sample census rows")
    p.add_argument("--store", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--by", help="identifier family filter")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("rank-frequency", help="capture-count rank table")
    p.add_argument("--store", required=True)
    p.add_argument("--sample", type=int, help="sample this many channels first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rank_frequency)

    p = sub.add_parser("cohort", help="build a budgeted cohort")
    p.add_argument("--store", required=True)
    p.add_argument("--spec", required=True, help="cohort spec JSON")
    p.add_argument("--out", required=True, help="cohort JSONL output")
    p.set_defaults(func=cmd_cohort)

    p = sub.add_parser("stratified-sample", help="plan a stratified channel sample")
    p.add_argument("--store", required=True)
    p.add_argument("--per-stratum", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="plan CSV output")
    p.set_defaults(func=cmd_stratified_sample)

    p = sub.add_parser("estimate-coverage", help="stratified video-coverage estimate")
    p.add_argument("--plan", required=True, help="plan CSV from stratified-sample")
    p.add_argument("--videos", required=True, help="CSV key,video_count")
    p.add_argument("--known-ids", type=int, help="default: ID-keyed census rows")
    p.add_argument("--store", help="needed when --known-ids is omitted")
    p.add_argument("--method", choices=["standard", "paper_literal"], default="standard")
    p.add_argument("--out", required=True, help="report JSON output")
    p.set_defaults(func=cmd_estimate_coverage)

    p = sub.add_parser("validate", help="compare our top-k list to a reference")
    p.add_argument("--store", required=True)
    p.add_argument("--reference", required=True, help="CSV rank,key,subs")
    p.add_argument("--date", required=True, help="timestamp prefix, e.g. 201012")
    p.add_argument("--k", type=int, default=500)
    p.add_argument("--max-age-days", type=int, default=92)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fit-growth", help="fit an S-curve to a subscriber series")
    p.add_argument("--store")
    p.add_argument("--channel", help="channel URL or key (needs --store)")
    p.add_argument("--series", help="CSV timestamp,subs")
    p.add_argument("--out", required=True, help="fit JSON output")
    p.add_argument("--residuals", help="residuals CSV output")
    p.set_defaults(func=cmd_fit_growth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "fit-growth" and not (args.channel or args.series):
        raise SystemExit("fit-growth needs --channel or --series")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
