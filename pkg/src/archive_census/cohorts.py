"""Budgeted cohort construction over the census.

Channels are ranked by how many distinct periods (calendar quarters or
months) contain at least one capture; selection walks down the ranking
taking one representative capture per period until the capture budget is
met.  Multi-family specs run each family's budget independently.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .extract import ParsedCount
from .identifiers import Family, parse_channel_url
from .store import CensusStore, TimeSeries

logger = logging.getLogger(__name__)

__all__ = [
    "CohortSpec",
    "CohortRow",
    "CohortResult",
    "period_label",
    "build_cohort",
    "cohort_summary",
    "write_cohort_jsonl",
    "load_cohort_spec",
]

# Selector labels -> identifier families they cover.  "username" spans the
# /user/ and /profile?user= forms, which share the username namespace; the
# bare-slash vanity form is its own selector because attribution there is
# lower-confidence.
SELECTORS: dict[str, frozenset[Family]] = {
    "username": frozenset({Family.USERNAME, Family.LEGACY_USERNAME}),
    "vanity": frozenset({Family.VANITY_USERNAME}),
    "channel_id": frozenset({Family.CHANNEL_ID}),
    "custom": frozenset({Family.CUSTOM_NAME}),
    "handle": frozenset({Family.HANDLE}),
}


@dataclass(frozen=True)
class CohortSpec:
    families: dict[str, int]  # selector label -> capture budget
    period: str  # "quarterly" | "monthly"
    year_range: tuple[int, int]

    def __post_init__(self) -> None:
        if self.period not in ("quarterly", "monthly"):
            raise ValueError(f"unknown period {self.period!r}")
        for label in self.families:
            if label not in SELECTORS:
                raise ValueError(
                    f"unknown family selector {label!r}; valid: "
                    f"{', '.join(sorted(SELECTORS))}"
                )
        if self.year_range[0] > self.year_range[1]:
            raise ValueError("year_range start after end")

    @property
    def total_budget(self) -> int:
        return sum(self.families.values())


@dataclass(frozen=True)
class CohortRow:
    key: str
    period: str
    timestamp: str
    url: str
    subs: ParsedCount
    family: str  # selector label that picked this row


@dataclass
class CohortResult:
    rows: list[CohortRow]
    shortfall: dict[str, int] = field(default_factory=dict)  # selector -> missing


def period_label(timestamp: str, period: str) -> str:
    """Discretize a 14-digit timestamp: "2013Q1" or "2015-12"."""
    if len(timestamp) != 14 or not timestamp.isdigit():
        raise ValueError(f"bad timestamp {timestamp!r}")
    year, month = int(timestamp[:4]), int(timestamp[4:6])
    if not 1 <= month <= 12:
        raise ValueError(f"bad timestamp {timestamp!r}")
    if period == "quarterly":
        return f"{year}Q{(month - 1) // 3 + 1}"
    if period == "monthly":
        return f"{year}-{month:02d}"
    raise ValueError(f"unknown period {period!r}")


def _family_points(
    series: TimeSeries, families: frozenset[Family], years: tuple[int, int]
) -> list:
    picked = []
    for point in series.points:
        year = int(point.timestamp[:4])
        if not years[0] <= year <= years[1]:
            continue
        ident = parse_channel_url(point.source_url)
        if ident is not None and ident.family in families:
            picked.append(point)
    return picked


def build_cohort(spec: CohortSpec, store: CensusStore) -> CohortResult:
    """Rank, then walk the ranking collecting one capture per period until
    each selector's budget is reached (whole channels; the last one may
    overshoot).  A budget beyond the available captures returns everything
    and reports the shortfall."""
    all_series = list(store.iter_all_series())
    rows: list[CohortRow] = []
    shortfall: dict[str, int] = {}

    for label in sorted(spec.families):
        budget = spec.families[label]
        families = SELECTORS[label]
        ranked = []
        for series in all_series:
            points = _family_points(series, families, spec.year_range)
            if not points:
                continue
            by_period: dict[str, list] = {}
            for point in points:
                by_period.setdefault(
                    period_label(point.timestamp, spec.period), []
                ).append(point)
            ranked.append((series.key, by_period, len(points)))
        # Distinct periods desc, then total captures desc, then key.
        ranked.sort(key=lambda item: (-len(item[1]), -item[2], item[0]))

        collected = 0
        for key, by_period, _total in ranked:
            if collected >= budget:
                break
            for period in sorted(by_period):
                representative = min(
                    by_period[period], key=lambda p: (p.timestamp, p.source_url)
                )
                rows.append(
                    CohortRow(
                        key=key,
                        period=period,
                        timestamp=representative.timestamp,
                        url=representative.source_url,
                        subs=representative.subs,
                        family=label,
                    )
                )
            collected += len(by_period)
        if collected < budget:
            shortfall[label] = budget - collected
            logger.warning(
                "cohort %s: budget %d exceeds available captures by %d",
                label,
                budget,
                budget - collected,
            )

    return CohortResult(rows=rows, shortfall=shortfall)


def cohort_summary(result: CohortResult) -> dict:
    """Capture and channel counts, per selector and over the union.
    Average captures per channel is reported both ways because multi-family
    cohorts can count one channel under two selectors."""
    per_family: dict[str, dict] = {}
    union_keys: set[str] = set()
    for row in result.rows:
        stats = per_family.setdefault(row.family, {"captures": 0, "keys": set()})
        stats["captures"] += 1
        stats["keys"].add(row.key)
        union_keys.add(row.key)
    summary = {
        "captures": len(result.rows),
        "unique_channels": len(union_keys),
        "avg_captures_per_channel_union": (
            round(len(result.rows) / len(union_keys), 2) if union_keys else 0.0
        ),
        "per_family": {},
        "shortfall": dict(result.shortfall),
    }
    for label, stats in sorted(per_family.items()):
        summary["per_family"][label] = {
            "captures": stats["captures"],
            "channels": len(stats["keys"]),
            "avg_captures_per_channel": round(
                stats["captures"] / len(stats["keys"]), 2
            ),
        }
    return summary


def write_cohort_jsonl(rows: Iterable[CohortRow], fh: TextIO) -> int:
    n = 0
    for row in rows:
        fh.write(
            json.dumps(
                {
                    "key": row.key,
                    "period": row.period,
                    "timestamp": row.timestamp,
                    "subs": row.subs.value,
                    "url": row.url,
                },
                sort_keys=True,
            )
            + "\n"
        )
        n += 1
    return n


def load_cohort_spec(fh: TextIO) -> CohortSpec:
    """Read a spec config: {"families": {...}, "period": ..., "years": [a, b]}."""
    config = json.load(fh)
    return CohortSpec(
        families={str(k): int(v) for k, v in config["families"].items()},
        period=config["period"],
        year_range=(int(config["years"][0]), int(config["years"][1])),
    )
