"""Era-aware extraction of channel metadata from archived HTML bodies.

The site's layout changed repeatedly; each layout generation ("era")
exposes a different subset of fields.  Detection is marker-based with the
capture timestamp only as a tie-breaker, and per-field extraction runs an
ordered list of regex/selector strategies until one yields a value.
Fields that a capture's quarter cannot carry are never extracted.
"""

from __future__ import annotations

import enum
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import date, datetime
from html.parser import HTMLParser

from .cdx import SnapshotRef
from .identifiers import ChannelIdentifier, Family

logger = logging.getLogger(__name__)

__all__ = [
    "Era",
    "PageEra",
    "ParsedCount",
    "ExtractedFields",
    "Availability",
    "EraDetectionError",
    "MissingSubscribersError",
    "ParseCountError",
    "detect_era",
    "extract",
    "parse_count",
    "field_availability",
    "fields_to_json",
]


class Era(enum.Enum):
    EARLY = "early_2006_2009"
    CLASSIC = "classic_2010_2012"
    ONE_CHANNEL = "one_channel_2013_2016"
    POLYMER = "polymer_2017_2023"


_ERA_YEARS = {
    Era.EARLY: (2006, 2009),
    Era.CLASSIC: (2010, 2012),
    Era.ONE_CHANNEL: (2013, 2016),
    Era.POLYMER: (2017, 2023),
}

# Structural markers per era.  Stale pages get re-captured, so detection
# trusts these over the timestamp.
_ERA_MARKERS: dict[Era, tuple[str, ...]] = {
    Era.EARLY: ('id="baseDiv"', 'class="channelBox"'),
    Era.CLASSIC: ('id="channel-header"', 'id="playnav-channel"'),
    Era.ONE_CHANNEL: (
        'id="c4-header-bg-container"',
        "yt-subscription-button-subscriber-count",
    ),
    Era.POLYMER: ("ytInitialData", "<ytd-app"),
}


@dataclass(frozen=True)
class PageEra:
    label: Era
    detector_evidence: tuple[str, ...]


class EraDetectionError(ValueError):
    """No marker matched; `fallback` carries the timestamp-implied era for
    callers running in lenient mode."""

    def __init__(self, message: str, fallback: PageEra):
        super().__init__(message)
        self.fallback = fallback


class MissingSubscribersError(ValueError):
    """Channel page without a subscriber field (indexed captures are
    expected to carry one)."""


class ParseCountError(ValueError):
    def __init__(self, raw: str):
        super().__init__(f"no digits in count string {raw!r}")
        self.raw = raw


def _timestamp_era(timestamp: str) -> Era:
    year = int(timestamp[:4]) if timestamp[:4].isdigit() else 0
    for era, (start, end) in _ERA_YEARS.items():
        if start <= year <= end:
            return era
    return Era.EARLY if year < 2006 else Era.POLYMER


def detect_era(html: bytes, timestamp: str) -> PageEra:
    """Pick the layout era from structural markers, falling back to the
    capture timestamp only to break ties between conflicting markers."""
    text = html.decode("utf-8", errors="replace")
    matched: dict[Era, list[str]] = {}
    for era, markers in _ERA_MARKERS.items():
        hits = [m for m in markers if m in text]
        if hits:
            matched[era] = hits

    if not matched:
        fallback = PageEra(_timestamp_era(timestamp), ())
        raise EraDetectionError(
            "no era markers matched" if html else "empty body", fallback
        )

    best = max(len(hits) for hits in matched.values())
    tied = [era for era in Era if len(matched.get(era, ())) == best]
    if len(tied) == 1:
        winner = tied[0]
        return PageEra(winner, tuple(matched[winner]))

    # Conflicting markers: the timestamp decides, evidence keeps all sides.
    year = int(timestamp[:4]) if timestamp[:4].isdigit() else 0

    def distance(era: Era) -> int:
        start, end = _ERA_YEARS[era]
        if start <= year <= end:
            return 0
        return min(abs(year - start), abs(year - end))

    winner = min(tied, key=lambda era: (distance(era), list(Era).index(era)))
    evidence = tuple(m for era in tied for m in matched[era])
    return PageEra(winner, evidence)


# --- display-count decoding -------------------------------------------------

_SUFFIX = {"K": 10**3, "M": 10**6, "B": 10**9}
_NO_SUBS = re.compile(r"\bno\s+subscribers?\b", re.IGNORECASE)
_THIN_SPACES = "   "
# Digits plus grouping characters; a space joins only when digits follow.
_NUMBER_TOKEN = re.compile(r"\d(?:[\d.,]|[\s   ](?=\d))*")
_SUFFIX_AFTER = re.compile(r"\s*([KMB])(?![A-Za-z0-9])", re.IGNORECASE)


@dataclass(frozen=True)
class ParsedCount:
    """A decoded display count.  exact=False when the source string used an
    abbreviation suffix, so value is round(mantissa * multiplier)."""

    value: int
    exact: bool
    raw: str = field(default="", compare=False)


def _mantissa(token: str) -> float:
    # With a suffix present, the rightmost '.' or ',' is the decimal mark
    # when <= 2 digits follow it; everything else is grouping.
    token = re.sub(f"[ {_THIN_SPACES}]", "", token)
    last_dot, last_comma = token.rfind("."), token.rfind(",")
    pos = max(last_dot, last_comma)
    if pos != -1 and 1 <= len(token) - pos - 1 <= 2:
        head = re.sub(r"[.,]", "", token[:pos])
        return float(head + "." + token[pos + 1:])
    return float(re.sub(r"[.,]", "", token))


def parse_count(raw: str) -> ParsedCount:
    """Decode a human-readable count: grouping separators and unit words are
    stripped; K/M/B suffixes multiply; "No subscribers" counts as zero."""
    if _NO_SUBS.search(raw):
        return ParsedCount(0, True, raw)
    m = _NUMBER_TOKEN.search(raw)
    if not m:
        raise ParseCountError(raw)
    token = m.group(0)
    suffix = _SUFFIX_AFTER.match(raw, m.end())
    if suffix:
        multiplier = _SUFFIX[suffix.group(1).upper()]
        value = round(_mantissa(token) * multiplier)
        return ParsedCount(value, False, raw)
    digits = re.sub(f"[.,\\s{_THIN_SPACES}]", "", token)
    return ParsedCount(int(digits), True, raw)


# --- per-quarter field availability ------------------------------------------


class Availability(enum.Enum):
    FULL = "full"
    PARTIAL = "partial"
    ABSENT = "absent"


_Q = tuple[int, int]  # (year, quarter)

# (first_quarter, last_quarter, availability); quarters not covered by any
# range are ABSENT.  Coverage starts 2006Q3 and the matrix ends 2023Q4.
_AVAILABILITY: dict[str, tuple[tuple[_Q, _Q, Availability], ...]] = {
    "subscribers": (((2006, 3), (2023, 4), Availability.FULL),),
    "username": (((2006, 3), (2020, 4), Availability.FULL),),
    "channel_id": (
        ((2007, 3), (2011, 4), Availability.PARTIAL),
        ((2012, 1), (2023, 4), Availability.FULL),
    ),
    "handle": (
        ((2022, 4), (2022, 4), Availability.PARTIAL),
        ((2023, 1), (2023, 4), Availability.FULL),
    ),
    "description": (((2006, 3), (2023, 4), Availability.FULL),),
    "keywords": (
        ((2010, 3), (2010, 3), Availability.PARTIAL),
        ((2010, 4), (2023, 4), Availability.FULL),
    ),
    "total_views": (
        ((2006, 3), (2013, 1), Availability.FULL),
        ((2013, 2), (2013, 2), Availability.PARTIAL),
    ),
    "join_date": (
        ((2006, 3), (2013, 1), Availability.FULL),
        ((2013, 2), (2013, 2), Availability.PARTIAL),
    ),
}


def field_availability(name: str, year: int, quarter: int) -> Availability:
    ranges = _AVAILABILITY[name]
    for start, end, avail in ranges:
        if start <= (year, quarter) <= end:
            return avail
    return Availability.ABSENT


def _quarter_of(timestamp: str) -> tuple[int, int]:
    return int(timestamp[:4]), (int(timestamp[4:6]) - 1) // 3 + 1


# --- extraction ---------------------------------------------------------------


@dataclass(frozen=True)
class ExtractedFields:
    era: PageEra
    channel_id: ChannelIdentifier | None = None
    username: str | None = None
    handle: str | None = None
    subscribers: ParsedCount | None = None
    description: str | None = None
    keywords: tuple[str, ...] | None = None
    total_views: ParsedCount | None = None
    join_date: date | None = None


class _MetaScanner(HTMLParser):
    """Collect meta/link/title content from tag soup; never raises."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.meta: dict[str, str] = {}
        self.links: dict[str, str] = {}
        self.title = ""
        self._in_title = False

    def handle_starttag(self, tag, attrs):
        d = dict(attrs)
        if tag == "meta":
            key = d.get("name") or d.get("property") or d.get("itemprop")
            if key and "content" in d:
                self.meta.setdefault(key.lower(), d["content"] or "")
        elif tag == "link":
            rel, href = d.get("rel"), d.get("href")
            if rel and href:
                self.links.setdefault(rel.lower(), href)
        elif tag == "title":
            self._in_title = True

    def handle_endtag(self, tag):
        if tag == "title":
            self._in_title = False

    def handle_data(self, data):
        if self._in_title:
            self.title += data


def _scan(text: str) -> _MetaScanner:
    scanner = _MetaScanner()
    try:
        scanner.feed(text)
        scanner.close()
    except Exception:  # truncated soup must never kill extraction
        logger.debug("meta scan aborted mid-document", exc_info=True)
    return scanner


_CHANNEL_ID_VALUE = re.compile(r"UC[A-Za-z0-9_-]{22}")

_SUBS_STRATEGIES: dict[Era, tuple[re.Pattern, ...]] = {
    Era.EARLY: (
        re.compile(r"Subscribers\s*:\s*(?:<[^>]*>\s*)*([0-9][\d,.]*)"),
    ),
    Era.CLASSIC: (
        re.compile(r'class="subscriber-count"[^>]*title="([^"]+)"'),
        re.compile(r'class="subscriber-count"[^>]*>\s*([^<]+?)\s*<'),
    ),
    Era.ONE_CHANNEL: (
        re.compile(
            r'yt-subscription-button-subscriber-count[^"]*"[^>]*title="([^"]+)"'
        ),
        re.compile(r"yt-subscription-button-subscriber-count[^>]*>\s*([^<]+?)\s*<"),
    ),
    Era.POLYMER: (
        re.compile(r'"subscriberCountText"\s*:\s*\{\s*"simpleText"\s*:\s*"([^"]+)"'),
        re.compile(r'"subscriberCountText"\s*:\s*\{\s*"runs"\s*:\s*\[\s*\{\s*"text"\s*:\s*"([^"]+)"'),
    ),
}
# Last-resort pattern shared by all eras: archived pages are often truncated.
_SUBS_FALLBACK = re.compile(r"([0-9][\d,.\s]*[KMB]?)\s+subscribers", re.IGNORECASE)

_VIEWS_PATTERNS = (
    re.compile(r"(?:Channel\s+Views|Views)\s*:\s*(?:<[^>]*>\s*)*([0-9][\d,.]*)"),
    re.compile(r'class="about-stat"[^>]*>\s*<b>([\d,.]+)</b>\s*views', re.IGNORECASE),
)

_JOINED_PATTERNS = (
    re.compile(
        r"(?:Joined|Member\s+Since)\s*:?\s*(?:<[^>]*>\s*)*([A-Za-z]+\s+\d{1,2},\s+\d{4})"
    ),
    re.compile(r'class="about-stat"[^>]*>\s*Joined\s+([A-Za-z]+\s+\d{1,2},\s+\d{4})'),
)

_USER_URL = re.compile(r"/user/([A-Za-z0-9]{1,20})(?=[/?\"#]|\Z)")
_OWNER_PROFILE = re.compile(r'"ownerProfileUrl"\s*:\s*"[^"]*?/user/([A-Za-z0-9]{1,20})"')
_TITLE_USER = re.compile(r"YouTube\s*-\s*([A-Za-z0-9]{1,20})'s\b")
_HANDLE_URL = re.compile(r"/@([A-Za-z0-9_-]{3,30})(?=[/?\"#]|\Z)")
_CANONICAL_BASE = re.compile(r'"canonicalBaseUrl"\s*:\s*"/@([A-Za-z0-9_-]{3,30})"')
_DATA_EXTERNAL_ID = re.compile(r'data-channel-external-id="(UC[A-Za-z0-9_-]{22})"')
_BOOTSTRAP_CHANNEL_ID = re.compile(r'"channelId"\s*:\s*"(UC[A-Za-z0-9_-]{22})"')

_DATE_FORMATS = ("%B %d, %Y", "%b %d, %Y", "%Y-%m-%d")


def _parse_join_date(raw: str) -> date | None:
    raw = re.sub(r"\s+", " ", raw.strip())
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(raw, fmt).date()
        except ValueError:
            continue
    return None


def _find_channel_id(text: str, scanner: _MetaScanner) -> str | None:
    meta_id = scanner.meta.get("channelid", "")
    if _CHANNEL_ID_VALUE.fullmatch(meta_id):
        return meta_id
    for candidate in (scanner.links.get("canonical", ""), scanner.meta.get("og:url", "")):
        m = _CHANNEL_ID_VALUE.search(candidate)
        if m and "/channel/" in candidate:
            return m.group(0)
    for pattern in (_DATA_EXTERNAL_ID, _BOOTSTRAP_CHANNEL_ID):
        m = pattern.search(text)
        if m:
            return m.group(1)
    return None


def _find_username(text: str, scanner: _MetaScanner) -> str | None:
    for candidate in (
        scanner.links.get("canonical", ""),
        scanner.meta.get("og:url", ""),
    ):
        m = _USER_URL.search(candidate)
        if m:
            return m.group(1).lower()
    m = _OWNER_PROFILE.search(text)
    if m:
        return m.group(1).lower()
    m = _TITLE_USER.search(scanner.title)
    if m:
        return m.group(1).lower()
    return None


def _find_handle(text: str, scanner: _MetaScanner) -> str | None:
    m = _CANONICAL_BASE.search(text)
    if m:
        return m.group(1).lower()
    for candidate in (scanner.meta.get("og:url", ""), scanner.links.get("canonical", "")):
        m = _HANDLE_URL.search(candidate)
        if m:
            return m.group(1).lower()
    return None


def _find_subscribers(text: str, era: Era) -> str | None:
    for pattern in _SUBS_STRATEGIES[era]:
        m = pattern.search(text)
        if m:
            return m.group(1)
    m = _SUBS_FALLBACK.search(text)
    if m:
        return m.group(0)
    m = _NO_SUBS.search(text)
    if m:
        return m.group(0)
    return None


def _split_keywords(raw: str) -> tuple[str, ...]:
    parts = [p.strip().strip('"').strip() for p in raw.split(",")]
    return tuple(p for p in parts if p)


def extract(html: bytes, ref: SnapshotRef) -> ExtractedFields:
    """Extract the fields available for this capture's quarter.

    Raises MissingSubscribersError when the page yields no subscriber
    string at all, and lets ParseCountError escape when one is found but
    does not decode.
    """
    era = detect_era(html, ref.timestamp)
    year, quarter = _quarter_of(ref.timestamp)
    text = html.decode("utf-8", errors="replace")
    scanner = _scan(text)

    def wanted(name: str) -> bool:
        return field_availability(name, year, quarter) is not Availability.ABSENT

    subscribers = None
    if wanted("subscribers"):
        raw_subs = _find_subscribers(text, era.label)
        if raw_subs is None:
            raise MissingSubscribersError(
                f"no subscriber field on {ref.original_url} @ {ref.timestamp}"
            )
        subscribers = parse_count(raw_subs)

    channel_id = None
    if wanted("channel_id"):
        value = _find_channel_id(text, scanner)
        if value:
            channel_id = ChannelIdentifier(Family.CHANNEL_ID, value, raw=value)

    username = _find_username(text, scanner) if wanted("username") else None
    handle = _find_handle(text, scanner) if wanted("handle") else None

    description = None
    if wanted("description"):
        description = scanner.meta.get("description") or scanner.meta.get(
            "og:description"
        )

    keywords = None
    if wanted("keywords"):
        raw_kw = scanner.meta.get("keywords")
        if raw_kw:
            keywords = _split_keywords(raw_kw)

    total_views = None
    if wanted("total_views"):
        for pattern in _VIEWS_PATTERNS:
            m = pattern.search(text)
            if m:
                total_views = parse_count(m.group(1))
                break

    join_date = None
    if wanted("join_date"):
        for pattern in _JOINED_PATTERNS:
            m = pattern.search(text)
            if m:
                join_date = _parse_join_date(m.group(1))
                break

    return ExtractedFields(
        era=era,
        channel_id=channel_id,
        username=username,
        handle=handle,
        subscribers=subscribers,
        description=description,
        keywords=keywords,
        total_views=total_views,
        join_date=join_date,
    )


def fields_to_json(
    fields: ExtractedFields, ref: SnapshotRef, with_text: bool = False
) -> dict:
    """One JSONL record per capture.  Free-text fields are withheld unless
    explicitly requested, keeping the default output free of channel prose."""
    record: dict = {"url": ref.original_url, "timestamp": ref.timestamp}
    if fields.channel_id:
        record["channel_id"] = fields.channel_id.value
    if fields.username:
        record["username"] = fields.username
    if fields.handle:
        record["handle"] = fields.handle
    if fields.subscribers is not None:
        record["subs"] = fields.subscribers.value
        record["subs_exact"] = fields.subscribers.exact
    record["era"] = fields.era.label.value
    if fields.total_views is not None:
        record["views"] = fields.total_views.value
    if fields.join_date is not None:
        record["join_date"] = fields.join_date.isoformat()
    if with_text:
        if fields.description is not None:
            record["description"] = fields.description
        if fields.keywords is not None:
            record["keywords"] = list(fields.keywords)
    return record


def json_to_capture(line: str) -> tuple[dict, "SnapshotRef"]:
    """Parse one extractor JSONL line back into (record, minimal ref)."""
    record = json.loads(line)
    ref = SnapshotRef(record["url"], record["timestamp"], 200, "", "")
    return record, ref
