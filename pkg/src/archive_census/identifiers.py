"""Channel URL grammar: parse, validate, and normalize identifier strings.

Six URL format families have pointed at channel pages over the platform's
lifetime.  Each family is described by a prefix, a value pattern, and the
years it was active; the full grammar is embedded below in FORMAT_TABLE so
callers (and tests) can inspect it as data.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from urllib.parse import parse_qs, unquote, urlsplit

__all__ = [
    "Family",
    "ChannelIdentifier",
    "UrlFormatSpec",
    "FORMAT_TABLE",
    "PRIORITY",
    "RESERVED_PATHS",
    "IdentifierError",
    "parse_channel_url",
    "is_reserved_path",
    "normalize",
    "canonical_url",
    "spec_for",
]


class Family(enum.Enum):
    USERNAME = "username"
    LEGACY_USERNAME = "legacy"
    VANITY_USERNAME = "vanity"
    CHANNEL_ID = "channel_id"
    CUSTOM_NAME = "custom"
    HANDLE = "handle"

    @property
    def group(self) -> str:
        """Namespace group: the three username variants share one namespace."""
        return _FAMILY_GROUPS[self]


_USERNAME_FAMILIES = frozenset(
    {Family.USERNAME, Family.LEGACY_USERNAME, Family.VANITY_USERNAME}
)
_FAMILY_GROUPS = {
    family: ("user" if family in _USERNAME_FAMILIES else family.value)
    for family in Family
}

# Normalized-value patterns per family (full match, post-lowercasing for the
# case-insensitive families).
_VALUE_PATTERNS = {
    Family.USERNAME: re.compile(r"[a-z0-9]{1,20}\Z"),
    Family.LEGACY_USERNAME: re.compile(r"[a-z0-9]{1,20}\Z"),
    Family.VANITY_USERNAME: re.compile(r"[a-z0-9]{1,20}\Z"),
    Family.CHANNEL_ID: re.compile(r"UC[A-Za-z0-9_-]{22}\Z"),
    Family.CUSTOM_NAME: re.compile(r"[a-z0-9]+\Z"),
    Family.HANDLE: re.compile(r"[a-z0-9_-]{3,30}\Z"),
}


class IdentifierError(ValueError):
    """Raised when an identifier value violates its family's pattern."""


@dataclass(frozen=True)
class ChannelIdentifier:
    """One channel identifier.  Equality ignores `raw` (the string as seen
    in the archive index); identity is (family, value)."""

    family: Family
    value: str
    raw: str = field(default="", compare=False)

    def validate(self) -> None:
        pattern = _VALUE_PATTERNS[self.family]
        if not pattern.match(self.value):
            raise IdentifierError(
                f"{self.family.value} value {self.value!r} does not match "
                f"pattern {pattern.pattern!r}"
            )


@dataclass(frozen=True)
class UrlFormatSpec:
    """One row of the URL-format grammar.

    `path_prefix` and `value_pattern` are kept verbatim as human-readable
    strings; `active_range` is (first_year, last_year) with None meaning
    still in use.
    """

    family: Family
    path_prefix: str
    value_pattern: str
    active_range: tuple[int, int | None]

    def active_in(self, year: int) -> bool:
        start, end = self.active_range
        return start <= year <= (end if end is not None else 9999)


# The grammar, one row per family.  Patterns for the username/custom/handle
# families are case-insensitive; channel IDs are case-significant.
FORMAT_TABLE: tuple[UrlFormatSpec, ...] = (
    UrlFormatSpec(Family.USERNAME, "/user/", "[A-Z0-9]{1,20}", (2006, 2014)),
    UrlFormatSpec(Family.LEGACY_USERNAME, "/profile?user=", "[A-Z0-9]{1,20}", (2005, 2006)),
    UrlFormatSpec(Family.VANITY_USERNAME, "/", "[A-Z0-9]{1,20}", (2007, 2013)),
    UrlFormatSpec(Family.CHANNEL_ID, "/channel/UC", "[A-Za-z0-9_-]{22}", (2012, None)),
    UrlFormatSpec(Family.CUSTOM_NAME, "/c/", "[A-Z0-9]+", (2015, 2021)),
    UrlFormatSpec(Family.HANDLE, "/@", "[A-Z0-9-_]{3,30}", (2022, None)),
)

# Matching priority.  The bare-"/" vanity form is a catch-all and must come
# last; channel IDs are unambiguous and come first.
PRIORITY: tuple[Family, ...] = (
    Family.CHANNEL_ID,
    Family.USERNAME,
    Family.LEGACY_USERNAME,
    Family.CUSTOM_NAME,
    Family.HANDLE,
    Family.VANITY_USERNAME,
)

_BY_FAMILY = {spec.family: spec for spec in FORMAT_TABLE}


def spec_for(family: Family) -> UrlFormatSpec:
    return _BY_FAMILY[family]


# Site paths that collide with the bare-"/" vanity prefix.  First path
# segment, lowercased.  Maintained by hand; extend as collisions surface.
RESERVED_PATHS = frozenset(
    {
        "about",
        "account",
        "ads",
        "analytics",
        "api",
        "audiolibrary",
        "browse",
        "c",
        "channel",
        "charts",
        "comment_servlet",
        "creators",
        "crossdomain.xml",
        "css",
        "dashboard",
        "das_captcha",
        "embed",
        "error",
        "favicon.ico",
        "feed",
        "feeds",
        "gaming",
        "get_video_info",
        "howyoutubeworks",
        "html5",
        "iframe_api",
        "img",
        "inbox",
        "index",
        "jobs",
        "js",
        "kids",
        "live",
        "login",
        "logout",
        "movies",
        "music",
        "my_videos",
        "new",
        "oembed",
        "playlist",
        "playlists",
        "player_api",
        "premium",
        "press",
        "profile",
        "red",
        "results",
        "robots.txt",
        "rss",
        "s",
        "shorts",
        "show",
        "shows",
        "signup",
        "sitemaps",
        "subscribe_widget",
        "subscription_center",
        "t",
        "testtube",
        "trending",
        "upload",
        "user",
        "verify_age",
        "view_play_list",
        "watch",
        "watch_videos",
        "yt",
    }
)

# Value extraction regexes.  Each captures the value and requires a clean
# boundary so trailing segments ("/videos", "/about") and query strings are
# stripped rather than absorbed.
_RE_CHANNEL_ID = re.compile(r"/channel/(UC[A-Za-z0-9_-]{22})(?=[/?#]|\Z)")
_RE_USERNAME = re.compile(r"/user/([A-Za-z0-9]{1,20})(?=[/?#]|\Z)")
_RE_CUSTOM = re.compile(r"/c/([A-Za-z0-9]+)(?=[/?#]|\Z)")
_RE_HANDLE = re.compile(r"/@([A-Za-z0-9_-]{3,30})(?=[/?#]|\Z)")
_RE_VANITY = re.compile(r"/([A-Za-z0-9]{1,20})(?=[/?#]|\Z)")
_RE_USERNAME_VALUE = re.compile(r"[A-Za-z0-9]{1,20}\Z")


def is_reserved_path(path: str) -> bool:
    """True when the first path segment is a known site path, so the bare
    vanity prefix must not claim it."""
    segment = path.lstrip("/").split("/", 1)[0]
    segment = segment.split("?", 1)[0].split("#", 1)[0]
    return segment.lower() in RESERVED_PATHS


def _path_and_query(url: str) -> str | None:
    """Reduce a full URL or bare path to its path-plus-query portion."""
    if url.startswith("/"):
        return url
    if "://" in url or url.startswith("//"):
        try:
            parts = urlsplit(url)
        except ValueError:
            return None
        path = parts.path or "/"
        return path + ("?" + parts.query if parts.query else "")
    # Host-qualified without a scheme, e.g. "youtube.com/user/x".
    head = url.split("/", 1)[0]
    if "." in head and "?" not in head and "#" not in head:
        rest = url[len(head):]
        return rest if rest.startswith("/") else None
    return None


def parse_channel_url(url: str) -> ChannelIdentifier | None:
    """Extract the channel identifier from a URL, or None for non-channel URLs.

    Matching runs over the percent-decoded path+query in fixed priority
    order (channel ID > username > legacy > custom > handle > vanity).
    Never raises on arbitrary input.
    """
    if not url:
        return None
    target = _path_and_query(url)
    if target is None:
        return None
    target = unquote(target)

    m = _RE_CHANNEL_ID.match(target)
    if m:
        return ChannelIdentifier(Family.CHANNEL_ID, m.group(1), raw=url)

    m = _RE_USERNAME.match(target)
    if m:
        return ChannelIdentifier(Family.USERNAME, m.group(1).lower(), raw=url)

    if target.startswith("/profile?") or target.startswith("/profile/?"):
        query = target.split("?", 1)[1].split("#", 1)[0]
        values = parse_qs(query, keep_blank_values=False).get("user", [])
        if values and _RE_USERNAME_VALUE.match(values[0]):
            return ChannelIdentifier(
                Family.LEGACY_USERNAME, values[0].lower(), raw=url
            )
        return None

    m = _RE_CUSTOM.match(target)
    if m:
        return ChannelIdentifier(Family.CUSTOM_NAME, m.group(1).lower(), raw=url)

    m = _RE_HANDLE.match(target)
    if m:
        return ChannelIdentifier(Family.HANDLE, m.group(1).lower(), raw=url)

    if not is_reserved_path(target):
        m = _RE_VANITY.match(target)
        if m:
            return ChannelIdentifier(
                Family.VANITY_USERNAME, m.group(1).lower(), raw=url
            )
    return None


def normalize(identifier: ChannelIdentifier) -> ChannelIdentifier:
    """Lowercase the value for case-insensitive families; channel IDs are
    untouched.  Idempotent.  Raises IdentifierError on a malformed value."""
    if identifier.family is Family.CHANNEL_ID:
        value = identifier.value
    else:
        value = identifier.value.lower()
    result = ChannelIdentifier(identifier.family, value, raw=identifier.raw)
    result.validate()
    return result


def canonical_url(identifier: ChannelIdentifier) -> str:
    """Render an identifier back to its canonical path form."""
    family, value = identifier.family, identifier.value
    if family is Family.CHANNEL_ID:
        return f"/channel/{value}"
    if family is Family.USERNAME:
        return f"/user/{value}"
    if family is Family.LEGACY_USERNAME:
        return f"/profile?user={value}"
    if family is Family.CUSTOM_NAME:
        return f"/c/{value}"
    if family is Family.HANDLE:
        return f"/@{value}"
    return f"/{value}"
