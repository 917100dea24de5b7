#!/usr/bin/env python3
"""Regenerate the synthetic CDX fixture `table8_2006.cdx`.

Deterministic (seeded), so rerunning produces byte-identical output.
The file contains exactly 226 distinct successful /user/ captures in 2006
plus noise rows that enumeration must filter, dedup, or skip.
"""

import random
from pathlib import Path

HERE = Path(__file__).parent


def surt(url: str) -> str:
    rest = url.split("://", 1)[1]
    host, _, path = rest.partition("/")
    host = host.removeprefix("www.")
    return ",".join(reversed(host.split("."))) + ")/" + path.lower()


def row(url: str, ts: str, status: int, digest: str, length: int) -> str:
    return f"{surt(url)} {ts} {url} text/html {status} {digest} {length}"


def timestamp(rng: random.Random, year: int) -> str:
    month = rng.randint(7, 12) if year == 2006 else rng.randint(1, 12)
    day = rng.randint(1, 28)
    return f"{year}{month:02d}{day:02d}{rng.randint(0, 23):02d}{rng.randint(0, 59):02d}{rng.randint(0, 59):02d}"


def main() -> None:
    rng = random.Random(20060101)
    lines = []
    kept_2006 = []

    for i in range(226):
        name = f"user{i:04d}{rng.choice('abcdefgh')}"
        url = f"https://www.youtube.com/user/{name}"
        ts = timestamp(rng, 2006)
        digest = f"D{rng.getrandbits(40):010X}"
        lines.append(row(url, ts, 200, digest, rng.randint(4000, 30000)))
        kept_2006.append((url, ts, digest))

    # Noise: out-of-year rows (filtered by year_range).
    for i in range(12):
        name = f"late{i:03d}"
        url = f"https://www.youtube.com/user/{name}"
        lines.append(
            row(url, timestamp(rng, 2007), 200, f"D{rng.getrandbits(40):010X}", 5000)
        )
    # Noise: unsuccessful captures (filtered by status).
    for i in range(6):
        url = f"https://www.youtube.com/user/gone{i:02d}"
        lines.append(
            row(url, timestamp(rng, 2006), 301, f"D{rng.getrandbits(40):010X}", 400)
        )
    # Noise: exact duplicates of kept rows (deduplicated).
    for url, ts, digest in rng.sample(kept_2006, 3):
        lines.append(row(url.replace("https://", "http://"), ts, 200, digest, 9999))
    # Noise: non-channel pages under the wider host prefix.
    for i in range(4):
        url = f"https://www.youtube.com/watch?v=vid{i:05d}"
        lines.append(
            row(url, timestamp(rng, 2006), 200, f"D{rng.getrandbits(40):010X}", 7500)
        )
    # Noise: malformed rows (skipped, counted).
    lines.append("com,youtube)/user/torn 20061201")
    lines.append("not an index row at all")

    rng.shuffle(lines)
    out = HERE / "cdx" / "table8_2006.cdx"
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(lines)} lines)")


if __name__ == "__main__":
    main()
