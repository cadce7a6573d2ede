"""Parse line-delimited post archives into typed tweet records.

An archive is a UTF-8 text file with one JSON record per line, LF
terminated. Records follow the classic 2015-era platform layout; the
fields read here are ``id``, ``created_at``, ``user.screen_name``,
``text``, ``entities.hashtags``, ``retweeted_status``,
``in_reply_to_screen_name`` and the two coordinate containers
(GeoJSON-style ``coordinates`` preferred, legacy ``geo`` as fallback).

Parsing never rewrites archive lines: the collector stores raw bytes
and this module only builds an in-memory view of them.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import NamedTuple

__all__ = [
    "MAX_ID",
    "ParseError",
    "ParseStats",
    "RetweetRef",
    "Tweet",
    "parse_tweet",
    "read_archive",
]

# Post ids are unsigned 64-bit on the platform.
MAX_ID = 2**64 - 1

_CLASSIC_FORMAT = "%a %b %d %H:%M:%S %z %Y"
_HASHTAG = re.compile(r"#(\w+)")


class ParseError(ValueError):
    """A record could not be turned into a Tweet.

    ``field`` names the offending part of the record ("line" for
    syntax-level failures).
    """

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class RetweetRef(NamedTuple):
    """Provenance of a retweet: the reposted original."""

    original_tweet_id: int
    original_author: str


@dataclass(frozen=True, slots=True)
class Tweet:
    """One post, reduced to the fields the analytics need.

    Attributes:
        id: Unique post identifier, 0 < id < 2**64.
        created_at: Timezone-aware UTC timestamp, second precision.
        author: Screen name of the poster, without the "@" prefix.
        text: Message body; empty string when the record carries none.
        hashtags: Lowercase tags without "#", in record order.
        retweet_of: Set iff the record embeds the reposted original.
        reply_to: Screen name this post replies to, or None.
        coords: (latitude, longitude) in degrees, or None.
        retweet_count: The platform's cumulative repost counter for the
            content this record carries (the embedded original's counter
            for retweets, the post's own otherwise); None when absent.
    """

    id: int
    created_at: datetime
    author: str
    text: str = ""
    hashtags: tuple[str, ...] = ()
    retweet_of: RetweetRef | None = None
    reply_to: str | None = None
    coords: tuple[float, float] | None = None
    retweet_count: int | None = None

    def __post_init__(self):
        if not isinstance(self.id, int) or not 0 < self.id <= MAX_ID:
            raise ValueError(f"tweet id out of range: {self.id!r}")
        if self.created_at.tzinfo is None:
            raise ValueError("created_at must be timezone-aware")
        if not self.author or self.author.startswith("@"):
            raise ValueError(f"bad author screen name: {self.author!r}")
        object.__setattr__(self, "hashtags", tuple(self.hashtags))
        if self.retweet_of is not None:
            if self.retweet_of.original_tweet_id == self.id:
                raise ValueError("retweet cannot reference itself")
        if self.coords is not None:
            lat, lon = self.coords
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                raise ValueError(f"coordinates out of range: {self.coords!r}")
            object.__setattr__(self, "coords", (float(lat), float(lon)))


@dataclass
class ParseStats:
    """Per-archive accounting; total_lines = parsed + skipped_malformed + duplicates_dropped."""

    total_lines: int = 0
    parsed: int = 0
    skipped_malformed: int = 0
    duplicates_dropped: int = 0


def _parse_timestamp(value: object) -> datetime:
    if not isinstance(value, str) or not value.strip():
        raise ParseError("created_at", f"expected a timestamp string, got {value!r}")
    try:
        stamp = datetime.strptime(value, _CLASSIC_FORMAT)
    except ValueError:
        iso = value[:-1] + "+00:00" if value.endswith("Z") else value
        try:
            stamp = datetime.fromisoformat(iso)
        except ValueError:
            raise ParseError("created_at", f"unparseable timestamp: {value!r}") from None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc).replace(microsecond=0)


def _parse_id(value: object, field_name: str) -> int:
    # ids may arrive as JSON numbers or as digit strings
    if isinstance(value, bool):
        raise ParseError(field_name, f"expected an integer id, got {value!r}")
    if isinstance(value, str) and value.isdigit():
        value = int(value)
    if not isinstance(value, int):
        raise ParseError(field_name, f"missing or non-integer id: {value!r}")
    if not 0 < value <= MAX_ID:
        raise ParseError(field_name, f"id out of unsigned 64-bit range: {value}")
    return value


def _parse_screen_name(container: object, field_name: str) -> str:
    name = container.get("screen_name") if isinstance(container, dict) else None
    if isinstance(name, str):
        name = name.lstrip("@").strip()
    if not name or not isinstance(name, str):
        raise ParseError(field_name, "missing screen name")
    return name


def _parse_hashtags(record: dict, text: str) -> tuple[str, ...]:
    entities = record.get("entities")
    if isinstance(entities, dict) and isinstance(entities.get("hashtags"), list):
        return tuple(
            item["text"].lower()
            for item in entities["hashtags"]
            if isinstance(item, dict)
            and isinstance(item.get("text"), str)
            and item["text"]
        )
    return tuple(match.group(1).lower() for match in _HASHTAG.finditer(text))


def _as_point(value: object) -> tuple[float, float] | None:
    if not isinstance(value, (list, tuple)) or len(value) < 2:
        return None
    first, second = value[0], value[1]
    for item in (first, second):
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            return None
    return float(first), float(second)


def _valid_coords(lat: float, lon: float) -> bool:
    return -90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0


def _parse_coords(record: dict) -> tuple[float, float] | None:
    """GeoJSON-style container wins; it stores [longitude, latitude]."""
    geojson = record.get("coordinates")
    if isinstance(geojson, dict):
        point = _as_point(geojson.get("coordinates"))
        if point is not None:
            lon, lat = point
            if _valid_coords(lat, lon):
                return lat, lon
    legacy = record.get("geo")
    if isinstance(legacy, dict):
        point = _as_point(legacy.get("coordinates"))
        if point is not None:
            lat, lon = point
            if _valid_coords(lat, lon):
                return lat, lon
    return None


def _parse_retweet(record: dict, tweet_id: int) -> tuple[RetweetRef | None, int | None]:
    embedded = record.get("retweeted_status")
    if not isinstance(embedded, dict):
        # "RT @..." text prefixes do not count; only the embedded object does
        return None, None
    original_id = _parse_id(embedded.get("id"), "retweeted_status.id")
    if original_id == tweet_id:
        raise ParseError("retweeted_status.id", "retweet references itself")
    original_author = _parse_screen_name(
        embedded.get("user"), "retweeted_status.user.screen_name"
    )
    counter = embedded.get("retweet_count")
    if isinstance(counter, bool) or not isinstance(counter, int) or counter < 0:
        counter = None
    return RetweetRef(original_id, original_author), counter


def parse_tweet(line: str | bytes) -> Tweet:
    """Parse one raw archive line into a Tweet.

    Raises ParseError naming the offending field for malformed syntax,
    a missing id / created_at / author, or an unparseable timestamp.
    The input line itself is never modified.
    """
    if isinstance(line, (bytes, bytearray)):
        try:
            line = bytes(line).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("line", "not valid UTF-8") from exc
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError("line", f"not valid JSON ({exc.msg})") from exc
    if not isinstance(record, dict):
        raise ParseError("line", "record is not a JSON object")

    tweet_id = _parse_id(record.get("id"), "id")
    created_at = _parse_timestamp(record.get("created_at"))
    author = _parse_screen_name(record.get("user"), "user.screen_name")
    text = record.get("text")
    if not isinstance(text, str):
        text = ""

    retweet_of, retweet_count = _parse_retweet(record, tweet_id)
    if retweet_of is None:
        own_counter = record.get("retweet_count")
        if (
            isinstance(own_counter, int)
            and not isinstance(own_counter, bool)
            and own_counter >= 0
        ):
            retweet_count = own_counter

    reply_to = record.get("in_reply_to_screen_name")
    if isinstance(reply_to, str):
        reply_to = reply_to.lstrip("@").strip() or None
    else:
        reply_to = None

    return Tweet(
        id=tweet_id,
        created_at=created_at,
        author=author,
        text=text,
        hashtags=_parse_hashtags(record, text),
        retweet_of=retweet_of,
        reply_to=reply_to,
        coords=_parse_coords(record),
        retweet_count=retweet_count,
    )


def read_archive(
    path: str | Path, dedupe: bool = False
) -> tuple[list[Tweet], ParseStats]:
    """Read an archive file; malformed lines are counted, never fatal.

    Tweets come back in file order. With ``dedupe`` the second and
    later occurrences of an id are dropped and counted.
    """
    tweets: list[Tweet] = []
    stats = ParseStats()
    seen: set[int] = set()
    with open(path, "rb") as handle:
        for raw in handle:
            stats.total_lines += 1
            try:
                tweet = parse_tweet(raw.rstrip(b"\r\n"))
            except ParseError:
                stats.skipped_malformed += 1
                continue
            if dedupe:
                if tweet.id in seen:
                    stats.duplicates_dropped += 1
                    continue
                seen.add(tweet.id)
            tweets.append(tweet)
            stats.parsed += 1
    return tweets, stats
