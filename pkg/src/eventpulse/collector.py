"""Collect keyword-filtered posts from a streaming or search source.

Matching lines are appended raw (byte-exact) to one archive file per
UTC day under ``archive_dir/event_name/``. A run uses one reader task
per source connection and one writer; they hand lines over through a
bounded queue so a slow disk back-pressures the reader instead of
growing memory without limit.

Time only enters through a Clock object (``now``/``wait``), so tests
drive reconnect backoff and rate-limit pauses with a virtual clock.
"""

from __future__ import annotations

import configparser
import logging
import queue
import re
import socket
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Protocol, Sequence
from urllib.parse import quote

from .tweets import ParseError, Tweet, parse_tweet

__all__ = [
    "CollectionJob",
    "CollectionStats",
    "ConfigError",
    "Credentials",
    "ExponentialBackoff",
    "ManualClock",
    "RateLimit",
    "ReplaySource",
    "ScriptedSearchSource",
    "StreamDisconnected",
    "SystemClock",
    "TcpSearchSource",
    "TcpStreamSource",
    "collect_search",
    "collect_stream",
    "load_credentials",
    "matches_track",
]

log = logging.getLogger(__name__)

QUEUE_CAPACITY = 10_000

_EVENT_NAME = re.compile(r"^[A-Za-z0-9_-]+$")
_CREDENTIAL_KEYS = (
    "consumer_key",
    "consumer_secret",
    "access_token",
    "access_token_secret",
)

# tokens are maximal runs of letters and digits; underscore separates
_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)

_END = object()


class ConfigError(Exception):
    """Bad or missing collector configuration."""


class StreamDisconnected(ConnectionError):
    """The source connection dropped; the run should reconnect."""


@dataclass(frozen=True)
class Credentials:
    """The four opaque API codes the live platform hands out."""

    consumer_key: str
    consumer_secret: str
    access_token: str
    access_token_secret: str


@dataclass(frozen=True)
class CollectionJob:
    """What to collect and where to put it."""

    mode: str
    event_name: str
    track_terms: tuple[str, ...]
    archive_dir: Path

    def __post_init__(self):
        if self.mode not in ("stream", "search-recent", "search-popular"):
            raise ValueError(f"unknown collection mode: {self.mode!r}")
        if not _EVENT_NAME.match(self.event_name):
            raise ValueError(f"bad event name: {self.event_name!r}")
        object.__setattr__(self, "track_terms", tuple(self.track_terms))
        if not self.track_terms:
            raise ValueError("track_terms must not be empty")
        object.__setattr__(self, "archive_dir", Path(self.archive_dir))


@dataclass
class CollectionStats:
    """Counters for one run; written <= matched <= received always holds."""

    received: int = 0
    matched: int = 0
    written: int = 0
    reconnects: int = 0
    rate_limit_waits: int = 0
    started_at: datetime | None = None
    ended_at: datetime | None = None


def load_credentials(path: str | Path) -> Credentials:
    """Read the four credential keys from an INI-style file.

    Sections may be named anything; ";" comments are allowed. A missing
    file or key raises ConfigError naming what is absent.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"credentials file not found: {path}")
    parser = configparser.ConfigParser()
    text = path.read_text("utf-8")
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError:
        # tolerate bare key=value files by wrapping them in a section
        parser = configparser.ConfigParser()
        parser.read_string("[credentials]\n" + text)
    values: dict[str, str] = dict(parser.defaults())
    for section in parser.sections():
        for key, value in parser.items(section):
            values.setdefault(key, value)
    for key in _CREDENTIAL_KEYS:
        if not values.get(key, "").strip():
            raise ConfigError(f"missing credential key: {key}")
    return Credentials(*(values[key].strip() for key in _CREDENTIAL_KEYS))


def matches_track(tweet: Tweet, track_terms: Sequence[str]) -> bool:
    """True when any term equals a hashtag or a whole token of the text.

    A term is compared after stripping one leading "#" and case folding,
    so "#Korrika" and "korrika" select the same posts. Substring hits do
    not count: "korrika" never matches "korrikalaria".
    """
    tokens: set[str] | None = None
    tags = {tag.casefold() for tag in tweet.hashtags}
    for term in track_terms:
        if term.startswith("#"):
            term = term[1:]
        term = term.casefold()
        if not term:
            continue
        if term in tags:
            return True
        if tokens is None:
            tokens = {match.casefold() for match in _TOKEN.findall(tweet.text)}
        if term in tokens:
            return True
    return False


# --- clocks ---------------------------------------------------------------


class Clock(Protocol):
    def now(self) -> float: ...

    def wait(self, stop: threading.Event | None, seconds: float) -> None: ...


class SystemClock:
    """Wall time; wait() wakes early when the stop event is set."""

    def now(self) -> float:
        return time.time()

    def wait(self, stop: threading.Event | None, seconds: float) -> None:
        if seconds <= 0:
            return
        if stop is None:
            time.sleep(seconds)
        else:
            stop.wait(seconds)

    def utcnow(self) -> datetime:
        return datetime.fromtimestamp(self.now(), tz=timezone.utc)


class ManualClock:
    """Deterministic clock for tests and replays.

    now() stands still except that wait() advances it by the requested
    delay and records the delay in ``waits``.
    """

    def __init__(self, start: float = 1_000_000_000.0):
        self._now = start
        self._lock = threading.Lock()
        self.waits: list[float] = []

    def now(self) -> float:
        with self._lock:
            return self._now

    def wait(self, stop: threading.Event | None, seconds: float) -> None:
        seconds = max(0.0, seconds)
        with self._lock:
            self.waits.append(seconds)
            self._now += seconds

    def advance(self, seconds: float) -> None:
        with self._lock:
            self._now += seconds


def _clock_date(clock: Clock) -> str:
    return datetime.fromtimestamp(clock.now(), tz=timezone.utc).strftime("%Y-%m-%d")


def _clock_datetime(clock: Clock) -> datetime:
    return datetime.fromtimestamp(clock.now(), tz=timezone.utc)


# --- backoff ---------------------------------------------------------------


class ExponentialBackoff:
    """Reconnect delays: 1 s doubling to a 320 s cap.

    A connection that stayed healthy for 60 s or longer earns a reset
    back to the initial delay.
    """

    def __init__(
        self,
        initial: float = 1.0,
        factor: float = 2.0,
        cap: float = 320.0,
        healthy_reset: float = 60.0,
    ):
        self.initial = initial
        self.factor = factor
        self.cap = cap
        self.healthy_reset = healthy_reset
        self._next = initial

    def next_delay(self) -> float:
        delay = self._next
        self._next = min(self._next * self.factor, self.cap)
        return delay

    def reset(self) -> None:
        self._next = self.initial


# --- sources ---------------------------------------------------------------


class StreamSource(Protocol):
    """connect() yields raw record lines (bytes, no newline).

    Iteration ends when the source is permanently exhausted or the stop
    event is set; a transient drop raises StreamDisconnected instead.
    """

    def connect(
        self, track_terms: Sequence[str], stop: threading.Event | None = None
    ) -> Iterator[bytes]: ...


def _to_bytes(line: str | bytes) -> bytes:
    if isinstance(line, str):
        line = line.encode("utf-8")
    return line.rstrip(b"\r\n")


class ReplaySource:
    """Replay recorded lines in-process, with scripted disconnects.

    ``disconnect_after`` holds cumulative delivered-line counts; once
    that many lines went out, the source raises StreamDisconnected. On
    reconnect it rewinds ``rewind`` lines to mimic streams that
    re-deliver after a drop. Track terms are ignored: filtering is the
    collector's job.
    """

    def __init__(
        self,
        lines: Iterable[str | bytes],
        *,
        disconnect_after: Iterable[int] = (),
        rewind: int = 0,
    ):
        self._lines = [_to_bytes(line) for line in lines]
        self._pending = sorted(set(disconnect_after))
        self._rewind = rewind
        self._cursor = 0
        self._delivered = 0
        self._connected_before = False

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> "ReplaySource":
        with open(path, "rb") as handle:
            return cls([raw for raw in handle if raw.strip()], **kwargs)

    def connect(
        self, track_terms: Sequence[str], stop: threading.Event | None = None
    ) -> Iterator[bytes]:
        if self._connected_before:
            self._cursor = max(0, self._cursor - self._rewind)
        self._connected_before = True
        return self._replay(stop)

    def _replay(self, stop: threading.Event | None) -> Iterator[bytes]:
        while self._cursor < len(self._lines):
            if stop is not None and stop.is_set():
                return
            line = self._lines[self._cursor]
            self._cursor += 1
            self._delivered += 1
            yield line
            if self._pending and self._delivered >= self._pending[0]:
                self._pending.pop(0)
                raise StreamDisconnected("scripted disconnect")


@dataclass(frozen=True)
class RateLimit:
    """A source answered "slow down"; resume once reset_at passes."""

    reset_at: float


class SearchSource(Protocol):
    """pages() yields lists of raw lines, or RateLimit markers."""

    def pages(
        self, track_terms: Sequence[str]
    ) -> Iterator[list[bytes] | RateLimit]: ...


class ScriptedSearchSource:
    """Serve a prepared script of pages and RateLimit markers."""

    def __init__(self, script: Iterable[list[str | bytes] | RateLimit]):
        self._script = list(script)

    def pages(
        self, track_terms: Sequence[str]
    ) -> Iterator[list[bytes] | RateLimit]:
        for item in self._script:
            if isinstance(item, RateLimit):
                yield item
            else:
                yield [_to_bytes(line) for line in item]


def _track_query(track_terms: Sequence[str]) -> str:
    # safe="" so "#" becomes %23; a raw "#" would start the URL fragment
    # and silently swallow every parameter after the track value.
    return ",".join(quote(term, safe="") for term in track_terms)


class TcpStreamSource:
    """Client for the newline-delimited TCP streaming protocol.

    Sends ``GET /stream?track=<comma-separated terms>`` and then treats
    every non-blank line as one record; blank lines are keep-alives. A
    closed or failed connection surfaces as StreamDisconnected. The
    socket uses short read timeouts so a set stop event is noticed even
    while the stream idles.
    """

    def __init__(
        self,
        host: str,
        port: int,
        *,
        connect_timeout: float = 5.0,
        read_timeout: float = 0.25,
        credentials: Credentials | None = None,
    ):
        self.host = host
        self.port = port
        self.connect_timeout = connect_timeout
        self.read_timeout = read_timeout
        # the replay protocol is unsigned; credentials are accepted for
        # interface parity with live sources and otherwise unused
        self.credentials = credentials

    def connect(
        self, track_terms: Sequence[str], stop: threading.Event | None = None
    ) -> Iterator[bytes]:
        try:
            sock = socket.create_connection(
                (self.host, self.port), timeout=self.connect_timeout
            )
            request = f"GET /stream?track={_track_query(track_terms)} HTTP/1.0\r\n\r\n"
            sock.sendall(request.encode("ascii"))
        except OSError as exc:
            raise StreamDisconnected(f"connect failed: {exc}") from exc
        sock.settimeout(self.read_timeout)
        return self._read_lines(sock, stop)

    @staticmethod
    def _read_lines(
        sock: socket.socket, stop: threading.Event | None
    ) -> Iterator[bytes]:
        buffer = b""
        try:
            while True:
                if stop is not None and stop.is_set():
                    return
                try:
                    chunk = sock.recv(65536)
                except socket.timeout:
                    continue
                except OSError as exc:
                    raise StreamDisconnected(f"read failed: {exc}") from exc
                if chunk == b"":
                    raise StreamDisconnected("connection closed by peer")
                buffer += chunk
                while b"\n" in buffer:
                    line, buffer = buffer.split(b"\n", 1)
                    line = line.rstrip(b"\r")
                    if line:
                        yield line
        finally:
            sock.close()


class TcpSearchSource:
    """Client for the paged search protocol of the mock server.

    Each page is one request/response exchange; the response starts with
    ``OK <n>``, ``RATE_LIMIT <retry-after-seconds>`` or ``END``. A rate
    limit is surfaced as RateLimit(reset_at) computed against the
    caller's clock, and the same page is requested again afterwards.
    """

    def __init__(
        self,
        host: str,
        port: int,
        *,
        kind: str = "recent",
        timeout: float = 5.0,
        clock: Clock | None = None,
        credentials: Credentials | None = None,
    ):
        self.host = host
        self.port = port
        self.kind = kind
        self.timeout = timeout
        self.clock = clock or SystemClock()
        self.credentials = credentials

    def pages(
        self, track_terms: Sequence[str]
    ) -> Iterator[list[bytes] | RateLimit]:
        page = 0
        while True:
            status, payload = self._fetch(track_terms, page)
            if status == b"END":
                return
            if status.startswith(b"RATE_LIMIT"):
                retry_after = float(status.split()[1])
                yield RateLimit(reset_at=self.clock.now() + retry_after)
                continue  # retry the same page once the caller waited
            yield payload
            page += 1

    def _fetch(
        self, track_terms: Sequence[str], page: int
    ) -> tuple[bytes, list[bytes]]:
        request = (
            f"GET /search?track={_track_query(track_terms)}"
            f"&page={page}&kind={self.kind} HTTP/1.0\r\n\r\n"
        )
        try:
            with socket.create_connection(
                (self.host, self.port), timeout=self.timeout
            ) as sock:
                sock.sendall(request.encode("ascii"))
                blob = b""
                while True:
                    chunk = sock.recv(65536)
                    if not chunk:
                        break
                    blob += chunk
        except OSError as exc:
            raise StreamDisconnected(f"search request failed: {exc}") from exc
        lines = [line.rstrip(b"\r") for line in blob.split(b"\n")]
        lines = [line for line in lines if line]
        if not lines:
            raise StreamDisconnected("empty search response")
        return lines[0], lines[1:]


# --- archive writing -------------------------------------------------------


class ArchiveWriter:
    """Append raw lines to one LF-terminated file per UTC day."""

    def __init__(self, directory: Path, clock: Clock):
        self._directory = Path(directory)
        self._directory.mkdir(parents=True, exist_ok=True)
        self._clock = clock
        self._handles: dict[str, BinaryIO] = {}

    def append(self, raw: bytes) -> None:
        day = _clock_date(self._clock)
        handle = self._handles.get(day)
        if handle is None:
            handle = open(self._directory / f"{day}.jsonl", "ab")
            self._handles[day] = handle
        handle.write(raw + b"\n")
        handle.flush()

    def close(self) -> None:
        for handle in self._handles.values():
            handle.close()
        self._handles.clear()


# --- collection runs -------------------------------------------------------


class _LineFilter:
    """Shared per-run pipeline: parse, match, dedupe, append."""

    def __init__(self, job: CollectionJob, writer: ArchiveWriter, stats: CollectionStats):
        self._job = job
        self._writer = writer
        self._stats = stats
        self._seen: set[int] = set()

    def handle(self, raw: bytes) -> None:
        self._stats.received += 1
        try:
            tweet = parse_tweet(raw)
        except ParseError:
            return  # counted as received, never written
        if not matches_track(tweet, self._job.track_terms):
            return
        self._stats.matched += 1
        if tweet.id in self._seen:
            return  # streams re-deliver after reconnects
        self._seen.add(tweet.id)
        self._writer.append(raw)
        self._stats.written += 1


def collect_stream(
    job: CollectionJob,
    source: StreamSource,
    stop: threading.Event | None = None,
    *,
    clock: Clock | None = None,
    stats: CollectionStats | None = None,
    queue_capacity: int = QUEUE_CAPACITY,
) -> CollectionStats:
    """Run a streaming collection until the source ends or stop is set.

    Every received line that parses and matches the job's track terms is
    appended byte-exactly to ``archive_dir/event_name/YYYY-MM-DD.jsonl``
    (UTC date of receipt). Duplicate ids within the run are written
    once. Disconnects trigger reconnects with exponential backoff (1 s
    doubling to 320 s, reset after 60 s healthy). An unwritable archive
    directory is fatal; malformed lines are not.
    """
    if job.mode != "stream":
        raise ValueError(f"collect_stream needs mode 'stream', got {job.mode!r}")
    clock = clock or SystemClock()
    stop = stop if stop is not None else threading.Event()
    stats = stats if stats is not None else CollectionStats()
    stats.started_at = _clock_datetime(clock)

    writer = ArchiveWriter(job.archive_dir / job.event_name, clock)
    pipeline = _LineFilter(job, writer, stats)
    handoff: queue.Queue = queue.Queue(maxsize=queue_capacity)
    backoff = ExponentialBackoff()
    reader_error: list[BaseException] = []

    def put(item) -> bool:
        while True:
            try:
                handoff.put(item, timeout=0.1)
                return True
            except queue.Full:
                if stop.is_set():
                    return False

    def reader() -> None:
        connects = 0
        try:
            while not stop.is_set():
                connected_at = None
                try:
                    stream = source.connect(job.track_terms, stop)
                    connected_at = clock.now()
                    connects += 1
                    if connects > 1:
                        stats.reconnects += 1
                    for raw in stream:
                        if stop.is_set():
                            return
                        if not raw.strip():
                            continue  # keep-alive
                        if not put(("line", raw)):
                            return
                    if not stop.is_set():
                        put((_END, None))
                    return
                except StreamDisconnected as exc:
                    if (
                        connected_at is not None
                        and clock.now() - connected_at >= backoff.healthy_reset
                    ):
                        backoff.reset()
                    delay = backoff.next_delay()
                    log.info("stream dropped (%s); reconnecting in %.0fs", exc, delay)
                    clock.wait(stop, delay)
        except BaseException as exc:  # pragma: no cover - defensive
            reader_error.append(exc)
            put((_END, None))

    thread = threading.Thread(target=reader, name="eventpulse-reader", daemon=True)
    thread.start()
    try:
        while True:
            try:
                kind, payload = handoff.get(timeout=0.05)
            except queue.Empty:
                if stop.is_set() or not thread.is_alive():
                    break
                continue
            if kind is _END:
                break
            pipeline.handle(payload)
        # drain whatever the reader already handed over
        while True:
            try:
                kind, payload = handoff.get_nowait()
            except queue.Empty:
                break
            if kind is _END:
                break
            pipeline.handle(payload)
    finally:
        stop.set()
        thread.join(timeout=10)
        writer.close()
        stats.ended_at = _clock_datetime(clock)
    if reader_error:
        raise reader_error[0]
    return stats


def collect_search(
    job: CollectionJob,
    source: SearchSource,
    *,
    clock: Clock | None = None,
    stop: threading.Event | None = None,
    max_pages: int | None = None,
    stats: CollectionStats | None = None,
) -> CollectionStats:
    """Run paged search queries until the source is exhausted.

    Matching results are archived exactly as in collect_stream. A
    RateLimit answer pauses the run until the indicated reset time and
    is counted in ``stats.rate_limit_waits``.
    """
    if job.mode not in ("search-recent", "search-popular"):
        raise ValueError(f"collect_search needs a search mode, got {job.mode!r}")
    clock = clock or SystemClock()
    stats = stats if stats is not None else CollectionStats()
    stats.started_at = _clock_datetime(clock)

    writer = ArchiveWriter(job.archive_dir / job.event_name, clock)
    pipeline = _LineFilter(job, writer, stats)
    pages_taken = 0
    try:
        for item in source.pages(job.track_terms):
            if stop is not None and stop.is_set():
                break
            if isinstance(item, RateLimit):
                stats.rate_limit_waits += 1
                delay = item.reset_at - clock.now()
                log.info("rate limited; sleeping %.1fs", max(0.0, delay))
                clock.wait(stop, delay)
                continue
            for raw in item:
                pipeline.handle(raw)
            pages_taken += 1
            if max_pages is not None and pages_taken >= max_pages:
                break
    finally:
        writer.close()
        stats.ended_at = _clock_datetime(clock)
    return stats
