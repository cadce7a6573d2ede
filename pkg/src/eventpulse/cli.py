"""Command line front end: collect archives and run the analytics.

Exit codes: 0 on success, 1 on operational failures (missing files,
bad archives, config problems; message on stderr), 2 on usage errors.
With a fixed seed every subcommand writes byte-identical output files
across reruns.
"""

from __future__ import annotations

import argparse
import os
import signal
import sys
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import analytics, graph as graphs
from .collector import (
    CollectionJob,
    ConfigError,
    ReplaySource,
    ScriptedSearchSource,
    TcpSearchSource,
    TcpStreamSource,
    collect_search,
    collect_stream,
    load_credentials,
)
from .tweets import ParseError, read_archive

CONFIG_ENV_VAR = "EVENTPULSE_CONFIG"
DEFAULT_CREDENTIALS = "./twitter.ini"
DEFAULT_DATA_DIR = "./data"
DEFAULT_SEED = 42


@dataclass(frozen=True)
class GlobalConfig:
    """Options shared by every subcommand."""

    credentials_path: Path
    data_dir: Path
    output_format: str = "table"
    tz_offset_minutes: int = 0
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.output_format not in ("table", "csv"):
            raise ValueError(f"unknown output format: {self.output_format!r}")
        if abs(self.tz_offset_minutes) > analytics.MAX_TZ_OFFSET_MINUTES:
            raise ValueError(f"tz offset out of range: {self.tz_offset_minutes}")


def _config_from_args(args: argparse.Namespace) -> GlobalConfig:
    credentials = args.credentials or os.environ.get(CONFIG_ENV_VAR) or DEFAULT_CREDENTIALS
    return GlobalConfig(
        credentials_path=Path(credentials),
        data_dir=Path(args.data_dir),
        output_format=args.format,
        tz_offset_minutes=args.tz,
        seed=args.seed,
    )


def _emit_table(headers: list[str], rows: list[list[str]]) -> None:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    print("  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip())
    for row in rows:
        print("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())


def _emit_ranking(entries, config: GlobalConfig, *, user_keys: bool) -> None:
    if config.output_format == "csv":
        print("key,score")
        for entry in entries:
            print(f"{entry.key},{entry.score}")
        return
    if user_keys:
        headers = ["rank", "user", "score"]
        rows = [[str(e.rank), f"@{e.key}", str(e.score)] for e in entries]
    else:
        headers = ["rank", "tweet", "user", "score", "text"]
        rows = [
            [str(e.rank), str(e.key), f"@{e.author}", str(e.score), _squash(e.text)]
            for e in entries
        ]
    _emit_table(headers, rows)


def _squash(text: str, limit: int = 60) -> str:
    flat = " ".join(text.split())
    return flat if len(flat) <= limit else flat[: limit - 1] + "…"


def _read_tweets(path: str):
    tweets, stats = read_archive(path, dedupe=True)
    return tweets, stats


# --- subcommands -----------------------------------------------------------


def _cmd_collect(args: argparse.Namespace, config: GlobalConfig) -> int:
    job = CollectionJob(
        mode=args.mode,
        event_name=args.event_name,
        track_terms=tuple(args.terms),
        archive_dir=config.data_dir,
    )
    credentials = None
    if args.credentials:  # an explicitly named file must exist and be complete
        credentials = load_credentials(config.credentials_path)
    elif config.credentials_path.is_file():
        credentials = load_credentials(config.credentials_path)

    endpoint = args.endpoint
    if endpoint is None:
        print(
            "error: no endpoint; pass --endpoint tcp://HOST:PORT or --endpoint FILE",
            file=sys.stderr,
        )
        return 1

    stop = threading.Event()
    previous_handler = None
    try:
        previous_handler = signal.signal(signal.SIGINT, lambda *_: stop.set())
    except ValueError:
        pass  # not the main thread; rely on the stop event alone

    try:
        if endpoint.startswith("tcp://"):
            host, _, port = endpoint[len("tcp://") :].partition(":")
            if job.mode == "stream":
                source = TcpStreamSource(host, int(port), credentials=credentials)
                stats = collect_stream(job, source, stop)
            else:
                kind = job.mode.removeprefix("search-")
                source = TcpSearchSource(
                    host, int(port), kind=kind, credentials=credentials
                )
                stats = collect_search(job, source, stop=stop)
        else:
            path = endpoint.removeprefix("file://")
            if job.mode == "stream":
                stats = collect_stream(job, ReplaySource.from_file(path), stop)
            else:
                with open(path, "rb") as handle:
                    lines = [raw.rstrip(b"\r\n") for raw in handle if raw.strip()]
                pages = [lines[i : i + 100] for i in range(0, len(lines), 100)]
                stats = collect_search(job, ScriptedSearchSource(pages), stop=stop)
    finally:
        if previous_handler is not None:
            signal.signal(signal.SIGINT, previous_handler)

    print(
        f"received {stats.received}, matched {stats.matched}, "
        f"written {stats.written}, reconnects {stats.reconnects}"
    )
    return 0


def _cmd_histogram(args: argparse.Namespace, config: GlobalConfig) -> int:
    tweets, _ = _read_tweets(args.archive)
    tz = args.histogram_tz if args.histogram_tz is not None else config.tz_offset_minutes
    buckets = analytics.histogram(tweets, args.granularity, tz)
    analytics.write_histogram_dat(buckets, args.output)
    print(f"{len(buckets)} buckets -> {args.output}")
    return 0


def _cmd_top_tweets(args: argparse.Namespace, config: GlobalConfig) -> int:
    tweets, _ = _read_tweets(args.file)
    entries = analytics.top_tweets_by_retweets(tweets, args.k, args.count_source)
    _emit_ranking(entries, config, user_keys=False)
    return 0


def _cmd_top_users(args: argparse.Namespace, config: GlobalConfig) -> int:
    tweets, _ = _read_tweets(args.file)
    if args.by == "activity":
        entries = analytics.top_users_by_activity(tweets, args.k)
    else:
        entries = analytics.top_users_by_received_retweets(tweets, args.k)
    _emit_ranking(entries, config, user_keys=True)
    return 0


def _cmd_coordinates(args: argparse.Namespace, config: GlobalConfig) -> int:
    tweets, _ = _read_tweets(args.archive)
    rows = analytics.extract_coordinates(tweets)
    analytics.write_coordinates_csv(rows, args.output)
    print(f"{len(rows)} geotagged tweets -> {args.output}")
    return 0


def _cmd_interactions(args: argparse.Namespace, config: GlobalConfig) -> int:
    tweets, _ = _read_tweets(args.archive)
    edges = graphs.extract_interactions(tweets)
    g = graphs.aggregate(edges, merge_kinds=args.merge_kinds)
    if args.top is not None:
        g = graphs.notable_subgraph(g, args.top)
    graphs.export_edges_csv(g, args.output)
    print(
        f"{len(edges)} interactions, {len(g.nodes)} nodes, "
        f"{len(g.edges)} edges -> {args.output}"
    )
    if args.communities or args.gexf:
        communities = graphs.label_propagation(g, seed=config.seed)
        if args.communities:
            if config.output_format == "csv":
                print("node,community")
                for node in sorted(communities, key=lambda n: (n.casefold(), n)):
                    print(f"{node},{communities[node]}")
            else:
                _emit_table(
                    ["node", "community"],
                    [
                        [node, str(communities[node])]
                        for node in sorted(
                            communities, key=lambda n: (n.casefold(), n)
                        )
                    ],
                )
        if args.gexf:
            graphs.export_gexf(g, communities, args.gexf)
            print(f"gexf -> {args.gexf}")
    return 0


def _cmd_stats(args: argparse.Namespace, config: GlobalConfig) -> int:
    tweets, stats = _read_tweets(args.archive)
    print(
        f"{len(tweets)} tweets ({stats.total_lines} lines: {stats.parsed} parsed, "
        f"{stats.skipped_malformed} malformed, {stats.duplicates_dropped} duplicate)"
    )
    if tweets:
        authors = {t.author for t in tweets}
        first = min(t.created_at for t in tweets)
        last = max(t.created_at for t in tweets)
        print(f"{len(authors)} distinct users")
        print(f"span {first.isoformat()} .. {last.isoformat()}")
    return 0


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eventpulse",
        description="Collect keyword-filtered posts and analyze an event archive.",
    )
    parser.add_argument(
        "--credentials",
        metavar="PATH",
        default=None,
        help=f"credentials INI (default {DEFAULT_CREDENTIALS}, env {CONFIG_ENV_VAR})",
    )
    parser.add_argument("--data-dir", metavar="DIR", default=DEFAULT_DATA_DIR)
    parser.add_argument("--format", choices=("table", "csv"), default="table")
    parser.add_argument("--tz", type=int, default=0, metavar="MINUTES")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)

    commands = parser.add_subparsers(dest="command", required=True)

    collect = commands.add_parser("collect", help="record matching posts to archives")
    collect.add_argument("mode", choices=("stream", "search-recent", "search-popular"))
    collect.add_argument("event_name")
    collect.add_argument("terms", nargs="+", metavar="term")
    collect.add_argument(
        "--endpoint",
        metavar="URL",
        default=None,
        help="tcp://HOST:PORT or a line-delimited file to replay",
    )
    collect.set_defaults(func=_cmd_collect)

    hist = commands.add_parser("histogram", help="tweets per hour or day")
    hist.add_argument("archive")
    hist.add_argument("output")
    hist.add_argument("--granularity", choices=analytics.GRANULARITIES, default="hour")
    # separate dest: a subparser default would clobber the root --tz value
    hist.add_argument(
        "--tz", type=int, default=None, metavar="MINUTES", dest="histogram_tz"
    )
    hist.set_defaults(func=_cmd_histogram)

    tweets_cmd = commands.add_parser("top-tweets", help="most retweeted tweets")
    tweets_cmd.add_argument("-f", "--file", required=True)
    tweets_cmd.add_argument("-k", type=int, default=10)
    tweets_cmd.add_argument(
        "--count-source", choices=analytics.COUNT_SOURCES, default="observed"
    )
    tweets_cmd.set_defaults(func=_cmd_top_tweets)

    users_cmd = commands.add_parser("top-users", help="most active or most retweeted users")
    users_cmd.add_argument("-f", "--file", required=True)
    users_cmd.add_argument("-k", type=int, default=10)
    users_cmd.add_argument("--by", choices=("activity", "retweets"), default="activity")
    users_cmd.set_defaults(func=_cmd_top_users)

    coords = commands.add_parser("coordinates", help="geotagged tweets as CSV")
    coords.add_argument("archive")
    coords.add_argument("output")
    coords.set_defaults(func=_cmd_coordinates)

    inter = commands.add_parser("interactions", help="interaction graph exports")
    inter.add_argument("archive")
    inter.add_argument("output")
    inter.add_argument("--merge-kinds", action="store_true")
    inter.add_argument("--top", type=int, default=None, metavar="N")
    inter.add_argument("--communities", action="store_true")
    inter.add_argument("--gexf", metavar="PATH", default=None)
    inter.set_defaults(func=_cmd_interactions)

    stats_cmd = commands.add_parser("stats", help="archive parse and corpus summary")
    stats_cmd.add_argument("archive")
    stats_cmd.set_defaults(func=_cmd_stats)

    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _config_from_args(args)
        return args.func(args, config)
    except (ParseError, ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
