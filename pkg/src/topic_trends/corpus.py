"""Raw record ingestion, study-window bucketing and per-week sampling."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import ConfigError, IngestError, OutOfWindowError

FIELDS = ("id", "created_at", "text", "lang", "is_retweet")
RETWEET_MARKER = "RT @"
DEFAULT_SAMPLE_PER_WEEK = 150_000
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class TweetRecord:
    id: str
    created_at: datetime
    text: str
    lang: str = "en"
    is_retweet: bool = False

    def to_json(self) -> str:
        stamp = self.created_at.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")
        return json.dumps(
            {
                "id": self.id,
                "created_at": stamp,
                "text": self.text,
                "lang": self.lang,
                "is_retweet": self.is_retweet,
            },
            ensure_ascii=False,
        )


@dataclass(frozen=True)
class StudyWindow:
    """Inclusive UTC date range cut into 7-day buckets anchored at ``start``."""

    start: date
    end: date

    def __post_init__(self):
        if self.end < self.start:
            raise ConfigError(f"window end {self.end} precedes start {self.start}")

    @property
    def week_count(self) -> int:
        return math.ceil(((self.end - self.start).days + 1) / 7)

    @classmethod
    def parse(cls, spec: str) -> "StudyWindow":
        """Parse ``YYYY-MM-DD:YYYY-MM-DD``."""
        try:
            start, end = spec.split(":")
            return cls(date.fromisoformat(start.strip()), date.fromisoformat(end.strip()))
        except ValueError as exc:
            raise ConfigError(f"bad window {spec!r}; expected START:END dates") from exc

    def __str__(self) -> str:
        return f"{self.start.isoformat()}:{self.end.isoformat()}"


DEFAULT_WINDOW = StudyWindow(date(2020, 3, 23), date(2020, 6, 23))


@dataclass
class IngestReport:
    """Running tally of what happened to every input line."""

    lines_read: int = 0
    malformed: int = 0
    diagnostics: list[tuple[int, str]] = field(default_factory=list)
    dropped: Counter = field(default_factory=Counter)
    kept: int = 0

    def reject(self, lineno: int, reason: str, malformed: bool = True):
        if malformed:
            self.malformed += 1
        self.diagnostics.append((lineno, reason))

    def render(self) -> str:
        lines = [
            f"lines_read\t{self.lines_read}",
            f"malformed\t{self.malformed}",
        ]
        for reason in sorted(self.dropped):
            lines.append(f"dropped_{reason}\t{self.dropped[reason]}")
        lines.append(f"kept\t{self.kept}")
        for lineno, reason in self.diagnostics:
            lines.append(f"line {lineno}: {reason}")
        return "\n".join(lines) + "\n"


def parse_timestamp(value: str) -> datetime:
    """ISO-8601 with a mandatory UTC offset, normalized to UTC."""
    if not isinstance(value, str) or not value:
        raise ValueError("created_at missing")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    stamp = datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        raise ValueError(f"created_at {value!r} has no UTC offset")
    return stamp.astimezone(timezone.utc)


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if value is None:
        return False
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ("", "false", "0", "no"):
            return False
        if lowered in ("true", "1", "yes"):
            return True
    raise ValueError(f"is_retweet {value!r} is not a boolean")


def record_from_mapping(row: dict) -> TweetRecord:
    """Build a record from a decoded JSON object or CSV row; raises ValueError."""
    if not isinstance(row, dict):
        raise ValueError("line is not a JSON object")
    rid = row.get("id")
    if isinstance(rid, int) and not isinstance(rid, bool):
        rid = str(rid)
    if not isinstance(rid, str) or not rid.strip():
        raise ValueError("id missing or empty")
    if "created_at" not in row or row["created_at"] in (None, ""):
        raise ValueError("created_at missing")
    created = parse_timestamp(row["created_at"])
    text = row.get("text")
    if not isinstance(text, str):
        raise ValueError("text missing or not a string")
    lang = row.get("lang")
    if lang in (None, ""):
        lang = "en"
    if not isinstance(lang, str):
        raise ValueError("lang is not a string")
    return TweetRecord(rid, created, text, lang, _parse_bool(row.get("is_retweet")))


def _jsonl_rows(fh) -> Iterator[tuple[int, object]]:
    for lineno, line in enumerate(fh, 1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            yield lineno, ValueError(f"invalid JSON ({exc.msg})")


def _csv_rows(fh) -> Iterator[tuple[int, object]]:
    reader = csv.DictReader(fh)
    if reader.fieldnames is None:
        return
    missing = [name for name in ("id", "created_at", "text") if name not in reader.fieldnames]
    if missing:
        raise IngestError(f"CSV header lacks required columns: {', '.join(missing)}")
    for row in reader:
        if None in row:
            yield reader.line_num, ValueError("row has more fields than the header")
        else:
            yield reader.line_num, row


def load_records(path, fmt: str = "jsonl", report: IngestReport | None = None) -> Iterator[TweetRecord]:
    """Stream records in file order.

    Malformed lines and duplicate ids are skipped and noted in ``report``.
    Raises IngestError when the file cannot be read or when more than half of
    the lines are malformed, which usually means the wrong ``fmt``.
    """
    if fmt not in ("jsonl", "csv"):
        raise ConfigError(f"unknown input format {fmt!r}")
    report = report if report is not None else IngestReport()
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc.strerror}") from exc
    seen: set[str] = set()
    with fh:
        rows = _jsonl_rows(fh) if fmt == "jsonl" else _csv_rows(fh)
        try:
            for lineno, row in rows:
                report.lines_read += 1
                if isinstance(row, Exception):
                    report.reject(lineno, str(row))
                    continue
                try:
                    record = record_from_mapping(row)
                except ValueError as exc:
                    report.reject(lineno, str(exc))
                    continue
                if record.id in seen:
                    report.reject(lineno, f"duplicate id {record.id}", malformed=False)
                    report.dropped["duplicate_id"] += 1
                    continue
                seen.add(record.id)
                yield record
        except UnicodeDecodeError as exc:
            raise IngestError(f"{path} is not valid UTF-8: {exc.reason}") from exc
    if report.malformed * 2 > report.lines_read:
        raise IngestError(
            f"{report.malformed} of {report.lines_read} lines in {path} are malformed; "
            f"is the format really {fmt}?\n" + report.render()
        )


def week_index(t: datetime, w: StudyWindow) -> int:
    day = t.astimezone(timezone.utc).date() if t.tzinfo else t.date()
    if not w.start <= day <= w.end:
        raise OutOfWindowError(f"{t.isoformat()} lies outside {w}")
    return 1 + (day - w.start).days // 7


def in_window(t: datetime, w: StudyWindow) -> bool:
    return w.start <= t.astimezone(timezone.utc).date() <= w.end


def filter_window(records: Iterable[TweetRecord], w: StudyWindow, report: IngestReport | None = None):
    for r in records:
        if in_window(r.created_at, w):
            yield r
        elif report is not None:
            report.dropped["out_of_window"] += 1


def filter_language(records: Iterable[TweetRecord], prefix: str = "en", report: IngestReport | None = None):
    for r in records:
        if r.lang.lower().startswith(prefix):
            yield r
        elif report is not None:
            report.dropped["non_english"] += 1


def is_retweet(record: TweetRecord) -> bool:
    return record.is_retweet or record.text.lstrip().startswith(RETWEET_MARKER)


def drop_retweets(records: Iterable[TweetRecord], report: IngestReport | None = None) -> list[TweetRecord]:
    kept = []
    for r in records:
        if is_retweet(r):
            if report is not None:
                report.dropped["retweet"] += 1
        else:
            kept.append(r)
    return kept


def _sort_key(r: TweetRecord):
    return (r.created_at, r.id)


def week_rng(seed: int, week: int) -> np.random.Generator:
    """PCG64 stream for one week bucket, seeded with ``seed XOR week``."""
    return np.random.Generator(np.random.PCG64((seed ^ week) & _SEED_MASK))


def sample_weekly(records: Iterable[TweetRecord], w: StudyWindow, n_per_week: int, seed: int) -> list[TweetRecord]:
    """Uniformly subsample each week bucket down to ``n_per_week`` records.

    Each bucket draws from its own generator, so adding weeks never changes
    the selection made for earlier ones.
    """
    if n_per_week < 1:
        raise ConfigError("n_per_week must be positive")
    buckets: dict[int, list[TweetRecord]] = defaultdict(list)
    for r in records:
        buckets[week_index(r.created_at, w)].append(r)
    out = []
    for week in sorted(buckets):
        bucket = sorted(buckets[week], key=_sort_key)
        if len(bucket) > n_per_week:
            chosen = week_rng(seed, week).choice(len(bucket), size=n_per_week, replace=False)
            bucket = [bucket[i] for i in sorted(chosen.tolist())]
        out.extend(bucket)
    return out


def write_records(path, records: Iterable[TweetRecord]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")
            n += 1
    return n


def ingest(
    path,
    window: StudyWindow = DEFAULT_WINDOW,
    n_per_week: int = DEFAULT_SAMPLE_PER_WEEK,
    seed: int = 0,
    fmt: str = "jsonl",
    english_only: bool = True,
    report: IngestReport | None = None,
) -> tuple[list[TweetRecord], IngestReport]:
    """Load, filter to window and language, drop retweets, then sample per week."""
    report = report if report is not None else IngestReport()
    stream: Iterable[TweetRecord] = load_records(path, fmt, report)
    stream = filter_window(stream, window, report)
    if english_only:
        stream = filter_language(stream, "en", report)
    survivors = drop_retweets(stream, report)
    sampled = sample_weekly(survivors, window, n_per_week, seed)
    report.dropped["sampled_out"] += len(survivors) - len(sampled)
    report.kept = len(sampled)
    return sampled, report


def read_sampled(path) -> list[TweetRecord]:
    """Read a records file written by :func:`write_records` (no filtering)."""
    path = Path(path)
    report = IngestReport()
    records = list(load_records(path, "jsonl", report))
    if report.diagnostics:
        line, reason = report.diagnostics[0]
        raise IngestError(f"{path}:{line}: {reason}")
    return records
