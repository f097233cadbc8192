"""Weekly topic counts, per-country series and their report formats."""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import StudyWindow, parse_timestamp, week_index
from .errors import DataError, ModelMismatchError, OutOfWindowError
from .lda import LdaModel, dominant_topics, top_words

log = logging.getLogger(__name__)


@dataclass
class TrendTable:
    """Dominant-topic document counts.

    A document tagged with several countries is counted once in each of
    their series, so country sums may exceed the global counts.
    """

    n_weeks: int
    n_topics: int
    global_counts: Counter = field(default_factory=Counter)  # (week, topic)
    country_counts: Counter = field(default_factory=Counter)  # (country, week, topic)
    topic_totals: Counter = field(default_factory=Counter)  # topic

    def add(self, week: int, topic: int, countries: Iterable[str] = ()) -> None:
        self.global_counts[(week, topic)] += 1
        self.topic_totals[topic] += 1
        for c in countries:
            self.country_counts[(c, week, topic)] += 1

    def merge(self, other: "TrendTable") -> "TrendTable":
        out = TrendTable(max(self.n_weeks, other.n_weeks), max(self.n_topics, other.n_topics))
        for t in (self, other):
            out.global_counts.update(t.global_counts)
            out.country_counts.update(t.country_counts)
            out.topic_totals.update(t.topic_totals)
        return out

    def countries(self) -> list[str]:
        return sorted({c for c, _, _ in self.country_counts})

    def topics_present(self) -> list[int]:
        return sorted(t for t, n in self.topic_totals.items() if n > 0)

    def weekly_series(self, topic: int, country: str | None = None) -> list[int]:
        if country is None:
            return [self.global_counts.get((w, topic), 0) for w in range(1, self.n_weeks + 1)]
        return [self.country_counts.get((country, w, topic), 0) for w in range(1, self.n_weeks + 1)]


def build_trends(docs: Sequence, model: LdaModel, n_weeks: int, docs_vocab_hash: str | None = None) -> TrendTable:
    """Count each document once under its week and dominant topic."""
    if docs_vocab_hash is not None and model.vocab_hash and docs_vocab_hash != model.vocab_hash:
        raise ModelMismatchError("documents and model were built from different vocabularies")
    table = TrendTable(n_weeks, model.K)
    if not docs:
        return table
    if len(docs) != model.theta.shape[0]:
        raise ModelMismatchError(f"model covers {model.theta.shape[0]} documents, got {len(docs)}")
    for doc, topic in zip(docs, dominant_topics(model).tolist()):
        if not 1 <= doc.week <= n_weeks:
            raise OutOfWindowError(f"document {doc.source_id} has week {doc.week} outside 1..{n_weeks}")
        table.add(doc.week, topic, sorted(doc.countries))
    return table


def top_n_topics(table: TrendTable, country: str, n: int = 4) -> list[int]:
    """Topics ranked by total count in ``country``; ties go to the lower id."""
    if n < 1:
        raise ValueError("n must be >= 1")
    totals: Counter = Counter()
    for (c, _, topic), count in table.country_counts.items():
        if c == country:
            totals[topic] += count
    if not totals:
        log.warning("no documents tagged with country %s", country)
        return []
    return sorted(totals, key=lambda t: (-totals[t], t))[:n]


def load_case_counts(path, window: StudyWindow, region: str = "WORLD") -> dict[int, int]:
    """Sum daily confirmed counts per week for one region; weeks without rows stay absent."""
    weeks: dict[int, int] = defaultdict(int)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"date", "region", "confirmed"} - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing columns {', '.join(sorted(missing))}")
        for row in reader:
            if row["region"].strip().upper() != region.upper():
                continue
            try:
                day = row["date"].strip()
                stamp = parse_timestamp(day if "T" in day else day + "T00:00:00Z")
                confirmed = int(row["confirmed"])
            except ValueError as exc:
                raise DataError(f"{path}:{reader.line_num}: {exc}") from exc
            if confirmed < 0:
                raise DataError(f"{path}:{reader.line_num}: negative confirmed count")
            try:
                weeks[week_index(stamp, window)] += confirmed
            except OutOfWindowError:
                continue
    return dict(weeks)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Sample correlation; ``None`` when either series is constant or too short."""
    if len(xs) < 2:
        return None
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt(float(dx @ dx)), math.sqrt(float(dy @ dy))
    if sx == 0 or sy == 0:
        return None
    return float(dx @ dy) / (sx * sy)


def join_case_counts(table: TrendTable, cases: dict[int, int], country: str | None = None) -> list[tuple]:
    """Rows of (week, topic, tweet_count, case_count or None, correlation or None).

    The correlation is computed per topic over the weeks that have a case
    count and repeats on every row of that topic.
    """
    rows = []
    weeks_with_cases = sorted(w for w in cases if 1 <= w <= table.n_weeks)
    for topic in table.topics_present():
        series = table.weekly_series(topic, country)
        r = pearson([series[w - 1] for w in weeks_with_cases], [cases[w] for w in weeks_with_cases])
        for w in range(1, table.n_weeks + 1):
            rows.append((w, topic, series[w - 1], cases.get(w), r))
    return rows


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def write_case_join(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("week,topic_id,tweet_count,case_count,correlation\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_topics_csv(model: LdaModel, path, n_terms: int = 10) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("topic_id,rank,term,phi_weight\n")
        for k in range(model.K):
            for rank, (term, weight) in enumerate(top_words(model, k, n_terms), 1):
                fh.write(f"{k},{rank},{term},{weight:.8f}\n")


def _write_csvs(table: TrendTable, out: Path) -> list[Path]:
    topics = table.topics_present()
    paths = [out / "trends.csv", out / "trends_country.csv", out / "topic_totals.csv"]
    with open(paths[0], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("week,topic_id,count\n")
        for w in range(1, table.n_weeks + 1):
            for t in topics:
                fh.write(f"{w},{t},{table.global_counts.get((w, t), 0)}\n")
    with open(paths[1], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("country,week,topic_id,count\n")
        for c in table.countries():
            present = sorted({t for (cc, _, t), n in table.country_counts.items() if cc == c and n})
            for w in range(1, table.n_weeks + 1):
                for t in present:
                    fh.write(f"{c},{w},{t},{table.country_counts.get((c, w, t), 0)}\n")
    with open(paths[2], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("topic_id,total\n")
        for t in range(table.n_topics):
            fh.write(f"{t},{table.topic_totals.get(t, 0)}\n")
    return paths


def _write_gnuplot(table: TrendTable, out: Path) -> list[Path]:
    path = out / "trends.dat"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# one block per topic; columns: week count\n")
        for i, t in enumerate(table.topics_present()):
            if i:
                fh.write("\n\n")
            fh.write(f"# topic {t}\n")
            for w, n in enumerate(table.weekly_series(t), 1):
                fh.write(f"{w} {n}\n")
    return [path]


_PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def render_svg(series: dict[int, list[int]], title: str, width: int = 720, height: int = 400) -> str:
    """Static line chart: one polyline per topic, weeks on x, counts on y."""
    left, right, top, bottom = 60, 120, 40, 50
    pw, ph = width - left - right, height - top - bottom
    n_weeks = max((len(s) for s in series.values()), default=1)
    ymax = max((max(s) for s in series.values() if s), default=0) or 1
    sx = pw / max(1, n_weeks - 1)

    def xy(i, v):
        return f"{left + i * sx:.2f},{top + ph - v / ymax * ph:.2f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left + pw / 2:.0f}" y="{height - 10}" text-anchor="middle">week</text>',
        f'<text x="15" y="{top + ph / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 15 {top + ph / 2:.0f})">tweets</text>',
    ]
    for i in range(n_weeks):
        x = left + i * sx
        parts.append(f'<text x="{x:.2f}" y="{top + ph + 15}" text-anchor="middle">{i + 1}</text>')
    for frac in (0.0, 0.5, 1.0):
        y = top + ph - frac * ph
        parts.append(f'<text x="{left - 5}" y="{y:.2f}" text-anchor="end">{round(frac * ymax)}</text>')
    for j, (topic, values) in enumerate(sorted(series.items())):
        color = _PALETTE[j % len(_PALETTE)]
        points = " ".join(xy(i, v) for i, v in enumerate(values))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>')
        ly = top + 12 + 14 * j
        parts.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 25}" y2="{ly - 4}" stroke="{color}"/>')
        parts.append(f'<text x="{left + pw + 30}" y="{ly}">topic {topic}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _write_svgs(table: TrendTable, out: Path, top_n: int = 4) -> list[Path]:
    paths = [out / "trends.svg"]
    series = {t: table.weekly_series(t) for t in table.topics_present()}
    paths[0].write_text(render_svg(series, "Weekly tweets per topic"), encoding="utf-8")
    for c in table.countries():
        path = out / f"trends_{c}.svg"
        series = {t: table.weekly_series(t, c) for t in top_n_topics(table, c, top_n)}
        path.write_text(render_svg(series, f"Top {top_n} topics, {c}"), encoding="utf-8")
        paths.append(path)
    return paths


def export(table: TrendTable, out_dir, formats: Sequence[str] = ("csv",)) -> list[Path]:
    """Write the requested formats into ``out_dir``; returns the files written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc.strerror}") from exc
    writers = {"csv": _write_csvs, "gnuplot_dat": _write_gnuplot, "svg_lines": _write_svgs}
    written = []
    for fmt in formats:
        if fmt not in writers:
            raise ValueError(f"unknown export format {fmt!r}")
        try:
            written.extend(writers[fmt](table, out))
        except OSError as exc:
            raise DataError(f"cannot write {fmt} output in {out}: {exc.strerror}") from exc
    return written
