"""Synthetic corpora with known structure, for testing and demos.

``lda_corpus`` samples directly from the LDA generative model.
``tweet_corpus`` writes tweet-like raw records whose themes drift week to
week and whose place mentions and flags cover the four target countries.
"""

from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone

import numpy as np

from .corpus import DEFAULT_WINDOW, StudyWindow
from .textprep import _bundled

BUNDLED_CORPUS_PATH = _bundled("synthetic_corpus.jsonl")
BUNDLED_CASES_PATH = _bundled("synthetic_cases.csv")


def lda_corpus(n_docs=2000, doc_len=50, n_topics=5, vocab_size=100, alpha=0.1, topic_concentration=0.1, seed=0):
    """Documents (lists of term ids) plus the true phi and theta."""
    rng = np.random.Generator(np.random.PCG64(seed))
    phi = rng.dirichlet(np.full(vocab_size, topic_concentration), size=n_topics)
    theta = rng.dirichlet(np.full(n_topics, alpha), size=n_docs)
    docs = []
    for d in range(n_docs):
        z = rng.choice(n_topics, size=doc_len, p=theta[d])
        docs.append([int(rng.choice(vocab_size, p=phi[k])) for k in z])
    return docs, phi, theta


THEMES = {
    "telecommuting": "work working works home lockdown remote office zoom meeting meetings laptop commute "
    "workplace employees online video calls desk schedule productivity",
    "death_cases": "cases deaths death died reported report total number toll confirmed dying hospital "
    "record daily count fatalities lives victims rising",
    "protests": "protest protesters protests racist racism black leader leaders rights police justice "
    "streets crowd demonstrators riot equality activists chanting marching",
    "second_wave": "second wave waves surge surging warns warning prepare prepared preparing experts "
    "resurgence autumn winter return round flare ready fears cautious",
    "reopening": "reopen reopening reopened safe safely rules increase recovery restaurants gyms "
    "businesses shops economy phase plan guidelines customers salons retail malls",
    "anger": "shit stupid sick damn idiots angry hate tired mad partying ridiculous selfish morons "
    "rage furious sucks worst crazy annoyed rally",
    "masking": "mask masks masking hand hands face faces wash washing sanitizer gloves covering wear "
    "wearing protect protecting shield sanitize soap",
    "peak": "peak peaking spike spiking scientists scientist curve flatten flattening model models "
    "projections exponential growth hotspot outbreak predicted infections climbing trajectory",
    "medication": "drug drugs dexamethasone hydroxychloroquine treatment treatments vaccine trial trials "
    "cure remdesivir patients doctors effective medicine tested approval study save saves",
    "social_distance": "social distancing distance distanced keep keeping feet apart space gatherings "
    "crowds isolate isolation quarantine avoid spacing separate groups limit contact",
}
THEME_NAMES = list(THEMES)

BACKGROUND = (
    "people today time need day week going really good think know world life family friends news "
    "help love got right little long sure thing things let make stay things look"
).split()

FILLER = "the and is to we a of it this that be are so just all our for with on".split()
DOMAIN = ["corona", "#COVID19", "covid", "coronavirus", "virus", "#coronavirus", "pandemic", "Covid-19"]

PLACES = {
    "US": ["New York", "NYC", "the US", "Texas", "California", "Florida", "Chicago", "Seattle", "USA", "America"],
    "GB": ["the UK", "England", "Scotland", "Glasgow", "Liverpool", "Leeds", "Britain", "Bristol", "Edinburgh"],
    "CN": ["China", "Wuhan", "Beijing", "Shanghai", "Hong Kong", "Guangzhou", "Shenzhen", "Chinese"],
    "CA": ["Canada", "Toronto", "Montreal", "Ontario", "Quebec", "Calgary", "BC", "Ottawa"],
}
FLAGS = {"US": "\U0001F1FA\U0001F1F8", "GB": "\U0001F1EC\U0001F1E7", "CN": "\U0001F1E8\U0001F1F3", "CA": "\U0001F1E8\U0001F1E6"}
FOREIGN_FLAG = "\U0001F1EB\U0001F1F7"

# relative share of each theme, ordered as THEME_NAMES
_BASE = np.array([1.6, 1.9, 1.4, 0.6, 2.2, 1.2, 1.0, 0.9, 0.8, 1.1])
# per-theme weekly drift: (start multiplier, end multiplier, optional bump week)
_DRIFT = {
    "telecommuting": (1.6, 0.6, None),
    "death_cases": (0.8, 1.2, 5),
    "protests": (0.4, 0.8, 11),
    "second_wave": (0.3, 2.2, None),
    "reopening": (0.4, 2.0, None),
    "anger": (1.0, 1.0, 3),
    "masking": (0.9, 1.4, None),
    "peak": (1.5, 0.7, 3),
    "medication": (0.7, 0.9, 13),
    "social_distance": (1.7, 0.5, None),
}
_COUNTRY_BIAS = {
    "US": {"protests": 1.8, "reopening": 1.4},
    "GB": {"masking": 1.8, "medication": 1.6},
    "CN": {"protests": 2.5, "peak": 1.8},
    "CA": {"second_wave": 2.0, "anger": 1.5},
}


def theme_weights(week: int, n_weeks: int, country: str | None = None) -> np.ndarray:
    frac = (week - 1) / max(1, n_weeks - 1)
    w = _BASE.copy()
    for i, name in enumerate(THEME_NAMES):
        start, end, bump = _DRIFT[name]
        w[i] *= start + (end - start) * frac
        if bump is not None:
            w[i] *= 1.0 + 1.5 * np.exp(-0.5 * (week - bump) ** 2)
        if country:
            w[i] *= _COUNTRY_BIAS[country].get(name, 1.0)
    return w / w.sum()


def _tweet_text(rng, theme_mix, country_mentions, flag_codes, foreign_flag):
    words = []
    for _ in range(int(rng.integers(6, 11))):
        if rng.random() < 0.12:
            words.append(BACKGROUND[rng.integers(len(BACKGROUND))])
        else:
            vocab = THEMES[THEME_NAMES[rng.choice(len(THEME_NAMES), p=theme_mix)]].split()
            words.append(vocab[rng.integers(len(vocab))])
    out = []
    for w in words:
        if rng.random() < 0.45:
            out.append(FILLER[rng.integers(len(FILLER))])
        out.append(w)
    if rng.random() < 0.25:
        i = int(rng.integers(len(out)))
        out[i] = "#" + out[i]
    for cc in country_mentions:
        out.insert(int(rng.integers(len(out) + 1)), "in " + PLACES[cc][rng.integers(len(PLACES[cc]))])
    if rng.random() < 0.6:
        out.insert(int(rng.integers(len(out) + 1)), DOMAIN[rng.integers(len(DOMAIN))])
    if rng.random() < 0.15:
        out.insert(0, f"@user{int(rng.integers(10_000))}")
    text = " ".join(out)
    text = text[0].upper() + text[1:]
    text += rng.choice(["", "!", ".", "...", " ?"])
    if rng.random() < 0.3:
        text += f" https://t.co/{int(rng.integers(16**8)):08x}"
    for cc in flag_codes:
        text += " " + FLAGS[cc]
    if foreign_flag:
        text += " " + FOREIGN_FLAG
    return text


def tweet_corpus(n: int = 5000, seed: int = 2020, window: StudyWindow = DEFAULT_WINDOW) -> list[dict]:
    """Raw tweet-like records (dicts in the JSONL input schema)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    start = datetime(window.start.year, window.start.month, window.start.day, tzinfo=timezone.utc)
    span = ((window.end - window.start).days + 1) * 86400
    countries = list(PLACES)
    records = []
    for i in range(n):
        r = rng.random()
        if r < 0.02:
            offset = -int(rng.integers(1, 20 * 86400))
        elif r < 0.03:
            offset = span + int(rng.integers(1, 20 * 86400))
        else:
            offset = int(rng.integers(span))
        created = start + timedelta(seconds=offset)
        week = 1 + max(0, min(offset, span - 1)) // (7 * 86400)

        mentions, flags = [], []
        u = rng.random()
        if u < 0.45:
            mentions = [countries[rng.choice(4, p=[0.45, 0.2, 0.17, 0.18])]]
        elif u < 0.50:
            mentions = sorted(rng.choice(countries, size=2, replace=False).tolist())
        if rng.random() < 0.08:
            flags = [countries[rng.integers(4)]]
        home = (mentions or flags or [None])[0]
        mix = theme_weights(week, window.week_count, home)
        main = rng.choice(len(THEME_NAMES), p=mix)
        theme_mix = np.full(len(THEME_NAMES), 0.1 / (len(THEME_NAMES) - 1))
        theme_mix[main] = 0.9
        text = _tweet_text(rng, theme_mix, mentions, flags, rng.random() < 0.02)

        is_rt = False
        v = rng.random()
        if v < 0.04:
            is_rt = True
        elif v < 0.06:
            text = f"RT @user{int(rng.integers(10_000))}: " + text
        lang = "en" if rng.random() < 0.97 else str(rng.choice(["es", "fr", "und"]))
        rid = f"t{i:06d}"
        if i > 10 and rng.random() < 0.004:
            rid = records[int(rng.integers(len(records)))]["id"]
        records.append(
            {
                "id": rid,
                "created_at": created.isoformat().replace("+00:00", "Z"),
                "text": text,
                "lang": lang,
                "is_retweet": is_rt,
            }
        )
    return records


def write_jsonl(records: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")


def case_counts(window: StudyWindow = DEFAULT_WINDOW, seed: int = 7) -> list[tuple[str, str, int]]:
    """Daily synthetic confirmed-case rows (date, region, confirmed) for WORLD and each country."""
    rng = np.random.Generator(np.random.PCG64(seed))
    days = (window.end - window.start).days + 1
    rows = []
    scale = {"WORLD": 90_000, "US": 25_000, "GB": 4_000, "CN": 300, "CA": 1_500}
    shape = {"WORLD": 1.0, "US": 0.9, "GB": -0.8, "CN": -1.5, "CA": -0.5}
    for region, base in scale.items():
        for d in range(days):
            t = d / (days - 1)
            level = base * np.exp(shape[region] * (t - 0.5))
            value = int(max(0, rng.normal(level, 0.05 * level)))
            rows.append(((window.start + timedelta(days=d)).isoformat(), region, value))
    return rows


def write_case_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("date,region,confirmed\n")
        for date_s, region, value in rows:
            fh.write(f"{date_s},{region},{value}\n")
