"""Tokenization, filtering, stemming and the bag-of-words vocabulary."""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import StudyWindow, TweetRecord, week_index
from .errors import ConfigError, DataError
from .porter import stem

__all__ = [
    "Document",
    "TextPipeline",
    "Vocabulary",
    "build_vocabulary",
    "read_term_file",
    "remove_domain_terms",
    "remove_stopwords",
    "stem",
    "tfidf_vector",
    "tfidf_weight",
    "to_document",
    "tokenize",
]


def _strip_edges(token: str) -> str:
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def _is_url(token: str) -> bool:
    return "://" in token or token.startswith(("t.co/", "www."))


def tokenize(text: str) -> list[str]:
    """Lowercase, drop links and @-mentions, keep hashtag bodies, trim edge punctuation."""
    tokens = []
    for raw in text.lower().split():
        if raw.startswith("@") or _is_url(raw):
            continue
        for piece in raw.split("#"):
            piece = _strip_edges(piece)
            if not piece or "@" in piece or piece.startswith("http"):
                continue
            tokens.append(piece)
    return tokens


def remove_stopwords(tokens: Sequence[str], stoplist: set[str] | frozenset[str]) -> list[str]:
    return [t for t in tokens if t not in stoplist]


def remove_domain_terms(tokens: Sequence[str], domain_terms: set[str] | frozenset[str]) -> list[str]:
    return [t for t in tokens if t not in domain_terms]


def read_term_file(path) -> frozenset[str]:
    """One lowercase term per line; blank lines and '#' comments ignored."""
    terms = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                terms.add(line.lower())
    return frozenset(terms)


def _bundled(name: str) -> Path:
    return Path(str(resources.files("topic_trends") / "data" / name))


DEFAULT_STOPLIST_PATH = _bundled("stopwords_en.txt")
DEFAULT_DOMAIN_TERMS_PATH = _bundled("domain_terms.txt")
DEFAULT_STOPLIST = read_term_file(DEFAULT_STOPLIST_PATH)
DEFAULT_DOMAIN_TERMS = read_term_file(DEFAULT_DOMAIN_TERMS_PATH)


@dataclass(frozen=True)
class TextPipeline:
    """tokenize -> stopwords -> domain terms -> lemma lookup -> stem.

    ``lemmas`` is an optional surface->lemma table applied before stemming;
    empty by default.
    """

    stoplist: frozenset[str] = DEFAULT_STOPLIST
    domain_terms: frozenset[str] = DEFAULT_DOMAIN_TERMS
    lemmas: Mapping[str, str] = field(default_factory=dict)

    def __call__(self, text: str) -> list[str]:
        tokens = remove_stopwords(tokenize(text), self.stoplist)
        tokens = remove_domain_terms(tokens, self.domain_terms)
        if self.lemmas:
            tokens = [self.lemmas.get(t, t) for t in tokens]
        return [stem(t) for t in tokens]

    def map(self, texts: Sequence[str], workers: int = 1) -> list[list[str]]:
        if workers <= 1 or len(texts) < 1000:
            return [self(t) for t in texts]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self, texts, chunksize=max(1, len(texts) // (workers * 4))))


def tfidf_weight(tf: float, df: int, n_docs: int) -> float:
    """tf * ln(N / df), unsmoothed."""
    if tf == 0 or df == n_docs:
        return 0.0
    return tf * math.log(n_docs / df)


@dataclass
class Vocabulary:
    terms: list[str]
    doc_freq: list[int]
    n_docs: int
    term_to_id: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.term_to_id = {t: i for i, t in enumerate(self.terms)}
        if len(self.term_to_id) != len(self.terms):
            raise DataError("vocabulary contains duplicate terms")

    def __len__(self) -> int:
        return len(self.terms)

    def idf(self, term_id: int) -> float:
        return math.log(self.n_docs / self.doc_freq[term_id])

    def digest(self) -> str:
        h = hashlib.sha256()
        for t in self.terms:
            h.update(t.encode("utf-8") + b"\n")
        return h.hexdigest()

    def write_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# n_docs={self.n_docs}\n")
            fh.write("term\tid\tdf\tidf\n")
            for i, t in enumerate(self.terms):
                fh.write(f"{t}\t{i}\t{self.doc_freq[i]}\t{self.idf(i)!r}\n")

    @classmethod
    def read_tsv(cls, path) -> "Vocabulary":
        terms, dfs, n_docs = [], [], None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if line.startswith("# n_docs="):
                    n_docs = int(line.split("=", 1)[1])
                    continue
                if not line or line.startswith("#") or line.startswith("term\t"):
                    continue
                parts = line.split("\t")
                if len(parts) != 4 or int(parts[1]) != len(terms):
                    raise DataError(f"{path}:{lineno}: malformed vocabulary row")
                terms.append(parts[0])
                dfs.append(int(parts[2]))
        if n_docs is None:
            raise DataError(f"{path}: missing '# n_docs=' header")
        return cls(terms, dfs, n_docs)


def build_vocabulary(docs: Iterable[Sequence[str]], min_df: int = 5, max_df_ratio: float = 0.5) -> Vocabulary:
    """Keep terms with df >= min_df and df/N <= max_df_ratio.

    Ids run in descending df, ties broken lexicographically.
    """
    df: Counter = Counter()
    n_docs = 0
    for tokens in docs:
        n_docs += 1
        df.update(set(tokens))
    kept = [(t, c) for t, c in df.items() if c >= min_df and c / n_docs <= max_df_ratio]
    if not kept:
        raise ConfigError(
            f"vocabulary is empty after pruning (min_df={min_df}, max_df_ratio={max_df_ratio}, N={n_docs})"
        )
    kept.sort(key=lambda tc: (-tc[1], tc[0]))
    return Vocabulary([t for t, _ in kept], [c for _, c in kept], n_docs)


@dataclass(frozen=True)
class Document:
    source_id: str
    week: int
    counts: tuple[tuple[int, int], ...]
    countries: frozenset[str] = frozenset()

    @property
    def length(self) -> int:
        return sum(c for _, c in self.counts)

    def token_ids(self) -> list[int]:
        """Expanded token sequence, term ids ascending."""
        return [w for w, c in self.counts for _ in range(c)]

    def to_json(self) -> str:
        return json.dumps(
            {
                "id": self.source_id,
                "week": self.week,
                "counts": [list(p) for p in self.counts],
                "countries": sorted(self.countries),
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "Document":
        obj = json.loads(line)
        return cls(
            obj["id"],
            int(obj["week"]),
            tuple((int(w), int(c)) for w, c in obj["counts"]),
            frozenset(obj.get("countries", ())),
        )


def document_from_stems(source_id: str, week: int, stems: Sequence[str], vocab: Vocabulary, stats: Counter | None = None):
    ids = Counter()
    for s in stems:
        i = vocab.term_to_id.get(s)
        if i is None:
            if stats is not None:
                stats["oov_tokens"] += 1
        else:
            ids[i] += 1
    if not ids:
        if stats is not None:
            stats["empty_documents"] += 1
        return None
    return Document(source_id, week, tuple(sorted(ids.items())))


def to_document(
    record: TweetRecord,
    vocab: Vocabulary,
    w: StudyWindow,
    pipeline: TextPipeline | None = None,
    stats: Counter | None = None,
) -> Document | None:
    """Full text pipeline for one record; ``None`` when nothing survives."""
    pipeline = pipeline or TextPipeline()
    return document_from_stems(record.id, week_index(record.created_at, w), pipeline(record.text), vocab, stats)


def tfidf_vector(doc: Document, vocab: Vocabulary) -> dict[int, float]:
    return {w: tfidf_weight(c, vocab.doc_freq[w], vocab.n_docs) for w, c in doc.counts}


def write_documents(path, docs: Iterable[Document], vocab_hash: str) -> None:
    docs = list(docs)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"vocab_hash": vocab_hash, "n_docs": len(docs)}) + "\n")
        for d in docs:
            fh.write(d.to_json() + "\n")


def read_documents(path) -> tuple[list[Document], str]:
    with open(path, encoding="utf-8") as fh:
        try:
            header = json.loads(fh.readline())
            vocab_hash = header["vocab_hash"]
            docs = [Document.from_json(line) for line in fh if line.strip()]
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"{path}: not a documents file ({exc})") from exc
    if len(docs) != header.get("n_docs", len(docs)):
        raise DataError(f"{path}: truncated (expected {header['n_docs']} documents, found {len(docs)})")
    return docs, vocab_hash
