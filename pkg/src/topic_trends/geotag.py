"""Country tagging by gazetteer lookup and flag emoji."""

from __future__ import annotations

import hashlib
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import GazetteerError

log = logging.getLogger(__name__)

TARGET_COUNTRIES = ("US", "CN", "GB", "CA")
MATCH_MODES = ("case_insensitive", "case_sensitive_exact")
KINDS = ("country", "state", "city", "abbreviation", "alias")

_RI_FIRST = 0x1F1E6
_RI_LAST = 0x1F1FF
_BLACK_FLAG = 0x1F3F4
_TAG_A = 0xE0061
_TAG_Z = 0xE007A
_TAG_CANCEL = 0xE007F


@dataclass(frozen=True)
class GazetteerEntry:
    surface: str
    country: str
    match_mode: str = "case_insensitive"
    kind: str = "city"

    def key(self) -> tuple[str, ...]:
        tokens = tuple(match_tokens(self.surface))
        if self.match_mode == "case_insensitive":
            return tuple(t.lower() for t in tokens)
        return tokens


def _strip_edges(token: str) -> str:
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def match_tokens(text: str) -> list[str]:
    """Case-preserving tokens for place lookup.

    Edge punctuation and emoji are trimmed, a trailing possessive ('s) is
    dropped, and links and @-handles are skipped.
    """
    out = []
    for raw in text.split():
        if raw.startswith("@") or "://" in raw:
            continue
        tok = _strip_edges(raw)
        if tok.endswith(("'s", "’s")) and len(tok) > 2:
            tok = _strip_edges(tok[:-2])
        if tok:
            out.append(tok)
    return out


@dataclass
class Gazetteer:
    entries: list[GazetteerEntry]
    diagnostics: list[str] = field(default_factory=list)
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        # (mode, first token) -> {surface key: countries}
        self._index = {"case_insensitive": defaultdict(dict), "case_sensitive_exact": defaultdict(dict)}
        self._max_len = 1
        for e in self.entries:
            key = e.key()
            if not key:
                continue
            slot = self._index[e.match_mode][key[0]]
            slot.setdefault(key, set()).add(e.country)
            self._max_len = max(self._max_len, len(key))

    def __len__(self) -> int:
        return len(self.entries)

    def counts_by_country(self) -> Counter:
        return Counter(e.country for e in self.entries)

    def digest(self) -> str:
        h = hashlib.sha256()
        for e in self.entries:
            h.update(f"{e.surface}\t{e.country}\t{e.match_mode}\t{e.kind}\n".encode("utf-8"))
        return h.hexdigest()

    def _candidates(self, tokens: Sequence[str], i: int):
        found: dict[int, set[str]] = defaultdict(set)
        for mode, probe in (("case_insensitive", tokens[i].lower()), ("case_sensitive_exact", tokens[i])):
            bucket = self._index[mode].get(probe)
            if not bucket:
                continue
            for key, countries in bucket.items():
                n = len(key)
                window = tokens[i : i + n]
                if mode == "case_insensitive":
                    window = [t.lower() for t in window]
                if len(window) == n and tuple(window) == key:
                    found[n] |= countries
        return found

    def lookup(self, text: str) -> set[str]:
        """Scan left to right; at each position the longest surface wins."""
        tokens = match_tokens(text)
        matched: set[str] = set()
        i = 0
        while i < len(tokens):
            found = self._candidates(tokens, i)
            if found:
                n = max(found)
                matched |= found[n]
                i += n
            else:
                i += 1
        return matched


def _parse_row(parts: list[str], path, lineno: int) -> GazetteerEntry:
    if len(parts) != 4:
        raise GazetteerError(f"{path}:{lineno}: expected 4 tab-separated columns, got {len(parts)}")
    surface, country, mode, kind = (p.strip() for p in parts)
    if not surface:
        raise GazetteerError(f"{path}:{lineno}: empty surface")
    if mode not in MATCH_MODES:
        raise GazetteerError(f"{path}:{lineno}: unknown match_mode {mode!r}")
    if kind not in KINDS:
        raise GazetteerError(f"{path}:{lineno}: unknown kind {kind!r}")
    if len(country) != 2 or not country.isalpha() or not country.isupper():
        raise GazetteerError(f"{path}:{lineno}: bad country code {country!r}")
    if mode == "case_insensitive":
        surface = surface.lower()
    return GazetteerEntry(surface, country, mode, kind)


def load_gazetteer(path, countries: Sequence[str] = TARGET_COUNTRIES) -> Gazetteer:
    """Read a gazetteer TSV (surface, country_code, match_mode, kind).

    Malformed rows are fatal.  Rows for countries outside ``countries`` are
    skipped and noted in ``Gazetteer.diagnostics``.
    """
    allowed = set(countries)
    entries: list[GazetteerEntry] = []
    seen: set[tuple[str, str]] = set()
    diagnostics = []
    first_row = True
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise GazetteerError(f"cannot read gazetteer {path}: {exc.strerror}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if first_row:
                first_row = False
                if parts[0] == "surface" and len(parts) == 4:
                    continue
            entry = _parse_row(parts, path, lineno)
            if entry.country not in allowed:
                diagnostics.append(f"{path}:{lineno}: country {entry.country} not in {','.join(countries)}")
                continue
            if (entry.surface, entry.country) in seen:
                continue
            seen.add((entry.surface, entry.country))
            entries.append(entry)
    if not entries:
        raise GazetteerError(f"gazetteer {path} has no usable entries")
    for d in diagnostics:
        log.warning(d)
    return Gazetteer(entries, diagnostics)


DEFAULT_GAZETTEER_PATH = Path(str(resources.files("topic_trends") / "data" / "gazetteer.tsv"))


def detect_flag_emoji(text: str, countries: Sequence[str] = TARGET_COUNTRIES) -> set[str]:
    """Country codes of flag emoji in ``text``, restricted to ``countries``.

    Regional-indicator symbols pair up left to right; an unpaired one is
    ignored.  Subdivision tag flags (England, Scotland, Wales) map to GB.
    """
    allowed = set(countries)
    found = set()
    cps = [ord(c) for c in text]
    i = 0
    while i < len(cps):
        c = cps[i]
        if _RI_FIRST <= c <= _RI_LAST:
            if i + 1 < len(cps) and _RI_FIRST <= cps[i + 1] <= _RI_LAST:
                code = chr(c - _RI_FIRST + 65) + chr(cps[i + 1] - _RI_FIRST + 65)
                if code in allowed:
                    found.add(code)
                i += 2
                continue
        elif c == _BLACK_FLAG:
            j = i + 1
            tag = []
            while j < len(cps) and _TAG_A <= cps[j] <= _TAG_Z:
                tag.append(chr(cps[j] - _TAG_A + 97))
                j += 1
            if tag and j < len(cps) and cps[j] == _TAG_CANCEL:
                code = "".join(tag[:2]).upper()
                if code in allowed:
                    found.add(code)
                i = j + 1
                continue
        i += 1
    return found


def match_locations(text: str, g: Gazetteer, countries: Sequence[str] = TARGET_COUNTRIES) -> set[str]:
    return g.lookup(text) | detect_flag_emoji(text, countries)


def assign_countries(doc, matches: Iterable[str]):
    return replace(doc, countries=frozenset(matches))


def write_gazetteer(path, entries: Sequence[GazetteerEntry], header: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("surface\tcountry_code\tmatch_mode\tkind\n")
        for e in entries:
            fh.write(f"{e.surface}\t{e.country}\t{e.match_mode}\t{e.kind}\n")


# Single-word place names that are also ordinary English words or given
# names; these only match with their exact capitalization.
COMMON_WORD_NAMES = frozenset(
    """
    ajax aurora austin barking bath bay bend brandon brighton buffalo bury
    cambridge centennial charlotte chinatown clinton columbia columbus concord
    confederation corona cypress davie deal delta dover downey eden edison
    elgin elizabeth enterprise eugene everett fairfield fargo fleetwood garland
    gilbert glendale grace grays hamilton hampton harrow henderson hope hull
    independence irvine jackson kent lafayette lakewood lancaster layton
    league levis lincoln logan lowell madison manchester march marion mesa
    mesquite midland milton miramar mission mobile montgomery murray newport
    newton normal norman oakville orange orem oxford paradise pasadena pearland
    peoria phoenix plano pomona providence pueblo queens quincy reading redding
    regina richardson richmond ridge rochester ross rugby sale salem sandy
    savannah slough spring springfield stamford sterling stockton sunrise
    superior surprise temple thornton troy tyler union vernon victoria vista
    waco warren warwick waterloo wells wigan worthing york yuma
    """.split()
)

# City names whose everyday referent is a place outside the target
# countries; compiled city rows with these names are dropped.
FOREIGN_HOMONYMS = frozenset(
    """
    alexandria athens jamaica odessa orleans orléans sydney syracuse toledo
    valencia verdun
    """.split()
)


def _default_mode(name: str) -> str:
    if name.lower() in COMMON_WORD_NAMES:
        return "case_sensitive_exact"
    return "case_insensitive"


def parse_min_population(spec) -> dict[str, int]:
    """``100000`` or ``100000,US=50000`` -> per-country thresholds ('*' is the default)."""
    if isinstance(spec, int):
        return {"*": spec}
    out = {}
    for part in str(spec).split(","):
        part = part.strip()
        if not part:
            continue
        if "=" in part:
            cc, value = part.split("=", 1)
            out[cc.strip().upper()] = int(value)
        else:
            out["*"] = int(part)
    out.setdefault("*", 100_000)
    return out


def compile_gazetteer(
    export_path,
    countries: Sequence[str] = TARGET_COUNTRIES,
    min_population=100_000,
    admin1_path=None,
    extras_path=None,
) -> list[GazetteerEntry]:
    """Build gazetteer entries from a GeoNames-style dump.

    ``export_path`` uses the GeoNames ``cities*.txt`` layout (tab-separated,
    name in column 2, ascii name in column 3, feature class in column 7,
    country code in column 9, admin1 code in column 11, population in
    column 15).  ``admin1_path`` follows ``admin1CodesASCII.txt``
    (``CC.CODE<TAB>name<TAB>asciiname<TAB>geonameid``).  ``extras_path`` is
    an already-formatted gazetteer TSV of hand-curated names (countries,
    abbreviations, aliases) appended verbatim.

    City names that also name a country, state or alias elsewhere are
    dropped, as are known foreign homonyms; a city name held by cities in
    several countries is kept only for the most populous one.
    """
    allowed = set(countries)
    thresholds = parse_min_population(min_population)
    entries: list[GazetteerEntry] = []
    seen: set[tuple[str, str]] = set()

    higher_level: dict[str, set[str]] = defaultdict(set)
    city_owner: dict[str, str] = {}  # city name -> country of its most populous holder

    def add(surface: str, cc: str, kind: str, mode: str | None = None):
        surface = surface.strip()
        if not surface or "\t" in surface:
            return
        if kind == "city":
            folded = surface.lower()
            if folded in FOREIGN_HOMONYMS or higher_level.get(folded, {cc}) - {cc}:
                return
            if city_owner.setdefault(folded, cc) != cc:
                return
        else:
            higher_level[surface.lower()].add(cc)
        mode = mode or _default_mode(surface)
        if mode == "case_insensitive":
            surface = surface.lower()
        key = (surface.lower() if mode == "case_insensitive" else surface, cc)
        if key in seen:
            return
        seen.add(key)
        entries.append(GazetteerEntry(surface, cc, mode, kind))

    if extras_path is not None:
        for e in load_gazetteer(extras_path, countries).entries:
            add(e.surface, e.country, e.kind, e.match_mode)

    if admin1_path is not None:
        with open(admin1_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) < 3 or "." not in parts[0]:
                    raise GazetteerError(f"{admin1_path}:{lineno}: malformed admin1 row")
                cc = parts[0].split(".", 1)[0]
                if cc in allowed:
                    add(parts[1], cc, "state")
                    if parts[2] != parts[1]:
                        add(parts[2], cc, "state")

    rows = []
    with open(export_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 15:
                raise GazetteerError(f"{export_path}:{lineno}: expected GeoNames columns, got {len(parts)}")
            name, ascii_name, fclass, cc = parts[1], parts[2], parts[6], parts[8]
            if cc not in allowed or fclass != "P":
                continue
            try:
                population = int(parts[14] or 0)
            except ValueError:
                raise GazetteerError(f"{export_path}:{lineno}: bad population {parts[14]!r}") from None
            if population < thresholds.get(cc, thresholds["*"]):
                continue
            rows.append((-population, cc, name, ascii_name))
    # most populous first: a city name shared across countries goes to the larger city
    for _, cc, name, ascii_name in sorted(rows):
        add(name, cc, "city")
        if ascii_name and ascii_name != name:
            add(ascii_name, cc, "city")
    order = {c: i for i, c in enumerate(countries)}
    kind_order = {k: i for i, k in enumerate(KINDS)}
    entries.sort(key=lambda e: (order[e.country], kind_order[e.kind]))
    return entries
