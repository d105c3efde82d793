"""Deterministic NLP primitives: cleaning, n-grams, collocation scoring,
rule-based POS tagging and dictionary entity recognition.

Everything here is pure and self-contained; dictionaries, the stopword list
and the tagger lexicon are immutable data files shipped with the package.
"""

from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Iterable, Mapping, Sequence

from . import porter

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")
_NUM_RE = re.compile(r"^[0-9]+([./-][0-9]+)*$")

MAX_TOKEN_LEN = 40


def _load_data_text(name: str) -> str:
    return resources.files("hwv2w.data").joinpath(name).read_text(encoding="utf-8")


def load_stopwords() -> frozenset[str]:
    return frozenset(
        line.strip() for line in _load_data_text("stopwords.txt").splitlines() if line.strip()
    )


_STOPWORDS = load_stopwords()


class Tag(str, Enum):
    NN = "NN"
    NNS = "NNS"
    VERB = "VERB"
    ADJ = "ADJ"
    DET = "DET"
    PREP = "PREP"
    NUM = "NUM"
    OTHER = "OTHER"


def load_pos_lexicon() -> Mapping[str, Tag]:
    lexicon: dict[str, Tag] = {}
    for row in csv.reader(_load_data_text("pos_lexicon.csv").splitlines()):
        if row:
            lexicon[row[0].strip().lower()] = Tag(row[1].strip())
    return lexicon


_LEXICON = load_pos_lexicon()


@dataclass(frozen=True)
class TokenStream:
    tokens: tuple[str, ...]
    source_len: int


@dataclass(frozen=True)
class NgramSet:
    bigrams: Mapping[tuple[str, ...], int]
    trigrams: Mapping[tuple[str, ...], int]
    quadgrams: Mapping[tuple[str, ...], int]
    total_tokens: int


@dataclass(frozen=True)
class CollocationScore:
    ngram: tuple[str, ...]
    score: float  # Dunning log-likelihood ratio
    frequency: int
    pmi: float  # log2(observed / expected), for inspection


@dataclass(frozen=True)
class TaggedToken:
    token: str
    tag: Tag


class EntityKind(str, Enum):
    ORG = "ORG"
    PERSON = "PERSON"
    CPE_PRODUCT = "CPE_PRODUCT"
    NOUN_FALLBACK = "NOUN_FALLBACK"


@dataclass(frozen=True)
class EntityLabel:
    surface: str
    kind: EntityKind
    start: int
    end: int


def surface_tokens(text: str) -> list[tuple[str, int, int]]:
    """Alphanumeric runs with character offsets, case preserved."""
    return [(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def _keep_token(token: str) -> bool:
    if len(token) <= 1 or len(token) > MAX_TOKEN_LEN:
        return False
    return any(c.isalpha() for c in token)


def _stable_stem(token: str) -> str:
    # iterate to a fixed point so cleaning already-clean text is a no-op
    # (a single classic-stemmer pass is not: "expos" -> "expo")
    for _ in range(10):
        stemmed = porter.stem(token)
        if stemmed == token:
            return token
        token = stemmed
    return token


def string_clean(raw_text: str, stopwords: frozenset[str] | None = None) -> TokenStream:
    """Lowercase, strip punctuation, drop stopwords and junk tokens, stem."""
    stopwords = _STOPWORDS if stopwords is None else stopwords
    tokens = []
    for match in _TOKEN_RE.finditer(raw_text.lower()):
        token = match.group(0)
        if token in stopwords:
            continue
        if not _keep_token(token):
            continue
        tokens.append(_stable_stem(token))
    return TokenStream(tokens=tuple(tokens), source_len=len(raw_text))


def extract_ngrams(tokens: TokenStream | Sequence[str]) -> NgramSet:
    """Contiguous sliding-window n-grams for n in {2, 3, 4}."""
    if isinstance(tokens, TokenStream):
        tokens = tokens.tokens
    seq = tuple(tokens)
    buckets: list[Counter] = []
    for n in (2, 3, 4):
        counter: Counter = Counter()
        for i in range(len(seq) - n + 1):
            counter[seq[i : i + n]] += 1
        buckets.append(counter)
    return NgramSet(
        bigrams=dict(buckets[0]),
        trigrams=dict(buckets[1]),
        quadgrams=dict(buckets[2]),
        total_tokens=len(seq),
    )


def _bigram_margins(bigrams: Mapping[tuple[str, ...], int]):
    rows: Counter = Counter()
    cols: Counter = Counter()
    total = 0
    for (first, second), freq in bigrams.items():
        rows[first] += freq
        cols[second] += freq
        total += freq
    return rows, cols, total


def _llr_and_pmi(k11: int, row: int, col: int, total: int) -> tuple[float, float]:
    """Dunning G2 statistic and plain PMI for one 2x2 contingency table."""
    cells = (
        (k11, row, col),
        (row - k11, row, total - col),
        (col - k11, total - row, col),
        (total - row - col + k11, total - row, total - col),
    )
    acc = 0.0
    for k, r, c in cells:
        if k > 0:
            acc += k * math.log(k * total / (r * c))
    llr = 2.0 * acc
    pmi = math.log2(k11 * total / (row * col))
    return llr, pmi


def score_collocations(ngrams: NgramSet) -> list[CollocationScore]:
    """Rank all n-grams by log-likelihood ratio.

    Bigrams are scored from their 2x2 contingency table against the
    independence expectation; trigrams and quadgrams take the minimum over
    their adjacent-bigram statistics. Descending score, ties broken by
    frequency then lexicographic tuple order.
    """
    rows, cols, total = _bigram_margins(ngrams.bigrams)
    if total == 0:
        return []

    bigram_stats: dict[tuple[str, ...], tuple[float, float]] = {}
    for pair, freq in ngrams.bigrams.items():
        bigram_stats[pair] = _llr_and_pmi(freq, rows[pair[0]], cols[pair[1]], total)

    scored: list[CollocationScore] = []
    for pair, freq in ngrams.bigrams.items():
        llr, pmi = bigram_stats[pair]
        scored.append(CollocationScore(ngram=pair, score=llr, frequency=freq, pmi=pmi))
    for bucket in (ngrams.trigrams, ngrams.quadgrams):
        for tup, freq in bucket.items():
            links = [bigram_stats[(tup[i], tup[i + 1])] for i in range(len(tup) - 1)]
            llr = min(stat[0] for stat in links)
            pmi = min(stat[1] for stat in links)
            scored.append(CollocationScore(ngram=tup, score=llr, frequency=freq, pmi=pmi))

    scored.sort(key=lambda s: (-s.score, -s.frequency, s.ngram))
    return scored


def pos_tag(tokens: Sequence[str], lexicon: Mapping[str, Tag] | None = None) -> list[TaggedToken]:
    """Deterministic lexicon-then-suffix tagger (exact hit, plural rule, default NN)."""
    lexicon = _LEXICON if lexicon is None else lexicon
    tagged = []
    for token in tokens:
        low = token.lower()
        if low in lexicon:
            tag = lexicon[low]
        elif _NUM_RE.match(low):
            tag = Tag.NUM
        elif len(low) > 2 and low.endswith("s") and not low.endswith("ss"):
            base = low[:-1]
            base_tag = lexicon.get(base, Tag.NN)
            tag = Tag.NNS if base_tag is Tag.NN else base_tag
        else:
            tag = Tag.NN
        tagged.append(TaggedToken(token=token, tag=tag))
    return tagged


def _normalize_phrase(entry: str) -> tuple[str, ...]:
    return tuple(m.group(0) for m in _TOKEN_RE.finditer(entry.lower()))


def recognize_entities(
    raw_text: str,
    cpe_dictionary: Iterable[str] = (),
    gazetteer: Mapping[str, str] | None = None,
) -> list[EntityLabel]:
    """Longest-match dictionary scan, product dictionary before gazetteer.

    Matching is case-insensitive over whitespace/punctuation-normalized token
    sequences; accepted spans never overlap.
    """
    gazetteer = gazetteer or {}
    toks = surface_tokens(raw_text)
    lower = [t[0].lower() for t in toks]

    phrase_tables: list[tuple[int, dict[tuple[str, ...], EntityKind]]] = []
    cpe_phrases = {
        phrase: EntityKind.CPE_PRODUCT
        for phrase in (_normalize_phrase(e) for e in cpe_dictionary)
        if phrase
    }
    gaz_phrases = {}
    for entry, kind in gazetteer.items():
        phrase = _normalize_phrase(entry)
        if phrase:
            gaz_phrases[phrase] = EntityKind(kind) if not isinstance(kind, EntityKind) else kind
    phrase_tables.append((0, cpe_phrases))
    phrase_tables.append((1, gaz_phrases))

    candidates = []
    for priority, table in phrase_tables:
        if not table:
            continue
        max_len = max(len(p) for p in table)
        for i in range(len(lower)):
            for width in range(min(max_len, len(lower) - i), 0, -1):
                window = tuple(lower[i : i + width])
                kind = table.get(window)
                if kind is not None:
                    start = toks[i][1]
                    end = toks[i + width - 1][2]
                    candidates.append((priority, -width, start, end, kind))

    accepted: list[EntityLabel] = []
    taken: list[tuple[int, int]] = []
    for priority, neg_width, start, end, kind in sorted(candidates):
        if any(start < e and s < end for s, e in taken):
            continue
        taken.append((start, end))
        accepted.append(
            EntityLabel(surface=raw_text[start:end], kind=kind, start=start, end=end)
        )
    accepted.sort(key=lambda label: label.start)
    return accepted
