"""Entity derivation and similarity ranking over the CVE corpus.

For each CVE this derives an exploit target (dictionary/gazetteer match with
a noun fallback) and an attack impact (top-ranked collocation), builds a
TF-IDF index over cleaned descriptions, and ranks corpus matches for a free
text query.
"""

from __future__ import annotations

import json
import logging
import math
import struct
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .ingest import CorpusSnapshot, CveRecord, CvssVector, CVE_ID_RE, CWE_ID_RE, parse_cvss_vector
from .textpipe import (
    EntityKind,
    Tag,
    extract_ngrams,
    pos_tag,
    recognize_entities,
    score_collocations,
    string_clean,
    surface_tokens,
)

logger = logging.getLogger(__name__)

UNKNOWN_TARGET = "unknown-target"
UNSPECIFIED_IMPACT = "unspecified-impact"

DEFAULT_TOP_K = 5

_SCORE_TIE_EPS = 1e-12


@dataclass(frozen=True)
class EntityDictionaries:
    """Lookup tables used by the exploit-target fallback chain."""

    cpe_products: frozenset[str] = frozenset()
    gazetteer: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class NlpEntry:
    vulnerability: str
    exploit_target: str
    attack_impact: str
    cwe: str

    def __post_init__(self):
        if not CVE_ID_RE.match(self.vulnerability):
            raise ValueError(f"bad CVE identifier {self.vulnerability!r}")
        if not CWE_ID_RE.match(self.cwe):
            raise ValueError(f"bad CWE identifier {self.cwe!r}")
        if not self.exploit_target or not self.attack_impact:
            raise ValueError("exploit_target and attack_impact must be non-empty")


class RelevanceBand(str, Enum):
    HIGH = "HIGH"
    MODERATE = "MODERATE"
    SOMEWHAT = "SOMEWHAT"

    @property
    def rank(self) -> int:
        return {"SOMEWHAT": 0, "MODERATE": 1, "HIGH": 2}[self.value]


@dataclass(frozen=True)
class SimilarityMatch:
    cve_id: str
    similarity: float
    relevance_band: RelevanceBand
    cwe_ids: tuple[str, ...]
    description: str
    cvss_vector: CvssVector | None


@dataclass(frozen=True)
class DocumentVector:
    cve_id: str
    weights: Mapping[str, float]
    norm: float


def classify_relevance(similarity: float) -> RelevanceBand:
    """Band a cosine similarity: >=0.40 HIGH, >=0.30 MODERATE, else SOMEWHAT."""
    if not 0.0 <= similarity <= 1.0:
        raise ValueError(f"similarity {similarity} outside [0, 1]")
    if similarity >= 0.40:
        return RelevanceBand.HIGH
    if similarity >= 0.30:
        return RelevanceBand.MODERATE
    return RelevanceBand.SOMEWHAT


def _raw_tokens(text: str) -> list[str]:
    return [tok for tok, _, _ in surface_tokens(text)]


def exploit_target(record: CveRecord, dictionaries: EntityDictionaries) -> str:
    """Fallback chain: product dictionary, ORG, PERSON, most-frequent noun."""
    description = record.description
    cpe_hits = recognize_entities(description, dictionaries.cpe_products, {})
    for label in cpe_hits:
        if label.kind is EntityKind.CPE_PRODUCT:
            return label.surface
    gaz_hits = recognize_entities(description, (), dict(dictionaries.gazetteer))
    for wanted in (EntityKind.ORG, EntityKind.PERSON):
        for label in gaz_hits:
            if label.kind is wanted:
                return label.surface

    tokens = _raw_tokens(description)
    ngrams = extract_ngrams(tokens)
    for bucket in (ngrams.bigrams, ngrams.trigrams, ngrams.quadgrams):
        for tup, _freq in sorted(bucket.items(), key=lambda kv: (-kv[1], kv[0])):
            for tagged in pos_tag(tup):
                if tagged.tag in (Tag.NN, Tag.NNS):
                    return tagged.token
    return UNKNOWN_TARGET


def attack_impact(record: CveRecord) -> str:
    """Highest-scoring collocation, longer n-grams preferred at equal score."""
    tokens = _raw_tokens(record.description)
    if len(tokens) < 2:
        return UNSPECIFIED_IMPACT
    scored = score_collocations(extract_ngrams(tokens))
    if not scored:
        return UNSPECIFIED_IMPACT
    top = scored[0].score
    leaders = [s for s in scored if s.score >= top - _SCORE_TIE_EPS]
    leaders.sort(key=lambda s: (-len(s.ngram), -s.frequency, s.ngram))
    return " ".join(leaders[0].ngram)


def camel_name(text: str) -> str:
    """Ontology individual name: strip punctuation, CamelCase the words."""
    words = _raw_tokens(text)
    return "".join(w[:1].upper() + w[1:] for w in words)


def make_nlp_entry(record: CveRecord, dictionaries: EntityDictionaries) -> list[NlpEntry]:
    """One entry per linked CWE, sharing the record's target and impact."""
    if not record.cwe_ids:
        logger.info("%s: no CWE links, no ontology entries", record.cve_id)
        return []
    target = camel_name(exploit_target(record, dictionaries))
    impact = camel_name(attack_impact(record))
    return [
        NlpEntry(
            vulnerability=record.cve_id,
            exploit_target=target,
            attack_impact=impact,
            cwe=cwe_id,
        )
        for cwe_id in record.cwe_ids
    ]


# --- similarity index -------------------------------------------------------

INDEX_MAGIC = b"HWVW"
INDEX_FORMAT_VERSION = 1


class IndexFormatError(Exception):
    pass


@dataclass(frozen=True)
class _IndexedDoc:
    vector: DocumentVector
    cwe_ids: tuple[str, ...]
    description: str
    cvss_vector: CvssVector | None


@dataclass(frozen=True)
class SimilarityIndex:
    version_tag: str
    idf: Mapping[str, float]
    docs: tuple[_IndexedDoc, ...]

    def __len__(self) -> int:
        return len(self.docs)


def build_index(snapshot: CorpusSnapshot) -> SimilarityIndex:
    """TF-IDF vectors over cleaned descriptions (tf = raw count, idf = ln(N/df))."""
    if not snapshot.cves:
        raise ValueError("empty corpus")
    streams = {r.cve_id: string_clean(r.description).tokens for r in snapshot.cves}
    doc_count = len(snapshot.cves)
    df: Counter = Counter()
    for tokens in streams.values():
        df.update(set(tokens))
    idf = {term: math.log(doc_count / count) for term, count in df.items()}

    docs = []
    for record in snapshot.cves:
        tf = Counter(streams[record.cve_id])
        weights = {term: count * idf[term] for term, count in tf.items()}
        norm = math.sqrt(sum(w * w for w in weights.values()))
        docs.append(
            _IndexedDoc(
                vector=DocumentVector(cve_id=record.cve_id, weights=weights, norm=norm),
                cwe_ids=record.cwe_ids,
                description=record.description,
                cvss_vector=record.cvss_vector,
            )
        )
    return SimilarityIndex(version_tag=snapshot.version_tag, idf=idf, docs=tuple(docs))


def vectorize_query(query_text: str, index: SimilarityIndex) -> DocumentVector:
    stream = string_clean(query_text)
    if not stream.tokens:
        raise ValueError("query has no content terms")
    tf = Counter(stream.tokens)
    weights = {
        term: count * index.idf[term] for term, count in tf.items() if term in index.idf
    }
    norm = math.sqrt(sum(w * w for w in weights.values()))
    return DocumentVector(cve_id="", weights=weights, norm=norm)


def cosine(a: DocumentVector, b: DocumentVector) -> float:
    if a.norm == 0.0 or b.norm == 0.0:
        return 0.0
    small, large = (a.weights, b.weights) if len(a.weights) <= len(b.weights) else (b.weights, a.weights)
    dot = sum(weight * large.get(term, 0.0) for term, weight in small.items())
    return dot / (a.norm * b.norm)


def rank_similar(query_text: str, index: SimilarityIndex, k: int = DEFAULT_TOP_K) -> list[SimilarityMatch]:
    """Top-k corpus matches by cosine similarity, ties by CVE id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    query = vectorize_query(query_text, index)
    scored = []
    for doc in index.docs:
        similarity = cosine(query, doc.vector)
        # cosine of non-negative weight vectors; clamp float drift into [0, 1]
        similarity = min(max(similarity, 0.0), 1.0)
        scored.append((doc, similarity))
    scored.sort(key=lambda pair: (-pair[1], pair[0].vector.cve_id))
    matches = []
    for doc, similarity in scored[:k]:
        matches.append(
            SimilarityMatch(
                cve_id=doc.vector.cve_id,
                similarity=similarity,
                relevance_band=classify_relevance(similarity),
                cwe_ids=doc.cwe_ids,
                description=doc.description,
                cvss_vector=doc.cvss_vector,
            )
        )
    return matches


def cwe_distribution(matches: Sequence[SimilarityMatch]) -> tuple[dict[str, int], str]:
    """CWE counts across matches plus the modal CWE.

    Count ties break to the higher summed similarity, then id order.
    """
    if not matches:
        raise ValueError("no matches to aggregate")
    counts: Counter = Counter()
    similarity_sums: dict[str, float] = {}
    for match in matches:
        for cwe_id in match.cwe_ids:
            counts[cwe_id] += 1
            similarity_sums[cwe_id] = similarity_sums.get(cwe_id, 0.0) + match.similarity
    if not counts:
        return {}, ""
    modal = min(
        counts,
        key=lambda cwe_id: (-counts[cwe_id], -similarity_sums[cwe_id], cwe_id),
    )
    return dict(counts), modal


# --- index persistence ------------------------------------------------------

def index_to_bytes(index: SimilarityIndex) -> bytes:
    payload = {
        "version_tag": index.version_tag,
        "idf": dict(index.idf),
        "docs": [
            {
                "cve_id": doc.vector.cve_id,
                "weights": dict(doc.vector.weights),
                "norm": doc.vector.norm,
                "cwe_ids": list(doc.cwe_ids),
                "description": doc.description,
                "cvss_vector": doc.cvss_vector.canonical() if doc.cvss_vector else None,
            }
            for doc in index.docs
        ],
    }
    body = json.dumps(payload, sort_keys=True).encode("utf-8")
    return INDEX_MAGIC + struct.pack(">H", INDEX_FORMAT_VERSION) + body


def index_from_bytes(blob: bytes) -> SimilarityIndex:
    if blob[:4] != INDEX_MAGIC:
        raise IndexFormatError("not a similarity index file")
    (version,) = struct.unpack(">H", blob[4:6])
    if version != INDEX_FORMAT_VERSION:
        raise IndexFormatError(f"unsupported index format version {version}")
    payload = json.loads(blob[6:].decode("utf-8"))
    docs = tuple(
        _IndexedDoc(
            vector=DocumentVector(
                cve_id=doc["cve_id"],
                weights={t: float(w) for t, w in doc["weights"].items()},
                norm=float(doc["norm"]),
            ),
            cwe_ids=tuple(doc.get("cwe_ids", ())),
            description=doc.get("description", ""),
            cvss_vector=parse_cvss_vector(doc["cvss_vector"]) if doc.get("cvss_vector") else None,
        )
        for doc in payload["docs"]
    )
    return SimilarityIndex(
        version_tag=payload.get("version_tag", ""),
        idf={t: float(v) for t, v in payload.get("idf", {}).items()},
        docs=docs,
    )


def save_index(index: SimilarityIndex, path) -> None:
    with open(path, "wb") as handle:
        handle.write(index_to_bytes(index))


def load_index(path) -> SimilarityIndex:
    with open(path, "rb") as handle:
        return index_from_bytes(handle.read())
