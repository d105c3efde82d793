"""Catalog ingestion: NVD JSON feeds, the CWE CSV catalog, CVSS v3 vector
strings, and the immutable corpus snapshot they load into.

The NVD reader walks the byte stream incrementally (one item buffered at a
time) so yearly feeds of a few hundred MB do not need to fit in memory.
"""

from __future__ import annotations

import hashlib
import io
import json
import re
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from typing import BinaryIO, Iterable, Iterator

CVE_ID_RE = re.compile(r"^CVE-\d{4}-\d{4,}$")
CWE_ID_RE = re.compile(r"^CWE-\d+$")

CWE_URL_TEMPLATE = "https://cwe.mitre.org/data/definitions/{num}.html"


class IngestError(Exception):
    pass


class FeedParseError(IngestError):
    def __init__(self, message: str, byte_offset: int, item_index: int | None = None):
        detail = f"{message} (byte offset {byte_offset}"
        if item_index is not None:
            detail += f", item index {item_index}"
        detail += ")"
        super().__init__(detail)
        self.byte_offset = byte_offset
        self.item_index = item_index


class CatalogError(IngestError):
    pass


class CvssParseError(ValueError):
    pass


class AttackVector(Enum):
    NETWORK = "N"
    ADJACENT = "A"
    LOCAL = "L"
    PHYSICAL = "P"


class AttackComplexity(Enum):
    LOW = "L"
    HIGH = "H"


class PrivilegesRequired(Enum):
    NONE = "N"
    LOW = "L"
    HIGH = "H"


class UserInteraction(Enum):
    NONE = "N"
    REQUIRED = "R"


class Scope(Enum):
    UNCHANGED = "U"
    CHANGED = "C"


class ImpactLevel(Enum):
    HIGH = "H"
    LOW = "L"
    NONE = "N"


_METRIC_ORDER = ("AV", "AC", "PR", "UI", "S", "C", "I", "A")
_METRIC_ENUMS = {
    "AV": AttackVector,
    "AC": AttackComplexity,
    "PR": PrivilegesRequired,
    "UI": UserInteraction,
    "S": Scope,
    "C": ImpactLevel,
    "I": ImpactLevel,
    "A": ImpactLevel,
}


@dataclass(frozen=True)
class CvssVector:
    av: AttackVector
    ac: AttackComplexity
    pr: PrivilegesRequired
    ui: UserInteraction
    scope: Scope
    conf: ImpactLevel
    integ: ImpactLevel
    avail: ImpactLevel

    def components(self) -> dict[str, str]:
        return {
            "AV": self.av.value,
            "AC": self.ac.value,
            "PR": self.pr.value,
            "UI": self.ui.value,
            "S": self.scope.value,
            "C": self.conf.value,
            "I": self.integ.value,
            "A": self.avail.value,
        }

    def canonical(self) -> str:
        parts = self.components()
        return "CVSS:3.1/" + "/".join(f"{m}:{parts[m]}" for m in _METRIC_ORDER)


def parse_cvss_vector(vector_string: str) -> CvssVector:
    """Parse a CVSS:3.0/3.1 base vector string, order-independent."""
    if not (vector_string.startswith("CVSS:3.1/") or vector_string.startswith("CVSS:3.0/")):
        raise CvssParseError(f"not a CVSS 3.x vector string: {vector_string!r}")
    seen: dict[str, str] = {}
    for token in vector_string.split("/")[1:]:
        if ":" not in token:
            raise CvssParseError(f"malformed component token {token!r}")
        metric, value = token.split(":", 1)
        if metric not in _METRIC_ENUMS:
            raise CvssParseError(f"unknown metric token {metric!r}")
        seen[metric] = value
    missing = [m for m in _METRIC_ORDER if m not in seen]
    if missing:
        raise CvssParseError(f"missing {' '.join(missing)}")
    values = {}
    for metric in _METRIC_ORDER:
        enum_cls = _METRIC_ENUMS[metric]
        try:
            values[metric] = enum_cls(seen[metric])
        except ValueError:
            raise CvssParseError(
                f"unknown value token {seen[metric]!r} for metric {metric}"
            ) from None
    return CvssVector(
        av=values["AV"],
        ac=values["AC"],
        pr=values["PR"],
        ui=values["UI"],
        scope=values["S"],
        conf=values["C"],
        integ=values["I"],
        avail=values["A"],
    )


def all_vectors() -> Iterator[CvssVector]:
    """Every legal base vector (4*2*3*2*2*3*3*3 = 2592)."""
    for av in AttackVector:
        for ac in AttackComplexity:
            for pr in PrivilegesRequired:
                for ui in UserInteraction:
                    for scope in Scope:
                        for conf in ImpactLevel:
                            for integ in ImpactLevel:
                                for avail in ImpactLevel:
                                    yield CvssVector(av, ac, pr, ui, scope, conf, integ, avail)


@dataclass(frozen=True)
class CveRecord:
    cve_id: str
    description: str
    published_year: int
    cwe_ids: tuple[str, ...] = ()
    cvss_vector: CvssVector | None = None
    cpe_names: tuple[str, ...] = ()

    def __post_init__(self):
        if not CVE_ID_RE.match(self.cve_id):
            raise ValueError(f"bad CVE identifier {self.cve_id!r}")
        if not self.description:
            raise ValueError(f"{self.cve_id}: empty description")
        for cwe_id in self.cwe_ids:
            if not CWE_ID_RE.match(cwe_id):
                raise ValueError(f"{self.cve_id}: bad CWE identifier {cwe_id!r}")
        object.__setattr__(self, "cwe_ids", tuple(self.cwe_ids))
        object.__setattr__(self, "cpe_names", tuple(self.cpe_names))


@dataclass(frozen=True)
class CweEntry:
    cwe_id: str
    name: str
    description: str
    catalog_url: str

    def __post_init__(self):
        if not CWE_ID_RE.match(self.cwe_id):
            raise ValueError(f"bad CWE identifier {self.cwe_id!r}")


def cwe_catalog_url(cwe_id: str) -> str:
    if not CWE_ID_RE.match(cwe_id):
        raise ValueError(f"bad CWE identifier {cwe_id!r}")
    return CWE_URL_TEMPLATE.format(num=cwe_id.split("-", 1)[1])


@dataclass(frozen=True)
class CorpusSnapshot:
    cves: tuple[CveRecord, ...]
    cwes: tuple[CweEntry, ...]
    version_tag: str
    created_at: str

    def cve_by_id(self) -> dict[str, CveRecord]:
        return {record.cve_id: record for record in self.cves}


@dataclass
class LoadReport:
    dangling: dict[str, list[str]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.dangling


def _content_tag(cves: Iterable[CveRecord], cwes: Iterable[CweEntry]) -> str:
    digest = hashlib.sha256()
    for record in cves:
        digest.update(record.cve_id.encode())
        digest.update(record.description.encode())
    for entry in cwes:
        digest.update(entry.cwe_id.encode())
    return digest.hexdigest()[:16]


def make_snapshot(
    cves: Iterable[CveRecord],
    cwes: Iterable[CweEntry],
    version_tag: str | None = None,
    created_at: str | None = None,
) -> tuple[CorpusSnapshot, LoadReport]:
    cves = tuple(cves)
    cwes = tuple(cwes)
    seen: set[str] = set()
    for record in cves:
        if record.cve_id in seen:
            raise IngestError(f"duplicate CVE id {record.cve_id}")
        seen.add(record.cve_id)
    known_cwes = {entry.cwe_id for entry in cwes}
    report = LoadReport()
    for record in cves:
        missing = [cwe_id for cwe_id in record.cwe_ids if cwe_id not in known_cwes]
        if missing:
            report.dangling[record.cve_id] = missing
    snapshot = CorpusSnapshot(
        cves=cves,
        cwes=cwes,
        version_tag=version_tag or _content_tag(cves, cwes),
        created_at=created_at or datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    return snapshot, report


# --- NVD feed -------------------------------------------------------------

_CHUNK = 1 << 16


class _ByteScanner:
    """Incremental scanner over a byte stream, keeping only a window buffered."""

    def __init__(self, stream: BinaryIO):
        self.stream = stream
        self.buf = bytearray()
        self.base = 0  # stream offset of buf[0]
        self.pos = 0  # absolute offset of the next byte to read
        self.eof = False

    def _fill(self) -> bool:
        chunk = self.stream.read(_CHUNK)
        if not chunk:
            self.eof = True
            return False
        self.buf.extend(chunk)
        return True

    def peek(self) -> int | None:
        while self.pos - self.base >= len(self.buf):
            if not self._fill():
                return None
        return self.buf[self.pos - self.base]

    def advance(self) -> None:
        self.pos += 1

    def compact(self) -> None:
        cut = self.pos - self.base
        if cut > 0:
            del self.buf[:cut]
            self.base = self.pos

    def slice_from(self, start: int) -> bytes:
        return bytes(self.buf[start - self.base : self.pos - self.base])

    def skip_ws(self) -> None:
        while True:
            b = self.peek()
            if b is None or b not in (0x20, 0x09, 0x0A, 0x0D):
                return
            self.advance()

    def skip_string(self) -> bytes:
        """Consume a JSON string (opening quote already at pos); return its raw bytes."""
        start = self.pos
        assert self.peek() == 0x22
        self.advance()
        while True:
            b = self.peek()
            if b is None:
                raise FeedParseError("unterminated string", self.pos)
            self.advance()
            if b == 0x5C:  # backslash
                if self.peek() is None:
                    raise FeedParseError("unterminated escape", self.pos)
                self.advance()
            elif b == 0x22:
                return self.slice_from(start)

    def skip_value_object(self) -> bytes:
        """Consume a balanced {...} object; return its raw bytes."""
        start = self.pos
        assert self.peek() == 0x7B
        depth = 0
        while True:
            b = self.peek()
            if b is None:
                raise FeedParseError("unterminated object", self.pos)
            if b == 0x22:
                self.skip_string()
                continue
            self.advance()
            if b == 0x7B:
                depth += 1
            elif b == 0x7D:
                depth -= 1
                if depth == 0:
                    return self.slice_from(start)


def iter_nvd_items(stream: BinaryIO) -> Iterator[tuple[int, int, dict]]:
    """Yield (item_index, byte_offset, item_dict) from an NVD 1.1 feed."""
    scanner = _ByteScanner(stream)
    scanner.skip_ws()
    if scanner.peek() != 0x7B:
        raise FeedParseError("document is not a JSON object", scanner.pos)
    scanner.advance()

    # walk top-level keys until "CVE_Items"
    found = False
    while not found:
        scanner.skip_ws()
        b = scanner.peek()
        if b is None:
            raise FeedParseError("no CVE_Items array in document", scanner.pos)
        if b == 0x2C:  # comma between members
            scanner.advance()
            continue
        if b == 0x7D:
            raise FeedParseError("no CVE_Items array in document", scanner.pos)
        if b != 0x22:
            raise FeedParseError("expected object key", scanner.pos)
        raw_key = scanner.skip_string()
        scanner.skip_ws()
        if scanner.peek() != 0x3A:
            raise FeedParseError("expected ':' after key", scanner.pos)
        scanner.advance()
        scanner.skip_ws()
        if raw_key == b'"CVE_Items"':
            if scanner.peek() != 0x5B:
                raise FeedParseError("CVE_Items is not an array", scanner.pos)
            scanner.advance()
            found = True
        else:
            _skip_json_value(scanner)
        scanner.compact()

    index = 0
    while True:
        scanner.skip_ws()
        b = scanner.peek()
        if b is None:
            raise FeedParseError("unterminated CVE_Items array", scanner.pos, index)
        if b == 0x5D:
            return
        if b == 0x2C:
            scanner.advance()
            continue
        if b != 0x7B:
            raise FeedParseError("expected item object", scanner.pos, index)
        scanner.compact()
        offset = scanner.pos
        raw = scanner.skip_value_object()
        try:
            item = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise FeedParseError(f"bad item JSON: {exc.msg}", offset + exc.pos, index) from None
        yield index, offset, item
        index += 1
        scanner.compact()


def _skip_json_value(scanner: _ByteScanner) -> None:
    """Consume one JSON value of any type (used for keys we do not care about)."""
    b = scanner.peek()
    if b is None:
        raise FeedParseError("unexpected end of document", scanner.pos)
    if b == 0x22:
        scanner.skip_string()
        return
    if b == 0x7B:
        scanner.skip_value_object()
        return
    if b == 0x5B:
        scanner.advance()
        while True:
            scanner.skip_ws()
            nxt = scanner.peek()
            if nxt is None:
                raise FeedParseError("unterminated array", scanner.pos)
            if nxt == 0x5D:
                scanner.advance()
                return
            if nxt == 0x2C:
                scanner.advance()
                continue
            _skip_json_value(scanner)
        return
    # number / literal: consume until a delimiter
    while True:
        b = scanner.peek()
        if b is None or b in (0x2C, 0x7D, 0x5D, 0x20, 0x09, 0x0A, 0x0D):
            return
        scanner.advance()


@dataclass
class NvdParseResult:
    records: list[CveRecord]
    skipped_no_description: int = 0
    warnings: list[str] = field(default_factory=list)


def _english_description(cve: dict) -> str | None:
    for entry in cve.get("description", {}).get("description_data", []):
        if str(entry.get("lang", "")).lower().startswith("en"):
            value = entry.get("value", "").strip()
            if value:
                return value
    return None


def _item_cwe_ids(cve: dict) -> tuple[str, ...]:
    found: list[str] = []
    for group in cve.get("problemtype", {}).get("problemtype_data", []):
        for desc in group.get("description", []):
            value = desc.get("value", "")
            if CWE_ID_RE.match(value) and value not in found:
                found.append(value)
    return tuple(found)


def _cpe_names(item: dict) -> tuple[str, ...]:
    names: list[str] = []

    def walk(node: dict) -> None:
        for match in node.get("cpe_match", []) or []:
            uri = match.get("cpe23Uri", "")
            parts = uri.split(":")
            if len(parts) >= 5 and parts[0] == "cpe":
                vendor = parts[3].replace("_", " ")
                product = parts[4].replace("_", " ")
                name = f"{vendor} {product}".strip()
                if name and name not in names:
                    names.append(name)
        for child in node.get("children", []) or []:
            walk(child)

    for node in item.get("configurations", {}).get("nodes", []) or []:
        walk(node)
    return tuple(names)


def parse_nvd_feed(feed: bytes | BinaryIO) -> NvdParseResult:
    """Parse an NVD 1.1-style JSON feed into CVE records.

    Items without an English description are skipped and counted; a bad CVSS
    vector drops the vector with a warning but keeps the record.
    """
    stream = io.BytesIO(feed) if isinstance(feed, (bytes, bytearray)) else feed
    result = NvdParseResult(records=[])
    for index, offset, item in iter_nvd_items(stream):
        cve = item.get("cve", {})
        cve_id = cve.get("CVE_data_meta", {}).get("ID")
        if not cve_id or not CVE_ID_RE.match(str(cve_id)):
            result.warnings.append(f"item {index}: missing or bad CVE id, skipped")
            continue
        description = _english_description(cve)
        if description is None:
            result.skipped_no_description += 1
            continue
        vector = None
        vector_string = (
            item.get("impact", {}).get("baseMetricV3", {}).get("cvssV3", {}).get("vectorString")
        )
        if vector_string:
            try:
                vector = parse_cvss_vector(vector_string)
            except CvssParseError as exc:
                result.warnings.append(f"{cve_id}: CVSS vector dropped: {exc}")
        published = str(item.get("publishedDate", ""))[:4]
        year = int(published) if published.isdigit() else 0
        result.records.append(
            CveRecord(
                cve_id=cve_id,
                description=description,
                published_year=year,
                cwe_ids=_item_cwe_ids(cve),
                cvss_vector=vector,
                cpe_names=_cpe_names(item),
            )
        )
    return result


# --- CWE catalog ----------------------------------------------------------

def parse_cwe_catalog(catalog: bytes | str) -> list[CweEntry]:
    """Parse the CWE CSV export (columns CWE-ID, Name, Description)."""
    import csv

    text = catalog.decode("utf-8-sig") if isinstance(catalog, (bytes, bytearray)) else catalog
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    for column in ("CWE-ID", "Name", "Description"):
        if column not in header:
            raise CatalogError(f"missing mandatory column {column!r}")
    entries: list[CweEntry] = []
    seen: dict[str, int] = {}
    for row_number, row in enumerate(reader, start=2):
        raw_id = (row.get("CWE-ID") or "").strip()
        if not raw_id:
            continue
        cwe_id = raw_id if raw_id.startswith("CWE-") else f"CWE-{raw_id}"
        if cwe_id in seen:
            raise CatalogError(
                f"duplicate id {cwe_id}: rows {seen[cwe_id]} and {row_number}"
            )
        seen[cwe_id] = row_number
        entries.append(
            CweEntry(
                cwe_id=cwe_id,
                name=(row.get("Name") or "").strip(),
                description=(row.get("Description") or "").strip(),
                catalog_url=cwe_catalog_url(cwe_id),
            )
        )
    return entries


def load_hardware_cwe_ids(text: str) -> frozenset[str]:
    """One CWE id per line, bare numbers allowed."""
    ids = set()
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        cwe_id = line if line.startswith("CWE-") else f"CWE-{line}"
        if not CWE_ID_RE.match(cwe_id):
            raise CatalogError(f"bad CWE id line {line!r}")
        ids.add(cwe_id)
    return frozenset(ids)


def packaged_hardware_cwe_ids() -> frozenset[str]:
    text = resources.files("hwv2w.data").joinpath("hardware_cwe_ids.txt").read_text("utf-8")
    return load_hardware_cwe_ids(text)


# --- snapshot operations ----------------------------------------------------

def filter_hardware_iot(
    snapshot: CorpusSnapshot, hardware_cwe_ids: frozenset[str] | set[str]
) -> CorpusSnapshot:
    """Restrict a snapshot to CVEs tagged with at least one hardware CWE."""
    if not hardware_cwe_ids:
        raise ValueError("hardware CWE id set must be non-empty")
    cves = tuple(
        record for record in snapshot.cves if set(record.cwe_ids) & set(hardware_cwe_ids)
    )
    cwes = tuple(entry for entry in snapshot.cwes if entry.cwe_id in hardware_cwe_ids)
    return CorpusSnapshot(
        cves=cves,
        cwes=cwes,
        version_tag=snapshot.version_tag,
        created_at=snapshot.created_at,
    )


def append_new_data(snapshot: CorpusSnapshot, new_records: Iterable[CveRecord]) -> CorpusSnapshot:
    """Merge new records; an existing CVE id is replaced in place (newest wins)."""
    merged = {record.cve_id: record for record in snapshot.cves}
    order = [record.cve_id for record in snapshot.cves]
    for record in new_records:
        if record.cve_id not in merged:
            order.append(record.cve_id)
        merged[record.cve_id] = record
    return CorpusSnapshot(
        cves=tuple(merged[cve_id] for cve_id in order),
        cwes=snapshot.cwes,
        version_tag=uuid.uuid4().hex[:16],
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


# --- persistence ------------------------------------------------------------

SNAPSHOT_FORMAT = "hwv2w-snapshot"
SNAPSHOT_FORMAT_VERSION = 1


def snapshot_to_dict(snapshot: CorpusSnapshot) -> dict:
    return {
        "format": SNAPSHOT_FORMAT,
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "version_tag": snapshot.version_tag,
        "created_at": snapshot.created_at,
        "cves": [
            {
                "cve_id": r.cve_id,
                "description": r.description,
                "published_year": r.published_year,
                "cwe_ids": list(r.cwe_ids),
                "cvss_vector": r.cvss_vector.canonical() if r.cvss_vector else None,
                "cpe_names": list(r.cpe_names),
            }
            for r in snapshot.cves
        ],
        "cwes": [
            {
                "cwe_id": e.cwe_id,
                "name": e.name,
                "description": e.description,
                "catalog_url": e.catalog_url,
            }
            for e in snapshot.cwes
        ],
    }


def snapshot_from_dict(payload: dict) -> CorpusSnapshot:
    if payload.get("format") != SNAPSHOT_FORMAT:
        raise IngestError("not a snapshot file")
    if payload.get("format_version") != SNAPSHOT_FORMAT_VERSION:
        raise IngestError(f"unsupported snapshot version {payload.get('format_version')!r}")
    cves = tuple(
        CveRecord(
            cve_id=r["cve_id"],
            description=r["description"],
            published_year=r.get("published_year", 0),
            cwe_ids=tuple(r.get("cwe_ids", ())),
            cvss_vector=parse_cvss_vector(r["cvss_vector"]) if r.get("cvss_vector") else None,
            cpe_names=tuple(r.get("cpe_names", ())),
        )
        for r in payload.get("cves", [])
    )
    cwes = tuple(
        CweEntry(
            cwe_id=e["cwe_id"],
            name=e.get("name", ""),
            description=e.get("description", ""),
            catalog_url=e.get("catalog_url") or cwe_catalog_url(e["cwe_id"]),
        )
        for e in payload.get("cwes", [])
    )
    return CorpusSnapshot(
        cves=cves,
        cwes=cwes,
        version_tag=payload.get("version_tag", ""),
        created_at=payload.get("created_at", ""),
    )


def save_snapshot(snapshot: CorpusSnapshot, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(snapshot_to_dict(snapshot), handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_snapshot(path) -> CorpusSnapshot:
    with open(path, "r", encoding="utf-8") as handle:
        return snapshot_from_dict(json.load(handle))
