"""Four-class vulnerability ontology: typed individuals, subject-predicate-
object triples with set semantics, structural validation, a conjunctive
query engine, statistics, N-Triples interchange and story-path extraction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .entitymodel import NlpEntry

IRI_PREFIX = "hwv2w:/"
RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
OWL_CLASS = "http://www.w3.org/2002/07/owl#Class"
OWL_OBJECT_PROPERTY = "http://www.w3.org/2002/07/owl#ObjectProperty"

_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class StoreError(Exception):
    pass


class OntologyClass(str, Enum):
    VULNERABILITY = "Vulnerability"
    CWE = "CWE"
    ATTACK_IMPACT = "AttackImpact"
    EXPLOIT_TARGET = "ExploitTarget"


class PropertyKind(str, Enum):
    EXPLOITS = "Exploits"
    HAS_ATTACK_IMPACT = "hasAttackImpact"
    TARGETS_CWE = "TargetsCWE"
    HAS_VULNERABILITY = "hasVulnerability"


# domain -> range per property
DOMAIN_RANGE: dict[PropertyKind, tuple[OntologyClass, OntologyClass]] = {
    PropertyKind.EXPLOITS: (OntologyClass.VULNERABILITY, OntologyClass.EXPLOIT_TARGET),
    PropertyKind.HAS_ATTACK_IMPACT: (OntologyClass.EXPLOIT_TARGET, OntologyClass.ATTACK_IMPACT),
    PropertyKind.TARGETS_CWE: (OntologyClass.VULNERABILITY, OntologyClass.CWE),
    PropertyKind.HAS_VULNERABILITY: (OntologyClass.EXPLOIT_TARGET, OntologyClass.VULNERABILITY),
}


@dataclass(frozen=True)
class Individual:
    name: str
    cls: OntologyClass
    subclass: str | None = None


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: PropertyKind
    object: str


@dataclass(frozen=True)
class OntologyStats:
    axiom_count: int
    logical_axioms: int
    declaration_axioms: int
    individual_count: int
    class_count: int
    object_property_count: int


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    subject: str


@dataclass
class ValidationReport:
    errors: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return not self.errors


class TripleStore:
    """Set-semantics triple store with subject/predicate/object indexes."""

    def __init__(self):
        self.individuals: dict[str, Individual] = {}
        self.triples: set[Triple] = set()
        self._by_subject: dict[str, set[Triple]] = {}
        self._by_predicate: dict[PropertyKind, set[Triple]] = {}
        self._by_object: dict[str, set[Triple]] = {}

    def add_individual(
        self, name: str, cls: OntologyClass, subclass: str | None = None
    ) -> Individual:
        if not _NAME_RE.match(name):
            raise StoreError(f"bad individual name {name!r}")
        existing = self.individuals.get(name)
        if existing is not None:
            if existing.cls is not cls:
                raise StoreError(
                    f"{name!r} already declared as {existing.cls.value}, cannot redeclare as {cls.value}"
                )
            if subclass and existing.subclass != subclass:
                existing = Individual(name=name, cls=cls, subclass=subclass)
                self.individuals[name] = existing
            return existing
        individual = Individual(name=name, cls=cls, subclass=subclass)
        self.individuals[name] = individual
        return individual

    def add_triple(self, subject: str, predicate: PropertyKind, obj: str) -> bool:
        """Insert one triple; returns False if it was already present.

        Both endpoints must be declared individuals. Domain/range conformance
        is reported by validate(), not enforced here, so violation fixtures
        and external files can be loaded and then checked.
        """
        if subject not in self.individuals:
            raise StoreError(f"unknown individual {subject!r}")
        if obj not in self.individuals:
            raise StoreError(f"unknown individual {obj!r}")
        triple = Triple(subject=subject, predicate=predicate, object=obj)
        if triple in self.triples:
            return False
        self.triples.add(triple)
        self._by_subject.setdefault(subject, set()).add(triple)
        self._by_predicate.setdefault(predicate, set()).add(triple)
        self._by_object.setdefault(obj, set()).add(triple)
        return True

    def matching(
        self,
        subject: str | None = None,
        predicate: PropertyKind | None = None,
        obj: str | None = None,
    ) -> set[Triple]:
        """Triples matching the given constants (None = wildcard)."""
        pools = []
        if subject is not None:
            pools.append(self._by_subject.get(subject, set()))
        if predicate is not None:
            pools.append(self._by_predicate.get(predicate, set()))
        if obj is not None:
            pools.append(self._by_object.get(obj, set()))
        if not pools:
            return set(self.triples)
        result = min(pools, key=len)
        for pool in pools:
            if pool is not result:
                result = result & pool
        return set(result)

    def subclass_labels(self) -> set[str]:
        return {ind.subclass for ind in self.individuals.values() if ind.subclass}


def assert_entry(store: TripleStore, entry: NlpEntry) -> int:
    """Assert one extracted quadruple; returns the number of new triples."""
    store.add_individual(entry.vulnerability, OntologyClass.VULNERABILITY)
    store.add_individual(entry.exploit_target, OntologyClass.EXPLOIT_TARGET)
    store.add_individual(entry.attack_impact, OntologyClass.ATTACK_IMPACT)
    store.add_individual(entry.cwe, OntologyClass.CWE)
    added = 0
    added += store.add_triple(entry.vulnerability, PropertyKind.EXPLOITS, entry.exploit_target)
    added += store.add_triple(entry.exploit_target, PropertyKind.HAS_ATTACK_IMPACT, entry.attack_impact)
    added += store.add_triple(entry.vulnerability, PropertyKind.TARGETS_CWE, entry.cwe)
    added += store.add_triple(entry.exploit_target, PropertyKind.HAS_VULNERABILITY, entry.vulnerability)
    return added


def validate(store: TripleStore) -> ValidationReport:
    """Structural checks: domain/range, coverage expectations, dangling refs."""
    report = ValidationReport()
    for triple in sorted(store.triples, key=lambda t: (t.subject, t.predicate.value, t.object)):
        subject = store.individuals.get(triple.subject)
        obj = store.individuals.get(triple.object)
        if subject is None or obj is None:
            report.errors.append(
                Violation(
                    code="DANGLING_REF",
                    message="triple references an undeclared individual",
                    subject=triple.subject if subject is None else triple.object,
                )
            )
            continue
        domain, range_ = DOMAIN_RANGE[triple.predicate]
        if subject.cls is not domain:
            report.errors.append(
                Violation(
                    code="DOMAIN_RANGE",
                    message=(
                        f"{triple.predicate.value} subject must be {domain.value}, "
                        f"got {subject.cls.value}"
                    ),
                    subject=triple.subject,
                )
            )
        if obj.cls is not range_:
            report.errors.append(
                Violation(
                    code="DOMAIN_RANGE",
                    message=(
                        f"{triple.predicate.value} object must be {range_.value}, "
                        f"got {obj.cls.value}"
                    ),
                    subject=triple.object,
                )
            )

    exploited_targets = {t.object for t in store.matching(predicate=PropertyKind.EXPLOITS)}
    for name in sorted(store.individuals):
        individual = store.individuals[name]
        if individual.cls is OntologyClass.VULNERABILITY:
            if not any(
                t.predicate is PropertyKind.TARGETS_CWE
                for t in store.matching(subject=name)
            ):
                report.warnings.append(
                    Violation(
                        code="MISSING_TARGETS_CWE",
                        message=f"vulnerability {name} has no TargetsCWE link",
                        subject=name,
                    )
                )
        if individual.cls is OntologyClass.EXPLOIT_TARGET and name in exploited_targets:
            if not any(
                t.predicate is PropertyKind.HAS_ATTACK_IMPACT
                for t in store.matching(subject=name)
            ):
                report.warnings.append(
                    Violation(
                        code="MISSING_ATTACK_IMPACT",
                        message=f"exploited target {name} has no hasAttackImpact link",
                        subject=name,
                    )
                )
    return report


def stats(store: TripleStore) -> OntologyStats:
    """Deterministic axiom counts (declarations + logical assertions)."""
    individual_count = len(store.individuals)
    class_count = len(OntologyClass) + len(store.subclass_labels())
    object_property_count = len(PropertyKind)
    declaration_axioms = individual_count + class_count + object_property_count
    logical_axioms = len(store.triples) + 2 * len(PropertyKind)  # domain+range per property
    return OntologyStats(
        axiom_count=declaration_axioms + logical_axioms,
        logical_axioms=logical_axioms,
        declaration_axioms=declaration_axioms,
        individual_count=individual_count,
        class_count=class_count,
        object_property_count=object_property_count,
    )


# --- query engine -----------------------------------------------------------

@dataclass(frozen=True)
class TriplePattern:
    subject: str
    predicate: str
    object: str

    def terms(self) -> tuple[str, str, str]:
        return (self.subject, self.predicate, self.object)


@dataclass(frozen=True)
class QueryPattern:
    variables: tuple[str, ...]
    patterns: tuple[TriplePattern, ...]


@dataclass(frozen=True)
class BindingSet:
    variables: tuple[str, ...]
    rows: tuple[dict[str, str], ...]


class QueryParseError(Exception):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


def _is_variable(term: str) -> bool:
    return term.startswith("?")


_TOKEN_SPLIT = re.compile(r"(\{|\}|\.(?=\s|$))|\s+")


def parse_query(text: str) -> QueryPattern:
    """Parse the SELECT/WHERE subset grammar into a query pattern."""
    tokens: list[tuple[str, int, int]] = []  # (token, line, column)
    for line_no, line in enumerate(text.splitlines(), start=1):
        for match in re.finditer(r"\{|\}|\.(?=\s|$)|[^\s{}]+", line):
            tokens.append((match.group(0), line_no, match.start() + 1))

    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else (None, 0, 0)

    def take(expect: str | None = None):
        nonlocal pos
        if pos >= len(tokens):
            last = tokens[-1] if tokens else ("", 1, 1)
            raise QueryParseError(
                f"unexpected end of query, expected {expect or 'token'}", last[1], last[2]
            )
        token, line, column = tokens[pos]
        if expect is not None and token.upper() != expect.upper():
            raise QueryParseError(f"expected {expect!r}, got {token!r}", line, column)
        pos += 1
        return token, line, column

    while peek()[0] is not None and peek()[0].upper() == "PREFIX":
        take()
        take()  # prefix name
        take()  # iri

    take("SELECT")
    variables: list[str] = []
    while True:
        token, line, column = peek()
        if token is None:
            raise QueryParseError("unexpected end of query, expected WHERE", line, column)
        if token.upper() == "WHERE":
            break
        if not _is_variable(token):
            raise QueryParseError(f"expected variable, got {token!r}", line, column)
        variables.append(token)
        take()
    if not variables:
        token, line, column = peek()
        raise QueryParseError("no variables selected", line, column)
    take("WHERE")
    take("{")
    patterns: list[TriplePattern] = []
    while True:
        token, line, column = peek()
        if token is None:
            raise QueryParseError("unterminated WHERE block", line, column)
        if token == "}":
            take()
            break
        terms = []
        for _ in range(3):
            term, t_line, t_column = take()
            if term in ("{", "}", "."):
                raise QueryParseError(f"expected term, got {term!r}", t_line, t_column)
            terms.append(term)
        patterns.append(TriplePattern(subject=terms[0], predicate=terms[1], object=terms[2]))
        token, line, column = peek()
        if token == ".":
            take()
    if peek()[0] is not None:
        token, line, column = peek()
        raise QueryParseError(f"trailing content {token!r}", line, column)
    if not patterns:
        raise QueryParseError("no patterns", 1, 1)
    used = {t for p in patterns for t in p.terms() if _is_variable(t)}
    for variable in variables:
        if variable not in used:
            raise QueryParseError(f"selected variable {variable} not used in any pattern", 1, 1)
    return QueryPattern(variables=tuple(variables), patterns=tuple(patterns))


def query(store: TripleStore, pattern: QueryPattern) -> BindingSet:
    """Conjunctive join with deduplicated, deterministically ordered rows."""
    bindings: list[dict[str, str]] = [{}]
    for triple_pattern in pattern.patterns:
        next_bindings: list[dict[str, str]] = []
        for binding in bindings:
            s, p, o = triple_pattern.terms()
            s_val = binding.get(s) if _is_variable(s) else s
            o_val = binding.get(o) if _is_variable(o) else o
            p_val = binding.get(p) if _is_variable(p) else p
            if p_val is None:
                predicate = None
            else:
                try:
                    predicate = PropertyKind(p_val)
                except ValueError:
                    continue  # unknown property name: no matches for this binding
            for triple in store.matching(subject=s_val, predicate=predicate, obj=o_val):
                new = dict(binding)
                ok = True
                for term, value in (
                    (s, triple.subject),
                    (p, triple.predicate.value),
                    (o, triple.object),
                ):
                    if _is_variable(term):
                        bound = new.get(term)
                        if bound is None:
                            new[term] = value
                        elif bound != value:
                            ok = False
                            break
                if ok:
                    next_bindings.append(new)
        bindings = next_bindings
        if not bindings:
            break

    projected = []
    seen = set()
    for binding in bindings:
        row = {variable: binding[variable] for variable in pattern.variables}
        key = tuple(row[v] for v in pattern.variables)
        if key not in seen:
            seen.add(key)
            projected.append(row)
    projected.sort(key=lambda row: tuple(row[v] for v in pattern.variables))
    return BindingSet(variables=pattern.variables, rows=tuple(projected))


# --- N-Triples interchange ---------------------------------------------------

class NtriplesParseError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


def _individual_iri(individual: Individual) -> str:
    return f"{IRI_PREFIX}{individual.cls.value}/{individual.name}"


def _class_iri(label: str) -> str:
    return f"{IRI_PREFIX}class/{label}"


def _property_iri(kind: PropertyKind) -> str:
    return f"{IRI_PREFIX}prop/{kind.value}"


def serialize_ntriples(store: TripleStore) -> bytes:
    """Sorted N-Triples dump: declarations first by IRI, then assertions."""
    lines = []
    class_labels = [cls.value for cls in OntologyClass] + sorted(store.subclass_labels())
    for label in class_labels:
        lines.append(f"<{_class_iri(label)}> <{RDF_TYPE}> <{OWL_CLASS}> .")
    for kind in PropertyKind:
        lines.append(f"<{_property_iri(kind)}> <{RDF_TYPE}> <{OWL_OBJECT_PROPERTY}> .")
    for individual in store.individuals.values():
        lines.append(
            f"<{_individual_iri(individual)}> <{RDF_TYPE}> <{_class_iri(individual.cls.value)}> ."
        )
        if individual.subclass:
            lines.append(
                f"<{_individual_iri(individual)}> <{RDF_TYPE}> <{_class_iri(individual.subclass)}> ."
            )
    for triple in store.triples:
        subject = store.individuals[triple.subject]
        obj = store.individuals[triple.object]
        lines.append(
            f"<{_individual_iri(subject)}> <{_property_iri(triple.predicate)}> "
            f"<{_individual_iri(obj)}> ."
        )
    return ("\n".join(sorted(lines)) + "\n").encode("utf-8")


_NT_LINE_RE = re.compile(r"^<([^<>]*)> <([^<>]*)> <([^<>]*)> \.$")


def _parse_individual_iri(iri: str, line_no: int) -> tuple[OntologyClass, str]:
    if not iri.startswith(IRI_PREFIX):
        raise NtriplesParseError(f"IRI outside the store prefix: {iri!r}", line_no)
    rest = iri[len(IRI_PREFIX):]
    cls_name, _, name = rest.partition("/")
    try:
        cls = OntologyClass(cls_name)
    except ValueError:
        raise NtriplesParseError(f"unknown class in IRI {iri!r}", line_no) from None
    if not name:
        raise NtriplesParseError(f"missing individual name in IRI {iri!r}", line_no)
    return cls, name


def parse_ntriples(data: bytes | str) -> TripleStore:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    store = TripleStore()
    pending_triples: list[tuple[int, str, str, str]] = []
    subclass_lines: list[tuple[int, str, str]] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        match = _NT_LINE_RE.match(line)
        if not match:
            raise NtriplesParseError("malformed N-Triples line", line_no)
        s_iri, p_iri, o_iri = match.groups()
        if p_iri == RDF_TYPE:
            if o_iri in (OWL_CLASS, OWL_OBJECT_PROPERTY):
                continue  # schema declarations are fixed
            if o_iri.startswith(f"{IRI_PREFIX}class/"):
                cls, name = _parse_individual_iri(s_iri, line_no)
                label = o_iri[len(f"{IRI_PREFIX}class/"):]
                if label == cls.value:
                    store.add_individual(name, cls)
                else:
                    subclass_lines.append((line_no, s_iri, label))
                continue
            raise NtriplesParseError(f"unknown type object {o_iri!r}", line_no)
        pending_triples.append((line_no, s_iri, p_iri, o_iri))

    for line_no, s_iri, label in subclass_lines:
        cls, name = _parse_individual_iri(s_iri, line_no)
        store.add_individual(name, cls, subclass=label)

    for line_no, s_iri, p_iri, o_iri in pending_triples:
        if not p_iri.startswith(f"{IRI_PREFIX}prop/"):
            raise NtriplesParseError(f"unknown predicate IRI {p_iri!r}", line_no)
        kind_name = p_iri[len(f"{IRI_PREFIX}prop/"):]
        try:
            kind = PropertyKind(kind_name)
        except ValueError:
            raise NtriplesParseError(f"unknown property {kind_name!r}", line_no) from None
        s_cls, s_name = _parse_individual_iri(s_iri, line_no)
        o_cls, o_name = _parse_individual_iri(o_iri, line_no)
        store.add_individual(s_name, s_cls)
        store.add_individual(o_name, o_cls)
        store.add_triple(s_name, kind, o_name)
    return store


# --- storytelling -------------------------------------------------------------

@dataclass(frozen=True)
class StoryPath:
    vulnerability: str
    exploit_target: str
    attack_impact: str
    cwes: tuple[str, ...]


@dataclass(frozen=True)
class StoryResult:
    start: str
    paths: tuple[StoryPath, ...]
    edges: tuple[tuple[str, str, str], ...]
    adjacency: dict[str, list[tuple[str, str]]]

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "paths": [
                {
                    "vulnerability": p.vulnerability,
                    "exploit_target": p.exploit_target,
                    "attack_impact": p.attack_impact,
                    "cwes": list(p.cwes),
                }
                for p in self.paths
            ],
            "edges": [list(edge) for edge in self.edges],
            "adjacency": {node: [list(link) for link in links] for node, links in self.adjacency.items()},
        }


def story(store: TripleStore, start: str) -> StoryResult:
    """All vulnerability->target->impact paths touching the start individual,
    with each vulnerability's CWE links as side edges."""
    if start not in store.individuals:
        raise StoreError(f"unknown individual {start!r}")
    cwe_links: dict[str, tuple[str, ...]] = {}
    for name, individual in store.individuals.items():
        if individual.cls is OntologyClass.VULNERABILITY:
            cwe_links[name] = tuple(
                sorted(
                    t.object
                    for t in store.matching(subject=name, predicate=PropertyKind.TARGETS_CWE)
                )
            )
    paths = []
    for exploits in store.matching(predicate=PropertyKind.EXPLOITS):
        vulnerability, target = exploits.subject, exploits.object
        for impact_triple in store.matching(
            subject=target, predicate=PropertyKind.HAS_ATTACK_IMPACT
        ):
            impact = impact_triple.object
            cwes = cwe_links.get(vulnerability, ())
            touched = {vulnerability, target, impact} | set(cwes)
            if start in touched:
                paths.append(
                    StoryPath(
                        vulnerability=vulnerability,
                        exploit_target=target,
                        attack_impact=impact,
                        cwes=cwes,
                    )
                )
    paths.sort(key=lambda p: (p.vulnerability, p.exploit_target, p.attack_impact))

    edges: list[tuple[str, str, str]] = []
    for path in paths:
        edges.append((path.vulnerability, PropertyKind.EXPLOITS.value, path.exploit_target))
        edges.append((path.exploit_target, PropertyKind.HAS_ATTACK_IMPACT.value, path.attack_impact))
        for cwe in path.cwes:
            edges.append((path.vulnerability, PropertyKind.TARGETS_CWE.value, cwe))
    unique_edges = tuple(sorted(set(edges)))

    adjacency: dict[str, list[tuple[str, str]]] = {}
    for subject, predicate, obj in unique_edges:
        adjacency.setdefault(subject, []).append((predicate, obj))
    for links in adjacency.values():
        links.sort()
    return StoryResult(
        start=start, paths=tuple(paths), edges=unique_edges, adjacency=adjacency
    )


def build_store(entries: Iterable[NlpEntry]) -> TripleStore:
    store = TripleStore()
    for entry in entries:
        assert_entry(store, entry)
    return store
