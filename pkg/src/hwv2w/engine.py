"""Engine shell: configuration file handling, artifact loading and the
end-to-end analysis pipeline shared by the CLI and the HTTP service.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from . import entitymodel, ingest, ontology, severity
from .entitymodel import (
    EntityDictionaries,
    SimilarityIndex,
    SimilarityMatch,
    rank_similar,
)
from .mitigation import AdvisorConfig, LlmConfig, ProviderMode, SuggestResult, suggest
from .ontology import PropertyKind, StoryResult, TripleStore
from .severity import ScoreTriple


class EngineError(Exception):
    pass


class ConfigError(EngineError):
    pass


@dataclass
class EngineConfig:
    snapshot_path: Path
    index_path: Path
    ontology_path: Path
    k: int = entitymodel.DEFAULT_TOP_K
    hw_ids_path: Path | None = None
    cpe_dictionary_path: Path | None = None
    gazetteer_path: Path | None = None
    tree_path: Path | None = None
    prompt_template_path: Path | None = None
    fixture_dir: Path | None = None
    cache_dir: Path | None = None
    static_dir: Path | None = None
    bind_host: str = "127.0.0.1"
    bind_port: int = 8571
    llm_mode: str = "FIXTURE"
    llm_model: str = "gpt-3.5-turbo"
    llm_endpoint: str = "https://api.openai.com/v1/chat/completions"
    llm_api_key_env: str = "OPENAI_API_KEY"
    llm_timeout: float = 30.0

    _PATH_KEYS = {
        "snapshot": "snapshot_path",
        "index": "index_path",
        "ontology": "ontology_path",
        "hw_ids": "hw_ids_path",
        "cpe_dictionary": "cpe_dictionary_path",
        "gazetteer": "gazetteer_path",
        "tree": "tree_path",
        "prompt_template": "prompt_template_path",
        "fixture_dir": "fixture_dir",
        "cache_dir": "cache_dir",
        "static_dir": "static_dir",
    }

    @classmethod
    def from_file(cls, path) -> "EngineConfig":
        """Parse the key = value config format (comments with '#')."""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        base = path.parent
        values: dict[str, str] = {}
        for line_no, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()

        kwargs = {}
        for key, value in values.items():
            if key in cls._PATH_KEYS:
                kwargs[cls._PATH_KEYS[key]] = (base / value).resolve()
            elif key == "k":
                kwargs["k"] = int(value)
            elif key == "bind":
                host, _, port = value.rpartition(":")
                kwargs["bind_host"] = host or "127.0.0.1"
                kwargs["bind_port"] = int(port)
            elif key == "llm_mode":
                if value.upper() not in ("LIVE", "FIXTURE"):
                    raise ConfigError(f"llm_mode must be LIVE or FIXTURE, got {value!r}")
                kwargs["llm_mode"] = value.upper()
            elif key == "llm_model":
                kwargs["llm_model"] = value
            elif key == "llm_endpoint":
                kwargs["llm_endpoint"] = value
            elif key == "llm_api_key_env":
                kwargs["llm_api_key_env"] = value
            elif key == "llm_timeout":
                kwargs["llm_timeout"] = float(value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        for required in ("snapshot_path", "index_path", "ontology_path"):
            if required not in kwargs:
                raise ConfigError(f"config is missing the {required.removesuffix('_path')} path")
        config = cls(**kwargs)
        config.check_paths()
        return config

    def check_paths(self) -> None:
        for label, value in (
            ("snapshot", self.snapshot_path),
            ("index", self.index_path),
            ("ontology", self.ontology_path),
            ("hw_ids", self.hw_ids_path),
            ("cpe_dictionary", self.cpe_dictionary_path),
            ("gazetteer", self.gazetteer_path),
            ("tree", self.tree_path),
            ("prompt_template", self.prompt_template_path),
            ("fixture_dir", self.fixture_dir),
        ):
            if value is not None and not Path(value).exists():
                raise ConfigError(f"{label} path does not exist: {value}")
        if self.cache_dir is not None:
            Path(self.cache_dir).mkdir(parents=True, exist_ok=True)

    def advisor_config(self) -> AdvisorConfig:
        return AdvisorConfig(
            llm=LlmConfig(
                api_key_env_name=self.llm_api_key_env,
                model_id=self.llm_model,
                endpoint_url=self.llm_endpoint,
                timeout=self.llm_timeout,
                provider_mode=ProviderMode(self.llm_mode),
            ),
            fixture_dir=self.fixture_dir,
            cache_dir=self.cache_dir,
        )


def load_dictionaries(
    cpe_path: Path | None, gazetteer_path: Path | None
) -> EntityDictionaries:
    cpe_products: frozenset[str] = frozenset()
    gazetteer: dict[str, str] = {}
    if cpe_path is not None:
        cpe_products = frozenset(
            line.strip().lower()
            for line in Path(cpe_path).read_text("utf-8").splitlines()
            if line.strip()
        )
    if gazetteer_path is not None:
        for line_no, line in enumerate(Path(gazetteer_path).read_text("utf-8").splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            surface, _, kind = line.rpartition(",")
            kind = kind.strip().upper()
            if not surface or kind not in ("ORG", "PERSON"):
                raise ConfigError(f"{gazetteer_path}:{line_no}: expected 'surface,ORG|PERSON'")
            gazetteer[surface.strip()] = kind
    return EntityDictionaries(cpe_products=cpe_products, gazetteer=gazetteer)


@dataclass
class AnalysisReport:
    query: str
    matches: list[SimilarityMatch]
    cwe_distribution: dict[str, int]
    modal_cwe: str
    predicted_vector: ingest.CvssVector | None
    scores: ScoreTriple | None
    story: StoryResult | None
    mitigation: SuggestResult | None = None

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "matches": [
                {
                    "cve_id": m.cve_id,
                    "similarity": m.similarity,
                    "relevance_band": m.relevance_band.value,
                    "cwe_ids": list(m.cwe_ids),
                    "description": m.description,
                    "cvss_vector": m.cvss_vector.canonical() if m.cvss_vector else None,
                }
                for m in self.matches
            ],
            "cwe_distribution": dict(sorted(self.cwe_distribution.items())),
            "modal_cwe": self.modal_cwe,
            "predicted_vector": self.predicted_vector.canonical() if self.predicted_vector else None,
            "scores": (
                {
                    "exploitability": self.scores.exploitability,
                    "impact": self.scores.impact,
                    "base": self.scores.base,
                    "rating": self.scores.rating.value,
                }
                if self.scores
                else None
            ),
            "story": self.story.to_dict() if self.story else None,
            "mitigation": (
                {
                    "prompt": self.mitigation.prompt,
                    "response": self.mitigation.response,
                    "source_urls": self.mitigation.source_urls,
                    "warnings": self.mitigation.warnings,
                }
                if self.mitigation
                else None
            ),
        }


def modal_exploit_target(store: TripleStore, cve_ids: list[str]) -> str | None:
    """Most common exploit target among the matched vulnerabilities."""
    counts: Counter = Counter()
    for cve_id in cve_ids:
        if cve_id in store.individuals:
            for triple in store.matching(subject=cve_id, predicate=PropertyKind.EXPLOITS):
                counts[triple.object] += 1
    if not counts:
        return None
    top = max(counts.values())
    return min(name for name, count in counts.items() if count == top)


def analyze_description(
    index: SimilarityIndex,
    store: TripleStore,
    description: str,
    k: int = entitymodel.DEFAULT_TOP_K,
) -> AnalysisReport:
    """rank -> CWE distribution -> majority vector -> scores -> story."""
    matches = rank_similar(description, index, k)
    distribution, modal_cwe = entitymodel.cwe_distribution(matches)
    try:
        vector = severity.majority_vector(matches)
        scores = severity.base_score(vector)
    except ValueError:
        vector = None
        scores = None
    target = modal_exploit_target(store, [m.cve_id for m in matches])
    story_result = ontology.story(store, target) if target else None
    return AnalysisReport(
        query=description,
        matches=matches,
        cwe_distribution=distribution,
        modal_cwe=modal_cwe,
        predicted_vector=vector,
        scores=scores,
        story=story_result,
    )


class Engine:
    """Loaded artifacts plus the operations the service and CLI expose."""

    def __init__(self, config: EngineConfig):
        self.config = config
        self.snapshot = ingest.load_snapshot(config.snapshot_path)
        self.index = entitymodel.load_index(config.index_path)
        self.store = ontology.parse_ntriples(Path(config.ontology_path).read_bytes())
        self.tree = severity.load_tree(config.tree_path) if config.tree_path else None
        self.template = (
            Path(config.prompt_template_path).read_text("utf-8")
            if config.prompt_template_path
            else None
        )

    def analyze(self, description: str, k: int | None = None) -> AnalysisReport:
        return analyze_description(
            self.index, self.store, description, k or self.config.k
        )

    def mitigate(self, description: str, cwe_ids: list[str]) -> SuggestResult:
        return suggest(
            cwe_ids, description, self.config.advisor_config(), template=self.template
        )

    def run_query(self, query_text: str) -> ontology.BindingSet:
        return ontology.query(self.store, ontology.parse_query(query_text))

    def ontology_stats(self) -> ontology.OntologyStats:
        return ontology.stats(self.store)

    def corpus_info(self) -> dict:
        return {
            "version_tag": self.snapshot.version_tag,
            "created_at": self.snapshot.created_at,
            "cve_count": len(self.snapshot.cves),
            "cwe_count": len(self.snapshot.cwes),
            "indexed_documents": len(self.index),
        }


def report_json(report: AnalysisReport) -> str:
    """Stable serialization used by the CLI and golden tests."""
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
