"""Mitigation lookup: fetch CWE definition pages, extract the potential
mitigations section, assemble the advisory prompt and obtain a completion.

A FIXTURE provider mode serves committed page snapshots and canned
completions so the whole flow runs offline and deterministically.
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from html.parser import HTMLParser
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .ingest import CWE_ID_RE, cwe_catalog_url

logger = logging.getLogger(__name__)

FIXTURE_DEFAULT_RESPONSE = "FIXTURE-RESPONSE"
MITIGATIONS_ELEMENT_ID = "Potential_Mitigations"


class AdvisorError(Exception):
    pass


class ConfigurationError(AdvisorError):
    pass


class FetchError(AdvisorError):
    def __init__(self, message: str, status: int | None = None, retryable: bool = False):
        super().__init__(message)
        self.status = status
        self.retryable = retryable


class TemplateError(AdvisorError):
    pass


class LlmError(AdvisorError):
    def __init__(self, message: str, prompt: str | None = None):
        super().__init__(message)
        self.prompt = prompt


class LlmAuthError(LlmError):
    pass


class LlmQuotaError(LlmError):
    pass


class LlmTimeoutError(LlmError):
    pass


class LlmProtocolError(LlmError):
    pass


class ProviderMode(str, Enum):
    LIVE = "LIVE"
    FIXTURE = "FIXTURE"


@dataclass(frozen=True)
class LlmConfig:
    api_key_env_name: str = "OPENAI_API_KEY"
    model_id: str = "gpt-3.5-turbo"
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    timeout: float = 30.0
    provider_mode: ProviderMode = ProviderMode.FIXTURE


@dataclass(frozen=True)
class AdvisorConfig:
    llm: LlmConfig = LlmConfig()
    fixture_dir: Path | None = None
    cache_dir: Path | None = None
    cache_ttl_seconds: float = 86400.0
    user_agent: str = "hwv2w-advisor/0.1"
    fetch_workers: int = 4


@dataclass(frozen=True)
class MitigationSection:
    phase: str
    strategy: str | None
    body: str


@dataclass
class MitigationDoc:
    cwe_id: str
    raw_html: bytes
    sections: list[MitigationSection]
    mitigation_html: str  # raw markup of the mitigations element, "" when absent
    missing_section: bool = False


# --- HTML extraction ---------------------------------------------------------

_VOID_TAGS = frozenset(
    "area base br col embed hr img input link meta param source track wbr".split()
)


class _ElementSpanFinder(HTMLParser):
    """Locates the byte span of the element carrying the wanted id attribute."""

    def __init__(self, text: str, target_id: str):
        super().__init__(convert_charrefs=True)
        self.text = text
        self.target_id = target_id
        self.line_offsets = [0]
        for line in text.splitlines(keepends=True):
            self.line_offsets.append(self.line_offsets[-1] + len(line))
        self.start: int | None = None
        self.end: int | None = None
        self.depth = 0

    def _offset(self) -> int:
        line, column = self.getpos()
        return self.line_offsets[line - 1] + column

    def handle_starttag(self, tag, attrs):
        if self.end is not None:
            return
        if self.start is None:
            if dict(attrs).get("id") == self.target_id:
                self.start = self._offset()
                self.depth = 0 if tag in _VOID_TAGS else 1
                if self.depth == 0:
                    self.end = self.text.index(">", self.start) + 1
        elif tag not in _VOID_TAGS:
            self.depth += 1

    def handle_startendtag(self, tag, attrs):
        if self.start is None and self.end is None and dict(attrs).get("id") == self.target_id:
            self.start = self._offset()
            self.end = self.text.index(">", self.start) + 1

    def handle_endtag(self, tag):
        if self.start is None or self.end is not None or tag in _VOID_TAGS:
            return
        self.depth -= 1
        if self.depth == 0:
            self.end = self.text.index(">", self._offset()) + 1


@dataclass
class _Element:
    tag: str
    attrs: dict
    children: list = field(default_factory=list)  # _Element or str

    def iter_elements(self):
        for child in self.children:
            if isinstance(child, _Element):
                yield child
                yield from child.iter_elements()

    def text(self) -> str:
        parts = []
        for child in self.children:
            if isinstance(child, str):
                parts.append(child)
            else:
                # element boundaries separate words in the rendered page
                parts.append(" " + child.text() + " ")
        return "".join(parts)


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = _Element(tag="#root", attrs={})
        self.stack = [self.root]

    def handle_starttag(self, tag, attrs):
        element = _Element(tag=tag, attrs=dict(attrs))
        self.stack[-1].children.append(element)
        if tag not in _VOID_TAGS:
            self.stack.append(element)

    def handle_startendtag(self, tag, attrs):
        self.stack[-1].children.append(_Element(tag=tag, attrs=dict(attrs)))

    def handle_endtag(self, tag):
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return
        # stray end tag: ignore

    def handle_data(self, data):
        if data:
            self.stack[-1].children.append(data)


def _normalize_ws(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def extract_potential_mitigations(raw_html: bytes | str) -> tuple[list[MitigationSection], str, bool]:
    """Extract (sections, raw fragment markup, missing flag) from a CWE page.

    Each table row inside the mitigations element yields one section; the
    phase and optional strategy come from their subheadings and the body is
    the row's whitespace-normalized visible text.
    """
    text = raw_html.decode("utf-8", errors="replace") if isinstance(raw_html, (bytes, bytearray)) else raw_html
    finder = _ElementSpanFinder(text, MITIGATIONS_ELEMENT_ID)
    finder.feed(text)
    if finder.start is None or finder.end is None:
        logger.warning("page has no %s element", MITIGATIONS_ELEMENT_ID)
        return [], "", True
    fragment = text[finder.start : finder.end]

    builder = _TreeBuilder()
    builder.feed(fragment)
    sections: list[MitigationSection] = []
    for row in (el for el in builder.root.iter_elements() if el.tag == "tr"):
        phase = None
        strategy = None
        for el in row.iter_elements():
            cls = el.attrs.get("class", "")
            if phase is None and cls == "subheading":
                heading = _normalize_ws(el.text())
                for prefix in ("Phases:", "Phase:"):
                    if heading.startswith(prefix):
                        phase = heading[len(prefix):].strip()
                        break
            elif strategy is None and cls == "suboptheading":
                heading = _normalize_ws(el.text())
                if heading.startswith("Strategy:"):
                    strategy = heading[len("Strategy:"):].strip()
        if not phase:
            continue
        sections.append(
            MitigationSection(phase=phase, strategy=strategy, body=_normalize_ws(row.text()))
        )
    return sections, fragment, False


# --- page fetching -----------------------------------------------------------

def _cwe_number(cwe_id: str) -> str:
    if not CWE_ID_RE.match(cwe_id):
        raise ValueError(f"bad CWE identifier {cwe_id!r}")
    return cwe_id.split("-", 1)[1]


def fetch_cwe_page(cwe_id: str, config: AdvisorConfig) -> bytes:
    """Page bytes for the canonical definition URL; FIXTURE reads a snapshot."""
    number = _cwe_number(cwe_id)
    if config.llm.provider_mode is ProviderMode.FIXTURE:
        if config.fixture_dir is None:
            raise ConfigurationError("FIXTURE mode needs a fixture directory")
        page = Path(config.fixture_dir) / "cwe_pages" / f"{number}.html"
        if not page.is_file():
            raise ConfigurationError(f"no fixture page for {cwe_id} at {page}")
        return page.read_bytes()

    if config.cache_dir is not None:
        cached = Path(config.cache_dir) / f"{number}.html"
        if cached.is_file() and time.time() - cached.stat().st_mtime < config.cache_ttl_seconds:
            return cached.read_bytes()

    import requests

    url = cwe_catalog_url(cwe_id)
    try:
        response = requests.get(
            url, headers={"User-Agent": config.user_agent}, timeout=config.llm.timeout
        )
    except requests.RequestException as exc:
        raise FetchError(f"{cwe_id}: fetch failed: {exc}", retryable=True) from exc
    if response.status_code >= 400:
        raise FetchError(
            f"{cwe_id}: HTTP {response.status_code} from {url}",
            status=response.status_code,
            retryable=response.status_code >= 500,
        )
    if config.cache_dir is not None:
        Path(config.cache_dir).mkdir(parents=True, exist_ok=True)
        (Path(config.cache_dir) / f"{number}.html").write_bytes(response.content)
    return response.content


def fetch_mitigation_doc(cwe_id: str, config: AdvisorConfig) -> MitigationDoc:
    raw = fetch_cwe_page(cwe_id, config)
    sections, fragment, missing = extract_potential_mitigations(raw)
    return MitigationDoc(
        cwe_id=cwe_id,
        raw_html=raw,
        sections=sections,
        mitigation_html=fragment,
        missing_section=missing,
    )


# --- prompt assembly ---------------------------------------------------------

def default_template() -> str:
    return resources.files("hwv2w.data").joinpath("prompt_template.txt").read_text("utf-8")


@dataclass(frozen=True)
class PromptBundle:
    template: str
    description: str
    mitigation_blocks: tuple[tuple[str, str], ...]
    rendered: str


def build_prompt(template: str, description: str, docs: Sequence[MitigationDoc]) -> PromptBundle:
    """Substitute the description and per-CWE mitigation blocks into the template."""
    for placeholder in ("{description}", "{mitigation_info}"):
        if template.count(placeholder) != 1:
            raise TemplateError(f"template must contain {placeholder} exactly once")
    blocks = tuple(
        (
            doc.cwe_id,
            f"- CWE {_cwe_number(doc.cwe_id)} - Potential Mitigation:\n{doc.mitigation_html}",
        )
        for doc in docs
    )
    mitigation_info = "\n\n".join(text for _, text in blocks)
    rendered = template.replace("{mitigation_info}", mitigation_info).replace(
        "{description}", description
    )
    return PromptBundle(
        template=template,
        description=description,
        mitigation_blocks=blocks,
        rendered=rendered,
    )


# --- completion providers ------------------------------------------------------

def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class FixtureProvider:
    """Replays canned completions keyed by prompt digest."""

    def __init__(self, responses: Mapping[str, str] | None = None, directory: Path | None = None):
        self.responses = dict(responses or {})
        self.directory = Path(directory) if directory else None

    def complete(self, prompt: str) -> str:
        digest = prompt_digest(prompt)
        if digest in self.responses:
            return self.responses[digest]
        if self.directory is not None:
            named = self.directory / f"{digest}.txt"
            if named.is_file():
                return named.read_text("utf-8")
            fallback = self.directory / "default.txt"
            if fallback.is_file():
                return fallback.read_text("utf-8")
        return self.responses.get("default", FIXTURE_DEFAULT_RESPONSE)


class LiveProvider:
    """Chat-completions HTTP client: one user message, first choice text."""

    def __init__(self, config: LlmConfig):
        self.config = config

    def complete(self, prompt: str) -> str:
        import requests

        api_key = os.environ.get(self.config.api_key_env_name)
        if not api_key:
            raise ConfigurationError(
                f"environment variable {self.config.api_key_env_name} is not set"
            )
        try:
            response = requests.post(
                self.config.endpoint_url,
                json={
                    "model": self.config.model_id,
                    "messages": [{"role": "user", "content": prompt}],
                },
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=self.config.timeout,
            )
        except requests.Timeout as exc:
            raise LlmTimeoutError(f"completion timed out: {exc}", prompt=prompt) from exc
        except requests.RequestException as exc:
            raise LlmError(f"completion request failed: {exc}", prompt=prompt) from exc
        if response.status_code in (401, 403):
            raise LlmAuthError(f"authentication failed: HTTP {response.status_code}", prompt=prompt)
        if response.status_code == 429:
            raise LlmQuotaError("quota or rate limit exceeded", prompt=prompt)
        if response.status_code >= 400:
            raise LlmError(f"completion failed: HTTP {response.status_code}", prompt=prompt)
        try:
            payload = response.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise LlmProtocolError(f"response missing completion content: {exc}", prompt=prompt) from exc
        if not isinstance(content, str):
            raise LlmProtocolError("completion content is not text", prompt=prompt)
        return content


def make_provider(config: AdvisorConfig, responses: Mapping[str, str] | None = None):
    if config.llm.provider_mode is ProviderMode.FIXTURE:
        directory = Path(config.fixture_dir) / "llm_responses" if config.fixture_dir else None
        return FixtureProvider(responses=responses, directory=directory)
    return LiveProvider(config.llm)


def get_llm_response(
    config: AdvisorConfig, prompt: str, responses: Mapping[str, str] | None = None
) -> str:
    return make_provider(config, responses).complete(prompt)


# --- end-to-end ---------------------------------------------------------------

@dataclass
class SuggestResult:
    prompt: str
    response: str
    source_urls: list[str]
    warnings: list[str] = field(default_factory=list)


def suggest(
    cwe_ids: Sequence[str],
    description: str,
    config: AdvisorConfig,
    template: str | None = None,
    responses: Mapping[str, str] | None = None,
) -> SuggestResult:
    """Fetch and extract each CWE page, build the prompt, get one completion."""
    if not cwe_ids:
        raise ValueError("at least one CWE id is required")
    template = template if template is not None else default_template()

    docs: list[MitigationDoc | None] = [None] * len(cwe_ids)
    failures: list[str] = []
    workers = max(1, min(config.fetch_workers, len(cwe_ids)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {
            pool.submit(fetch_mitigation_doc, cwe_id, config): position
            for position, cwe_id in enumerate(cwe_ids)
        }
        for future, position in futures.items():
            try:
                docs[position] = future.result()
            except AdvisorError as exc:
                failures.append(f"{cwe_ids[position]}: {exc}")
    fetched = [doc for doc in docs if doc is not None]
    if not fetched:
        raise FetchError(
            "all CWE page fetches failed: " + "; ".join(failures), retryable=True
        )
    warnings = list(failures)
    for doc in fetched:
        if doc.missing_section:
            warnings.append(f"{doc.cwe_id}: page has no potential mitigations section")

    bundle = build_prompt(template, description, fetched)
    response = get_llm_response(config, bundle.rendered, responses)
    return SuggestResult(
        prompt=bundle.rendered,
        response=response,
        source_urls=[cwe_catalog_url(doc.cwe_id) for doc in fetched],
        warnings=warnings,
    )
