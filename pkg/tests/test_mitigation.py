"""Mitigation advisor tests: page snapshot extraction, prompt assembly,
provider behavior and the end-to-end suggest flow, all fully offline."""

import re
from pathlib import Path

import pytest

from hwv2w.mitigation import (
    FIXTURE_DEFAULT_RESPONSE,
    AdvisorConfig,
    ConfigurationError,
    FetchError,
    FixtureProvider,
    LiveProvider,
    LlmConfig,
    ProviderMode,
    TemplateError,
    build_prompt,
    default_template,
    extract_potential_mitigations,
    fetch_cwe_page,
    fetch_mitigation_doc,
    get_llm_response,
    prompt_digest,
    suggest,
)

FIXTURES = Path(__file__).parent / "fixtures" / "advisor"


def fixture_config(**kw):
    return AdvisorConfig(
        llm=LlmConfig(provider_mode=ProviderMode.FIXTURE),
        fixture_dir=FIXTURES,
        **kw,
    )


class TestExtraction:
    def test_cwe_203_sections(self):
        raw = (FIXTURES / "cwe_pages" / "203.html").read_bytes()
        sections, fragment, missing = extract_potential_mitigations(raw)
        assert not missing
        assert [(s.phase, s.strategy) for s in sections] == [
            ("Architecture and Design", "Separation of Privilege"),
            ("Implementation", None),
        ]
        assert "Separation of Privilege" in sections[0].body
        assert "Compartmentalize the system" in sections[0].body
        assert "error messages" in sections[1].body

    def test_cwe_276_sections(self):
        raw = (FIXTURES / "cwe_pages" / "276.html").read_bytes()
        sections, _, missing = extract_potential_mitigations(raw)
        assert not missing
        assert [(s.phase, s.strategy) for s in sections] == [
            ("Architecture and Design; Operation", None),
            ("Architecture and Design", "Separation of Privilege"),
        ]

    def test_sections_preserve_page_order(self):
        raw = (FIXTURES / "cwe_pages" / "276.html").read_bytes()
        sections, _, _ = extract_potential_mitigations(raw)
        assert sections[0].phase.startswith("Architecture and Design; Operation")

    def test_no_tags_in_bodies(self):
        for page in ("203.html", "276.html"):
            sections, _, _ = extract_potential_mitigations((FIXTURES / "cwe_pages" / page).read_bytes())
            for section in sections:
                assert not re.search(r"<[A-Za-z]", section.body)
                assert section.phase

    def test_missing_element_is_warning_not_error(self):
        sections, fragment, missing = extract_potential_mitigations(b"<html><body>nothing</body></html>")
        assert sections == []
        assert fragment == ""
        assert missing

    def test_extraction_is_pure(self):
        raw = (FIXTURES / "cwe_pages" / "203.html").read_bytes()
        assert extract_potential_mitigations(raw) == extract_potential_mitigations(raw)

    def test_fragment_is_verbatim_slice(self):
        raw = (FIXTURES / "cwe_pages" / "203.html").read_bytes()
        _, fragment, _ = extract_potential_mitigations(raw)
        assert fragment.startswith('<div id="Potential_Mitigations">')
        assert fragment.encode() in raw


class TestFetch:
    def test_fixture_page(self, no_network):
        raw = fetch_cwe_page("CWE-203", fixture_config())
        assert b"Potential_Mitigations" in raw

    def test_missing_fixture_is_configuration_error(self, no_network):
        with pytest.raises(ConfigurationError, match="CWE-9999"):
            fetch_cwe_page("CWE-9999", fixture_config())

    def test_fixture_mode_without_dir_rejected(self, no_network):
        config = AdvisorConfig(llm=LlmConfig(provider_mode=ProviderMode.FIXTURE))
        with pytest.raises(ConfigurationError, match="fixture"):
            fetch_cwe_page("CWE-203", config)

    def test_live_cache_hit_avoids_network(self, tmp_path, no_network):
        cache = tmp_path / "cache"
        cache.mkdir()
        (cache / "203.html").write_bytes((FIXTURES / "cwe_pages" / "203.html").read_bytes())
        config = AdvisorConfig(
            llm=LlmConfig(provider_mode=ProviderMode.LIVE), cache_dir=cache
        )
        raw = fetch_cwe_page("CWE-203", config)
        assert b"Potential_Mitigations" in raw

    def test_doc_carries_sections_and_fragment(self, no_network):
        doc = fetch_mitigation_doc("CWE-276", fixture_config())
        assert doc.cwe_id == "CWE-276"
        assert len(doc.sections) == 2
        assert doc.mitigation_html.startswith('<div id="Potential_Mitigations">')


class TestBuildPrompt:
    def test_template_label_line_and_block(self, no_network):
        doc = fetch_mitigation_doc("CWE-203", fixture_config())
        bundle = build_prompt(default_template(), "electromagnetic side-channel", [doc])
        assert "Vulnerbility Descreption:electromagnetic side-channel" in bundle.rendered
        assert "- CWE 203 - Potential Mitigation:\n<div id=\"Potential_Mitigations\">" in bundle.rendered
        assert bundle.rendered.count("electromagnetic side-channel") == 1

    def test_empty_docs_list_still_valid(self):
        bundle = build_prompt(default_template(), "some flaw", [])
        assert "CWE Mitigation Information(HTML):" in bundle.rendered
        assert bundle.mitigation_blocks == ()

    def test_two_docs_in_input_order(self, no_network):
        config = fixture_config()
        docs = [fetch_mitigation_doc("CWE-203", config), fetch_mitigation_doc("CWE-276", config)]
        bundle = build_prompt(default_template(), "fault inject during the execution", docs)
        first = bundle.rendered.index("- CWE 203 - Potential Mitigation:")
        second = bundle.rendered.index("- CWE 276 - Potential Mitigation:")
        assert first < second

    def test_missing_placeholder_named(self):
        with pytest.raises(TemplateError, match="mitigation_info"):
            build_prompt("only {description} here", "x", [])
        with pytest.raises(TemplateError, match="description"):
            build_prompt("only {mitigation_info} here", "x", [])

    def test_description_appears_exactly_once(self, no_network):
        doc = fetch_mitigation_doc("CWE-276", fixture_config())
        marker = "zz-unique-description-marker-zz"
        bundle = build_prompt(default_template(), marker, [doc])
        assert bundle.rendered.count(marker) == 1


class TestProviders:
    def test_fixture_registered_digest(self):
        provider = FixtureProvider(responses={prompt_digest("p1"): "canned"})
        assert provider.complete("p1") == "canned"

    def test_fixture_default_literal(self):
        assert FixtureProvider().complete("anything") == FIXTURE_DEFAULT_RESPONSE

    def test_fixture_directory_lookup(self, no_network):
        doc = fetch_mitigation_doc("CWE-203", fixture_config())
        bundle = build_prompt(default_template(), "electromagnetic side-channel", [doc])
        provider = FixtureProvider(directory=FIXTURES / "llm_responses")
        response = provider.complete(bundle.rendered)
        assert "Separation of Privilege" in response
        assert response.rstrip().endswith("https://cwe.mitre.org/data/definitions/203.html")

    def test_live_unset_key_fails_before_network(self, no_network, monkeypatch):
        monkeypatch.delenv("TEST_LLM_KEY", raising=False)
        provider = LiveProvider(LlmConfig(api_key_env_name="TEST_LLM_KEY", provider_mode=ProviderMode.LIVE))
        with pytest.raises(ConfigurationError, match="TEST_LLM_KEY"):
            provider.complete("prompt")

    def test_get_llm_response_dispatch(self):
        config = fixture_config()
        assert get_llm_response(config, "unregistered") == FIXTURE_DEFAULT_RESPONSE


class TestSuggest:
    def test_single_cwe_source_url(self, no_network):
        result = suggest(["CWE-203"], "electromagnetic side-channel", fixture_config())
        assert result.source_urls == ["https://cwe.mitre.org/data/definitions/203.html"]
        assert "Separation of Privilege" in result.response  # registered canned reply

    def test_two_cwes_both_blocks(self, no_network):
        result = suggest(
            ["CWE-203", "CWE-276"], "fault inject during the execution", fixture_config()
        )
        assert "- CWE 203 - Potential Mitigation:" in result.prompt
        assert "- CWE 276 - Potential Mitigation:" in result.prompt
        assert result.source_urls == [
            "https://cwe.mitre.org/data/definitions/203.html",
            "https://cwe.mitre.org/data/definitions/276.html",
        ]
        assert result.response == FIXTURE_DEFAULT_RESPONSE  # no canned reply registered

    def test_empty_id_list_rejected(self, no_network):
        with pytest.raises(ValueError):
            suggest([], "flaw", fixture_config())

    def test_partial_fetch_failure_continues(self, no_network):
        result = suggest(["CWE-203", "CWE-9999"], "flaw", fixture_config())
        assert result.source_urls == ["https://cwe.mitre.org/data/definitions/203.html"]
        assert any("CWE-9999" in w for w in result.warnings)

    def test_all_fetches_failing_aggregates(self, no_network):
        with pytest.raises(FetchError, match="all CWE page fetches failed"):
            suggest(["CWE-8888", "CWE-9999"], "flaw", fixture_config())

    def test_fixture_flow_is_deterministic(self, no_network):
        first = suggest(["CWE-203"], "electromagnetic side-channel", fixture_config())
        second = suggest(["CWE-203"], "electromagnetic side-channel", fixture_config())
        assert first.prompt == second.prompt
        assert first.response == second.response
        assert first.source_urls == second.source_urls
