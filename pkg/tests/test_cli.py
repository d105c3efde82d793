"""CLI behavior: exit codes, artifact pipelines, golden-file stability."""

import json
from pathlib import Path

import pytest

from hwv2w.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestIngest:
    def test_three_item_fixture(self, tmp_path, capsys):
        out = tmp_path / "snap.json"
        code, stdout, _ = run(
            capsys, "ingest", "--nvd", FIXTURES / "nvd_3items.json",
            "--cwe", FIXTURES / "cwe_catalog.csv",
            "--hw-ids", FIXTURES / "hw_ids_test.txt",
            "--out", out, "--no-hw-filter",
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert len(payload["cves"]) == 2  # one item lacks an English description
        assert "skipped 1 items" in stdout

    def test_hw_filter_drops_untagged(self, tmp_path, capsys):
        out = tmp_path / "snap.json"
        code, stdout, _ = run(
            capsys, "ingest", "--nvd", FIXTURES / "nvd_pinned.json",
            "--cwe", FIXTURES / "cwe_catalog.csv",
            "--hw-ids", FIXTURES / "hw_ids_test.txt",
            "--out", out,
        )
        assert code == 0
        payload = json.loads(out.read_text())
        ids = [c["cve_id"] for c in payload["cves"]]
        assert "CVE-2019-9999" not in ids  # CWE-79 is not a hardware id
        assert len(ids) == 8

    def test_missing_feed_is_user_error(self, tmp_path, capsys):
        code, _, stderr = run(
            capsys, "ingest", "--nvd", tmp_path / "missing.json",
            "--cwe", FIXTURES / "cwe_catalog.csv", "--out", tmp_path / "s.json",
        )
        assert code == 1
        assert "missing.json" in stderr


class TestBuildArtifacts:
    def test_build_index_and_ontology(self, tmp_path, capsys):
        index_path = tmp_path / "i.hwvw"
        onto_path = tmp_path / "o.nt"
        assert run(
            capsys, "build-index", "--snapshot", FIXTURES / "pinned_snapshot.json",
            "--out", index_path,
        )[0] == 0
        assert index_path.read_bytes()[:4] == b"HWVW"
        assert run(
            capsys, "build-ontology", "--snapshot", FIXTURES / "pinned_snapshot.json",
            "--out", onto_path,
            "--cpe-dict", FIXTURES / "cpe_products.txt",
            "--gazetteer", FIXTURES / "gazetteer.csv",
        )[0] == 0
        assert b"hwv2w:/" in onto_path.read_bytes()


class TestAnalyze:
    def test_golden_json_matches_committed_file(self, capsys):
        code, stdout, _ = run(
            capsys, "analyze", "--index", FIXTURES / "pinned_index.hwvw",
            "--ontology", FIXTURES / "pinned_ontology.nt",
            "electromagnetic side-channel", "--json",
        )
        assert code == 0
        assert stdout == (FIXTURES / "golden_analyze.json").read_text()

    def test_json_output_byte_stable_across_runs(self, capsys):
        argv = [
            "analyze", "--index", FIXTURES / "pinned_index.hwvw",
            "--ontology", FIXTURES / "pinned_ontology.nt",
            "electromagnetic side-channel", "--json",
        ]
        first = run(capsys, *argv)
        second = run(capsys, *argv)
        assert first == second

    def test_human_readable_output(self, capsys):
        code, stdout, _ = run(
            capsys, "analyze", "--index", FIXTURES / "pinned_index.hwvw",
            "--ontology", FIXTURES / "pinned_ontology.nt",
            "electromagnetic side-channel",
        )
        assert code == 0
        assert "CVE-2020-6531" in stdout
        assert "modal CWE: CWE-203" in stdout

    def test_empty_query_is_user_error(self, capsys):
        code, _, stderr = run(
            capsys, "analyze", "--index", FIXTURES / "pinned_index.hwvw",
            "--ontology", FIXTURES / "pinned_ontology.nt", "of the and",
        )
        assert code == 1
        assert "no content terms" in stderr


class TestQuery:
    def test_rows_printed(self, capsys):
        code, stdout, _ = run(
            capsys, "query", "--ontology", FIXTURES / "pinned_ontology.nt",
            "SELECT ?v WHERE { ?v TargetsCWE CWE-203 }",
        )
        assert code == 0
        assert "CVE-2020-6531" in stdout
        assert "(3 rows)" in stdout

    def test_missing_ontology_file_is_user_error(self, tmp_path, capsys):
        code, _, stderr = run(
            capsys, "query", "--ontology", tmp_path / "missing.nt", "SELECT ?v WHERE { ?v Exploits ?t }"
        )
        assert code == 1
        assert "missing.nt" in stderr

    def test_parse_error_is_user_error(self, capsys):
        code, _, stderr = run(
            capsys, "query", "--ontology", FIXTURES / "pinned_ontology.nt", "SELECT ?x WHERE { }"
        )
        assert code == 1
        assert "no patterns" in stderr


class TestTrainEvaluate:
    def test_train_then_evaluate(self, tmp_path, capsys):
        tree_path = tmp_path / "tree.json"
        text_path = tmp_path / "tree.txt"
        code, stdout, _ = run(
            capsys, "train", "--snapshot", FIXTURES / "pinned_snapshot.json",
            "--out", tree_path, "--text", text_path,
        )
        assert code == 0
        assert "leaves" in stdout
        assert "gini=" in text_path.read_text()
        code, stdout, _ = run(
            capsys, "evaluate", "--tree", tree_path,
            "--snapshot", FIXTURES / "pinned_snapshot.json", "--json",
        )
        assert code == 0
        payload = json.loads(stdout)
        assert payload["accuracy"] == 1.0  # consistent labels, small corpus


class TestMitigate:
    def test_fixture_mode(self, capsys, no_network):
        code, stdout, _ = run(
            capsys, "mitigate", "electromagnetic side-channel",
            "--cwe", "CWE-203", "--fixture-dir", FIXTURES / "advisor", "--json",
        )
        assert code == 0
        payload = json.loads(stdout)
        assert payload["source_urls"] == ["https://cwe.mitre.org/data/definitions/203.html"]
        assert "Separation of Privilege" in payload["response"]

    def test_fixture_mode_requires_dir(self, capsys):
        code, _, stderr = run(capsys, "mitigate", "flaw", "--cwe", "CWE-203")
        assert code == 1
        assert "fixture-dir" in stderr


class TestServeConfig:
    def test_bad_config_is_user_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("snapshot = missing.json\nindex = missing\nontology = missing\n")
        code, _, stderr = run(capsys, "serve", "--config", bad)
        assert code == 1
        assert "does not exist" in stderr
