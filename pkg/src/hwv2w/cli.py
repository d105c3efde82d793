"""Command line interface: ingest catalogs, build artifacts, run analyses,
query the ontology, train/evaluate the severity tree, request mitigations,
and serve the HTTP API.

Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from . import engine as engine_mod
from . import entitymodel, ingest, ontology, severity
from .engine import ConfigError, EngineConfig, analyze_description, load_dictionaries, report_json
from .mitigation import (
    AdvisorConfig,
    AdvisorError,
    LlmConfig,
    ProviderMode,
    suggest,
)


class UserError(Exception):
    pass


def _read_bytes(path: str) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise UserError(f"file not found: {path}")
    return p.read_bytes()


def cmd_ingest(args) -> int:
    records: dict[str, ingest.CveRecord] = {}
    order: list[str] = []
    skipped = 0
    warnings: list[str] = []
    for feed_path in args.nvd:
        result = ingest.parse_nvd_feed(_read_bytes(feed_path))
        skipped += result.skipped_no_description
        warnings.extend(result.warnings)
        for record in result.records:
            if record.cve_id not in records:
                order.append(record.cve_id)
            records[record.cve_id] = record  # newest feed wins
    cwes = ingest.parse_cwe_catalog(_read_bytes(args.cwe))

    if args.hw_ids:
        hw_ids = ingest.load_hardware_cwe_ids(Path(args.hw_ids).read_text("utf-8"))
    else:
        hw_ids = ingest.packaged_hardware_cwe_ids()

    snapshot, report = ingest.make_snapshot(
        (records[cve_id] for cve_id in order), cwes, version_tag=args.version_tag
    )
    if not args.no_hw_filter:
        snapshot = ingest.filter_hardware_iot(snapshot, hw_ids)
    ingest.save_snapshot(snapshot, args.out)
    print(f"snapshot {snapshot.version_tag}: {len(snapshot.cves)} CVEs, {len(snapshot.cwes)} CWEs")
    if skipped:
        print(f"skipped {skipped} items without an English description")
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if report.dangling:
        print(f"note: {len(report.dangling)} CVEs reference CWEs missing from the catalog")
    return 0


def cmd_build_index(args) -> int:
    snapshot = ingest.load_snapshot(args.snapshot)
    index = entitymodel.build_index(snapshot)
    entitymodel.save_index(index, args.out)
    print(f"index over {len(index)} documents -> {args.out}")
    return 0


def cmd_build_ontology(args) -> int:
    snapshot = ingest.load_snapshot(args.snapshot)
    dictionaries = load_dictionaries(
        Path(args.cpe_dict) if args.cpe_dict else None,
        Path(args.gazetteer) if args.gazetteer else None,
    )
    store = ontology.TripleStore()
    entries = 0
    for record in snapshot.cves:
        for entry in entitymodel.make_nlp_entry(record, dictionaries):
            ontology.assert_entry(store, entry)
            entries += 1
    report = ontology.validate(store)
    if not report.accepted:
        for violation in report.errors:
            print(f"error: {violation.code}: {violation.message}", file=sys.stderr)
        raise UserError("ontology failed validation")
    Path(args.out).write_bytes(ontology.serialize_ntriples(store))
    stats = ontology.stats(store)
    print(
        f"ontology: {entries} entries, {stats.individual_count} individuals, "
        f"{len(store.triples)} triples -> {args.out}"
    )
    return 0


def cmd_analyze(args) -> int:
    index = entitymodel.load_index(args.index)
    store = ontology.parse_ntriples(_read_bytes(args.ontology))
    try:
        report = analyze_description(index, store, args.description, args.k)
    except ValueError as exc:
        raise UserError(str(exc)) from exc
    if args.json:
        sys.stdout.write(report_json(report))
        return 0
    print(f"query: {report.query}")
    for match in report.matches:
        print(
            f"  {match.cve_id}  {match.similarity * 100:6.2f}%  {match.relevance_band.value:8}"
            f"  {','.join(match.cwe_ids) or '-'}"
        )
    print(f"modal CWE: {report.modal_cwe or '-'}")
    if report.predicted_vector:
        print(f"predicted vector: {report.predicted_vector.canonical()}")
        print(
            f"scores: exploitability {report.scores.exploitability}, "
            f"impact {report.scores.impact}, base {report.scores.base} "
            f"({report.scores.rating.value})"
        )
    else:
        print("predicted vector: no CVSS evidence among matches")
    if report.story and report.story.paths:
        print("story:")
        for path in report.story.paths:
            arrows = f"{path.vulnerability} -> {path.exploit_target} -> {path.attack_impact}"
            cwes = f" [{', '.join(path.cwes)}]" if path.cwes else ""
            print(f"  {arrows}{cwes}")
    return 0


def cmd_query(args) -> int:
    store = ontology.parse_ntriples(_read_bytes(args.ontology))
    try:
        pattern = ontology.parse_query(args.query)
    except ontology.QueryParseError as exc:
        raise UserError(str(exc)) from exc
    result = ontology.query(store, pattern)
    if args.json:
        print(json.dumps({"variables": list(result.variables), "rows": [dict(r) for r in result.rows]}, indent=2, sort_keys=True))
        return 0
    print("\t".join(result.variables))
    for row in result.rows:
        print("\t".join(row[v] for v in result.variables))
    print(f"({len(result.rows)} rows)")
    return 0


def _training_data(snapshot: ingest.CorpusSnapshot):
    vectors = [r.cvss_vector for r in snapshot.cves if r.cvss_vector is not None]
    if len(vectors) < 2:
        raise UserError("snapshot has fewer than 2 CVEs with CVSS vectors")
    features = severity.one_hot(vectors)
    labels = [severity.base_score(v).rating.value for v in vectors]
    return features, labels


def cmd_train(args) -> int:
    snapshot = ingest.load_snapshot(args.snapshot)
    features, labels = _training_data(snapshot)
    config = severity.TreeConfig(
        max_depth=args.max_depth,
        max_leaf_nodes=args.max_leaf_nodes,
        min_samples_split=args.min_samples_split,
    )
    tree = severity.train_tree(features, labels, config)
    severity.save_tree(tree, args.out)
    print(f"tree: {len(tree.nodes)} nodes, {tree.leaf_count()} leaves, depth {tree.depth()}")
    if args.text:
        Path(args.text).write_text(severity.tree_to_text(tree), encoding="utf-8")
        print(f"text rendering -> {args.text}")
    return 0


def cmd_evaluate(args) -> int:
    tree = severity.load_tree(args.tree)
    snapshot = ingest.load_snapshot(args.snapshot)
    features, labels = _training_data(snapshot)
    report = severity.evaluate(tree, features, labels)
    if args.json:
        payload = {
            "accuracy": report.accuracy,
            "macro_precision": report.macro_precision,
            "macro_recall": report.macro_recall,
            "undefined_precision": report.undefined_precision,
            "undefined_recall": report.undefined_recall,
            "per_class": {
                cls: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "support": m.support,
                    "predicted": m.predicted,
                }
                for cls, m in report.per_class.items()
            },
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
        return 0
    print(f"accuracy: {report.accuracy:.4f}")
    for cls, metrics in report.per_class.items():
        precision = "undef" if metrics.precision is None else f"{metrics.precision:.4f}"
        recall = "undef" if metrics.recall is None else f"{metrics.recall:.4f}"
        print(f"  {cls}: precision {precision}, recall {recall}, support {metrics.support}")
    print(f"macro precision {report.macro_precision:.4f}, macro recall {report.macro_recall:.4f}")
    return 0


def cmd_mitigate(args) -> int:
    mode = ProviderMode.LIVE if args.live else ProviderMode.FIXTURE
    if mode is ProviderMode.FIXTURE and not args.fixture_dir:
        raise UserError("FIXTURE mode needs --fixture-dir (or pass --live)")
    config = AdvisorConfig(
        llm=LlmConfig(model_id=args.model, provider_mode=mode),
        fixture_dir=Path(args.fixture_dir) if args.fixture_dir else None,
        cache_dir=Path(args.cache_dir) if args.cache_dir else None,
    )
    template = Path(args.template).read_text("utf-8") if args.template else None
    result = suggest(args.cwe, args.description, config, template=template)
    if args.json:
        print(
            json.dumps(
                {
                    "prompt": result.prompt,
                    "response": result.response,
                    "source_urls": result.source_urls,
                    "warnings": result.warnings,
                },
                indent=2,
                sort_keys=True,
            )
        )
        return 0
    print(result.response)
    for url in result.source_urls:
        print(f"source: {url}")
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import EngineHolder, create_app

    config = EngineConfig.from_file(args.config)
    app = create_app(EngineHolder(config=config))
    uvicorn.run(app, host=config.bind_host, port=config.bind_port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hwv2w")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse NVD feeds + CWE catalog into a snapshot")
    p.add_argument("--nvd", nargs="+", required=True, metavar="FEED")
    p.add_argument("--cwe", required=True, metavar="CSV")
    p.add_argument("--hw-ids", metavar="FILE", help="hardware CWE id list (default: packaged)")
    p.add_argument("--out", required=True)
    p.add_argument("--version-tag", help="override the content-derived tag")
    p.add_argument("--no-hw-filter", action="store_true", help="keep non-hardware CVEs")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-index", help="build the similarity index from a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("build-ontology", help="extract entities and write N-Triples")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cpe-dict")
    p.add_argument("--gazetteer")
    p.set_defaults(func=cmd_build_ontology)

    p = sub.add_parser("analyze", help="rank matches and report severity + story")
    p.add_argument("--index", required=True)
    p.add_argument("--ontology", required=True)
    p.add_argument("description")
    p.add_argument("--k", type=int, default=entitymodel.DEFAULT_TOP_K)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("query", help="run a SELECT/WHERE query against an ontology file")
    p.add_argument("--ontology", required=True)
    p.add_argument("query")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("train", help="train the severity decision tree from a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-depth", type=int, default=6)
    p.add_argument("--max-leaf-nodes", type=int, default=32)
    p.add_argument("--min-samples-split", type=int, default=2)
    p.add_argument("--text", help="also write the indented text rendering here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a trained tree against a snapshot")
    p.add_argument("--tree", required=True)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("mitigate", help="fetch CWE mitigations and ask the LLM")
    p.add_argument("description")
    p.add_argument("--cwe", action="append", required=True, metavar="CWE-N")
    p.add_argument("--fixture-dir")
    p.add_argument("--live", action="store_true", help="fetch pages and call the LLM for real")
    p.add_argument("--model", default="gpt-3.5-turbo")
    p.add_argument("--template")
    p.add_argument("--cache-dir")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_mitigate)

    p = sub.add_parser("serve", help="run the HTTP JSON API")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        UserError,
        ConfigError,
        AdvisorError,
        ingest.IngestError,
        ingest.CvssParseError,
        ontology.StoreError,
        ontology.QueryParseError,
        ontology.NtriplesParseError,
        entitymodel.IndexFormatError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
