"""JSON-over-HTTP API for the analysis engine.

Endpoints mirror the analyst dashboard panels one-to-one; errors use a
{code, message, detail} envelope. Reload swaps in a freshly loaded engine
atomically, so in-flight requests finish on the old snapshot.
"""

from __future__ import annotations

import logging
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .engine import AnalysisReport, ConfigError, Engine, EngineConfig
from .mitigation import (
    AdvisorError,
    ConfigurationError,
    FetchError,
    LlmError,
    TemplateError,
)
from .ontology import QueryParseError

logger = logging.getLogger(__name__)


class EngineHolder:
    """Single mutable slot so reload can swap engines atomically."""

    def __init__(self, config: EngineConfig | None = None, engine: Engine | None = None):
        self.config = config
        self.engine = engine if engine is not None else (Engine(config) if config else None)

    def reload(self) -> Engine:
        if self.config is None:
            raise ConfigError("service was started without a config file")
        fresh = Engine(self.config)
        self.engine = fresh
        return fresh


class AnalyzeRequest(BaseModel):
    description: str
    k: int | None = None


class MitigateRequest(BaseModel):
    description: str
    cwe_ids: list[str]


class QueryRequest(BaseModel):
    query_text: str


def _error(status: int, code: str, message: str, detail=None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "detail": detail},
    )


def create_app(holder: EngineHolder) -> FastAPI:
    app = FastAPI(title="hwv2w analyst service", docs_url=None, redoc_url=None)

    def engine() -> Engine | None:
        return holder.engine

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/corpus/info")
    def corpus_info():
        current = engine()
        if current is None:
            return _error(503, "ENGINE_NOT_READY", "engine is not initialized")
        return current.corpus_info()

    @app.get("/api/ontology/stats")
    def ontology_stats():
        current = engine()
        if current is None:
            return _error(503, "ENGINE_NOT_READY", "engine is not initialized")
        stats = current.ontology_stats()
        return {
            "axiom_count": stats.axiom_count,
            "logical_axioms": stats.logical_axioms,
            "declaration_axioms": stats.declaration_axioms,
            "individual_count": stats.individual_count,
            "class_count": stats.class_count,
            "object_property_count": stats.object_property_count,
        }

    @app.post("/api/ontology/query")
    def ontology_query(request: QueryRequest):
        current = engine()
        if current is None:
            return _error(503, "ENGINE_NOT_READY", "engine is not initialized")
        try:
            result = current.run_query(request.query_text)
        except QueryParseError as exc:
            return _error(
                400,
                "QUERY_PARSE_ERROR",
                str(exc),
                detail={"line": exc.line, "column": exc.column},
            )
        return {"variables": list(result.variables), "rows": [dict(r) for r in result.rows]}

    @app.post("/api/analyze")
    def analyze(request: AnalyzeRequest):
        current = engine()
        if current is None:
            return _error(503, "ENGINE_NOT_READY", "engine is not initialized")
        try:
            report: AnalysisReport = current.analyze(request.description, request.k)
        except ValueError as exc:
            return _error(422, "EMPTY_QUERY", str(exc))
        return report.to_dict()

    @app.post("/api/mitigate")
    def mitigate(request: MitigateRequest):
        current = engine()
        if current is None:
            return _error(503, "ENGINE_NOT_READY", "engine is not initialized")
        try:
            result = current.mitigate(request.description, request.cwe_ids)
        except ValueError as exc:
            return _error(422, "BAD_REQUEST", str(exc))
        except (ConfigurationError, TemplateError) as exc:
            return _error(500, "ADVISOR_CONFIG", str(exc))
        except LlmError as exc:
            return _error(502, "LLM_FAILED", str(exc), detail={"prompt": exc.prompt})
        except FetchError as exc:
            return _error(502, "FETCH_FAILED", str(exc), detail={"status": exc.status})
        except AdvisorError as exc:
            return _error(502, "ADVISOR_FAILED", str(exc))
        return {
            "prompt": result.prompt,
            "response": result.response,
            "source_urls": result.source_urls,
            "warnings": result.warnings,
            "fixture_mode": current.config.llm_mode == "FIXTURE",
        }

    @app.post("/api/reload")
    def reload():
        try:
            fresh = holder.reload()
        except ConfigError as exc:
            return _error(503, "RELOAD_UNAVAILABLE", str(exc))
        except Exception as exc:  # a broken artifact must not kill the old engine
            logger.exception("reload failed")
            return _error(500, "RELOAD_FAILED", str(exc))
        return {"status": "reloaded", "version_tag": fresh.snapshot.version_tag}

    static_dir = holder.config.static_dir if holder.config else None
    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="dashboard")

    return app


def app_from_config(config_path) -> FastAPI:
    config = EngineConfig.from_file(config_path)
    return create_app(EngineHolder(config=config))
