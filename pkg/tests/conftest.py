"""Shared fixtures: pinned corpus artifacts, a socket guard for offline
tests, and a terminal summary line per acceptance criterion.
"""

from __future__ import annotations

import socket
from pathlib import Path

import pytest

from hwv2w import entitymodel, ingest, ontology

FIXTURES = Path(__file__).parent / "fixtures"

_acceptance_results: list[tuple[str, str]] = []


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def pinned_snapshot():
    return ingest.load_snapshot(FIXTURES / "pinned_snapshot.json")


@pytest.fixture(scope="session")
def pinned_index():
    return entitymodel.load_index(FIXTURES / "pinned_index.hwvw")


@pytest.fixture(scope="session")
def pinned_store():
    return ontology.parse_ntriples((FIXTURES / "pinned_ontology.nt").read_bytes())


@pytest.fixture
def no_network(monkeypatch):
    """Any socket connection attempt fails the test."""

    def _blocked(*args, **kwargs):
        raise AssertionError("network access attempted during an offline test")

    monkeypatch.setattr(socket.socket, "connect", _blocked)
    monkeypatch.setattr(socket, "create_connection", _blocked)


def record_acceptance(name: str) -> None:
    _acceptance_results.append((name, "PASS"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance_results:
        terminalreporter.write_line(f"{outcome}: {name}")
